#pragma once

#include <Eigen/Core>
#include <vector>

#include "gsreg/sim3.hpp"

namespace gsreg {

/// Static 3-d tree over a fixed point set for exact nearest-neighbour queries.
class KdTree {
 public:
  explicit KdTree(Eigen::Matrix3Xd points);

  /// Index of the closest point (ties go to the smaller index) and its squared distance.
  std::pair<std::size_t, double> nearest(const Eigen::Vector3d& query) const;
  std::size_t size() const { return static_cast<std::size_t>(points_.cols()); }

 private:
  struct Node {
    int axis = -1;        // -1 marks a leaf
    double split = 0.0;
    int left = -1, right = -1;
    std::size_t begin = 0, end = 0;
  };
  int build(std::size_t begin, std::size_t end, int depth);
  void search(int node, const Eigen::Vector3d& q, std::size_t& best, double& best_d2) const;

  Eigen::Matrix3Xd points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

/// Closed-form least-squares similarity with dst ~ T(src); throws on rank-deficient input.
Sim3 umeyama_fit(const Eigen::Matrix3Xd& src, const Eigen::Matrix3Xd& dst);

struct IcpResult {
  Sim3 transform;
  int iterations = 0;
  bool converged = false;       ///< correspondences stopped changing
  bool collapsed = false;       ///< matches became degenerate; transform is the last valid fit
  double rms_residual = 0.0;    ///< over the final correspondences
};

/**
 * ICP with scale: repeatedly pairs every point of T(means2) with its nearest
 * neighbour in means1 and refits T by Umeyama, stopping when the
 * correspondence set is unchanged or after `iters` rounds. Points are
 * columns; each set needs at least 4 points that are not collinear.
 */
IcpResult icp_umeyama(const Eigen::Matrix3Xd& means1, const Eigen::Matrix3Xd& means2,
                      const Sim3& init, int iters = 50);

}  // namespace gsreg
