#include "gsreg/icp.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gsreg/error.hpp"
#include "gsreg/parallel.hpp"

namespace gsreg {

namespace {

constexpr std::size_t kLeafSize = 8;

void require_spread(const Eigen::Matrix3Xd& p, const char* which) {
  if (p.cols() < 4) {
    throw InvalidArgument(std::string("icp: ") + which + " needs at least 4 points");
  }
  const Eigen::Matrix3Xd centered = p.colwise() - p.rowwise().mean();
  const Eigen::Vector3d sv = Eigen::JacobiSVD<Eigen::Matrix3d>(centered * centered.transpose()).singularValues();
  if (!(sv[0] > 0.0) || sv[1] <= 1e-12 * sv[0]) {
    throw InvalidArgument(std::string("icp: ") + which + " is rank-deficient (collinear or coincident)");
  }
}

}  // namespace

KdTree::KdTree(Eigen::Matrix3Xd points) : points_(std::move(points)), order_(points_.cols()) {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (!order_.empty()) build(0, order_.size(), 0);
}

int KdTree::build(std::size_t begin, std::size_t end, int depth) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({});
  if (end - begin <= kLeafSize) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  for (std::size_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_.col(order_[i]));
    hi = hi.cwiseMax(points_.col(order_[i]));
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  (void)depth;
  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::size_t a, std::size_t b) {
                     return points_(axis, a) < points_(axis, b) ||
                            (points_(axis, a) == points_(axis, b) && a < b);
                   });
  const double split = points_(axis, order_[mid]);
  const int left = build(begin, mid, depth + 1);
  const int right = build(mid, end, depth + 1);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::search(int node, const Eigen::Vector3d& q, std::size_t& best, double& best_d2) const {
  const Node& n = nodes_[node];
  if (n.axis < 0) {
    for (std::size_t i = n.begin; i < n.end; ++i) {
      const std::size_t idx = order_[i];
      const double d2 = (points_.col(idx) - q).squaredNorm();
      if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
        best_d2 = d2;
        best = idx;
      }
    }
    return;
  }
  const double diff = q[n.axis] - n.split;
  const int near = diff < 0 ? n.left : n.right;
  const int far = diff < 0 ? n.right : n.left;
  search(near, q, best, best_d2);
  if (diff * diff <= best_d2) search(far, q, best, best_d2);
}

std::pair<std::size_t, double> KdTree::nearest(const Eigen::Vector3d& query) const {
  if (nodes_.empty()) throw InvalidArgument("KdTree::nearest: empty tree");
  std::size_t best = std::numeric_limits<std::size_t>::max();
  double best_d2 = std::numeric_limits<double>::infinity();
  search(0, query, best, best_d2);
  return {best, best_d2};
}

Sim3 umeyama_fit(const Eigen::Matrix3Xd& src, const Eigen::Matrix3Xd& dst) {
  if (src.cols() != dst.cols()) throw InvalidArgument("umeyama_fit: point counts differ");
  require_spread(src, "source set");
  require_spread(dst, "target set");
  const Eigen::Matrix4d m = Eigen::umeyama(src, dst, true);
  const Eigen::Matrix3d sr = m.topLeftCorner<3, 3>();
  const double s = std::cbrt(sr.determinant());
  if (!(s > 0.0) || !std::isfinite(s)) throw StageError("umeyama_fit: degenerate similarity");
  Eigen::Matrix3d r = sr / s;
  // Re-orthonormalize against rounding before handing it to Sim3's validator.
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  r = svd.matrixU() * svd.matrixV().transpose();
  return {s, r, m.topRightCorner<3, 1>()};
}

IcpResult icp_umeyama(const Eigen::Matrix3Xd& means1, const Eigen::Matrix3Xd& means2,
                      const Sim3& init, int iters) {
  if (iters < 1) throw InvalidArgument("icp_umeyama: iters must be >= 1");
  require_spread(means1, "means1");
  require_spread(means2, "means2");
  const KdTree tree(means1);
  const std::size_t n = static_cast<std::size_t>(means2.cols());

  IcpResult result;
  result.transform = init;
  std::vector<std::size_t> match(n), previous;
  std::vector<double> dist2(n);
  Eigen::Matrix3Xd dst(3, static_cast<Eigen::Index>(n));
  for (int it = 0; it < iters; ++it) {
    const Sim3 current = result.transform;
    parallel_for(n, [&](std::size_t begin, std::size_t end, int) {
      for (std::size_t j = begin; j < end; ++j) {
        const auto [idx, d2] = tree.nearest(current.apply(means2.col(j)));
        match[j] = idx;
        dist2[j] = d2;
      }
    });
    if (match == previous) {
      result.converged = true;
      break;
    }
    for (std::size_t j = 0; j < n; ++j) dst.col(j) = means1.col(match[j]);
    try {
      result.transform = umeyama_fit(means2, dst);
    } catch (const Error&) {
      result.collapsed = true;
      break;
    }
    result.iterations = it + 1;
    previous = match;
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    sum += (result.transform.apply(means2.col(j)) - means1.col(match[j])).squaredNorm();
  }
  result.rms_residual = std::sqrt(sum / static_cast<double>(n));
  return result;
}

}  // namespace gsreg
