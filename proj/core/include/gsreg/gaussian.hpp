#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <string>
#include <vector>

#include "gsreg/sh.hpp"
#include "gsreg/sim3.hpp"

namespace gsreg {

/// One anisotropic 3D Gaussian in the factored 3DGS parameterization.
struct Gaussian {
  Eigen::Vector3d mu = Eigen::Vector3d::Zero();
  Eigen::Quaterniond rot = Eigen::Quaterniond::Identity();  ///< unit, principal axes
  Eigen::Vector3d log_scale = Eigen::Vector3d::Zero();      ///< log std-dev per axis
  double opacity_logit = 0.0;
  ShCoeffs sh{};

  double opacity() const;
  /// World-space covariance R diag(exp(2 log_scale)) R^T.
  Eigen::Matrix3d covariance() const;

  bool operator==(const Gaussian& other) const;
};

double sigmoid(double x);
double logit(double p);

/**
 * Ordered set of Gaussians sharing one SH degree, tagged with the label of
 * the coordinate frame its coordinates are expressed in.
 */
class GaussianCloud {
 public:
  GaussianCloud() = default;
  explicit GaussianCloud(int sh_degree, std::string frame_label = {});
  GaussianCloud(int sh_degree, std::vector<Gaussian> gaussians, std::string frame_label = {});

  int sh_degree() const { return sh_degree_; }
  const std::string& frame_label() const { return frame_label_; }
  void set_frame_label(std::string label) { frame_label_ = std::move(label); }

  std::size_t size() const { return gaussians_.size(); }
  bool empty() const { return gaussians_.empty(); }
  const std::vector<Gaussian>& gaussians() const { return gaussians_; }
  const Gaussian& operator[](std::size_t i) const { return gaussians_[i]; }

  /// Validates and appends; throws InvalidArgument if `g` breaks an invariant.
  void push_back(const Gaussian& g);
  void reserve(std::size_t n) { gaussians_.reserve(n); }

  /// Returns a copy at a higher SH degree; missing bands are zero.
  GaussianCloud with_sh_degree(int degree) const;

  /// Means as a 3 x N matrix.
  Eigen::Matrix3Xd means() const;

  bool operator==(const GaussianCloud& other) const = default;

 private:
  int sh_degree_ = 0;
  std::vector<Gaussian> gaussians_;
  std::string frame_label_;
};

/// Throws InvalidArgument describing the first broken invariant of `g`.
void validate_gaussian(const Gaussian& g, int sh_degree);

/**
 * Pushes every Gaussian of `cloud` through the similarity `transform`:
 * means map by s R mu + t, the covariance becomes s^2 R Sigma R^T (rotation
 * left-multiplied, log(s) added to every log-scale), opacity is untouched and
 * each color channel's SH bands are rotated by the Wigner-D blocks of R.
 *
 * Length and order are preserved; the result carries `frame_label` when
 * given, otherwise the source label.
 */
GaussianCloud transform_cloud(const GaussianCloud& cloud, const Sim3& transform,
                              const std::string& frame_label = {});

/// Axis-aligned bounding-box diagonal of the means; 0 for fewer than 2 points.
double scene_diameter(const GaussianCloud& cloud);

}  // namespace gsreg
