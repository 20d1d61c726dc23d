#include "gsreg/gaussian.hpp"

#include <cmath>

#include "gsreg/error.hpp"

namespace gsreg {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) { return std::log(p / (1.0 - p)); }

double Gaussian::opacity() const { return sigmoid(opacity_logit); }

Eigen::Matrix3d Gaussian::covariance() const {
  const Eigen::Matrix3d r = rot.toRotationMatrix();
  const Eigen::Vector3d var = (2.0 * log_scale).array().exp();
  return r * var.asDiagonal() * r.transpose();
}

bool Gaussian::operator==(const Gaussian& other) const {
  return mu == other.mu && rot.coeffs() == other.rot.coeffs() && log_scale == other.log_scale &&
         opacity_logit == other.opacity_logit && sh == other.sh;
}

void validate_gaussian(const Gaussian& g, int sh_degree) {
  if (!g.mu.allFinite()) throw InvalidArgument("gaussian: non-finite mean");
  const double n = g.rot.norm();
  if (!std::isfinite(n) || std::abs(n - 1.0) > 1e-9) {
    throw InvalidArgument("gaussian: rotation quaternion is not unit (norm " +
                          std::to_string(n) + ")");
  }
  if (!g.log_scale.allFinite()) throw InvalidArgument("gaussian: non-finite log_scale");
  if (!std::isfinite(g.opacity_logit)) throw InvalidArgument("gaussian: non-finite opacity");
  const int count = sh_coeff_count(sh_degree);
  for (int c = 0; c < 3; ++c) {
    for (int k = 0; k < kMaxShCoeffs; ++k) {
      const double v = g.sh[c * kMaxShCoeffs + k];
      if (!std::isfinite(v)) throw InvalidArgument("gaussian: non-finite SH coefficient");
      if (k >= count && v != 0.0) {
        throw InvalidArgument("gaussian: SH coefficient above degree " +
                              std::to_string(sh_degree) + " is non-zero");
      }
    }
  }
}

GaussianCloud::GaussianCloud(int sh_degree, std::string frame_label)
    : sh_degree_(sh_degree), frame_label_(std::move(frame_label)) {
  if (sh_degree < 0 || sh_degree > kMaxShDegree) {
    throw InvalidArgument("unsupported SH degree " + std::to_string(sh_degree));
  }
}

GaussianCloud::GaussianCloud(int sh_degree, std::vector<Gaussian> gaussians,
                             std::string frame_label)
    : GaussianCloud(sh_degree, std::move(frame_label)) {
  for (const auto& g : gaussians) validate_gaussian(g, sh_degree_);
  gaussians_ = std::move(gaussians);
}

void GaussianCloud::push_back(const Gaussian& g) {
  validate_gaussian(g, sh_degree_);
  gaussians_.push_back(g);
}

GaussianCloud GaussianCloud::with_sh_degree(int degree) const {
  if (degree < sh_degree_) {
    throw InvalidArgument("with_sh_degree: cannot lower SH degree from " +
                          std::to_string(sh_degree_) + " to " + std::to_string(degree));
  }
  // Higher bands are already zero in fixed-stride storage.
  GaussianCloud out(degree, frame_label_);
  out.gaussians_ = gaussians_;
  return out;
}

Eigen::Matrix3Xd GaussianCloud::means() const {
  Eigen::Matrix3Xd m(3, gaussians_.size());
  for (std::size_t i = 0; i < gaussians_.size(); ++i) m.col(i) = gaussians_[i].mu;
  return m;
}

GaussianCloud transform_cloud(const GaussianCloud& cloud, const Sim3& transform,
                              const std::string& frame_label) {
  GaussianCloud out(cloud.sh_degree(), frame_label.empty() ? cloud.frame_label() : frame_label);
  if (cloud.empty()) return out;

  const double log_s = std::log(transform.scale());
  const bool identity = transform.params() == Sim3::identity().params();
  const auto blocks = sh_rotation_matrices(transform.rotation_matrix(), cloud.sh_degree());

  std::vector<Gaussian> result(cloud.gaussians());
  if (!identity) {
    for (auto& g : result) {
      g.mu = transform.apply(g.mu);
      g.rot = canonical(transform.rotation() * g.rot);
      g.log_scale.array() += log_s;
      rotate_sh(g.sh, cloud.sh_degree(), blocks);
    }
  }
  return GaussianCloud(cloud.sh_degree(), std::move(result), out.frame_label());
}

double scene_diameter(const GaussianCloud& cloud) {
  if (cloud.size() < 2) return 0.0;
  const Eigen::Matrix3Xd m = cloud.means();
  return (m.rowwise().maxCoeff() - m.rowwise().minCoeff()).norm();
}

}  // namespace gsreg
