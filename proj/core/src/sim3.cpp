#include "gsreg/sim3.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "gsreg/error.hpp"

namespace gsreg {

namespace {

constexpr double kUnitTol = 1e-9;
constexpr double kSmallAngle = 1e-10;

Eigen::Quaterniond validated_rotation(const Eigen::Quaterniond& q) {
  const double n = q.norm();
  if (!std::isfinite(n) || std::abs(n - 1.0) > kUnitTol) {
    throw InvalidArgument("Sim3: rotation quaternion must have unit norm (got norm " +
                          std::to_string(n) + ")");
  }
  return canonical(q);
}

}  // namespace

Eigen::Matrix3d hat(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(),  //
      v.z(), 0.0, -v.x(),   //
      -v.y(), v.x(), 0.0;
  return m;
}

Eigen::Quaterniond so3_exp(const Eigen::Vector3d& omega) {
  const double theta = omega.norm();
  const double half = 0.5 * theta;
  double k;
  if (theta < kSmallAngle) {
    k = 0.5 - theta * theta / 48.0;
  } else {
    k = std::sin(half) / theta;
  }
  Eigen::Quaterniond q(std::cos(half), k * omega.x(), k * omega.y(), k * omega.z());
  q.normalize();
  return q;
}

Eigen::Vector3d so3_log(const Eigen::Quaterniond& q_in) {
  const Eigen::Quaterniond q = canonical(q_in);
  const Eigen::Vector3d v = q.vec();
  const double sin_half = v.norm();
  if (sin_half < kSmallAngle) {
    return 2.0 * v / q.w();
  }
  const double theta = 2.0 * std::atan2(sin_half, q.w());
  return theta * v / sin_half;
}

double rotation_angle_between(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
  return so3_log(a * b.conjugate()).norm();
}

Eigen::Quaterniond canonical(Eigen::Quaterniond q) {
  // Leave already-unit quaternions bit-identical so serialization round trips are exact.
  const double n = q.norm();
  if (std::abs(n - 1.0) > 4.0 * std::numeric_limits<double>::epsilon()) q.coeffs() /= n;
  if (q.w() < 0.0) {
    q.coeffs() = -q.coeffs();
  }
  return q;
}

Sim3::Sim3(double scale, const Eigen::Quaterniond& rotation, const Eigen::Vector3d& translation)
    : scale_(scale), rotation_(validated_rotation(rotation)), translation_(translation) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw InvalidArgument("Sim3: scale must be positive and finite (got " +
                          std::to_string(scale) + ")");
  }
  if (!translation.allFinite()) {
    throw InvalidArgument("Sim3: translation must be finite");
  }
}

Sim3::Sim3(double scale, const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
    : Sim3(scale, Eigen::Quaterniond(rotation).normalized(), translation) {
  const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).norm();
  if (ortho > 1e-6 || rotation.determinant() < 0.0) {
    throw InvalidArgument("Sim3: rotation matrix is not in SO(3)");
  }
}

Sim3 Sim3::from_params(const std::array<double, 8>& p) {
  Eigen::Quaterniond q(p[1], p[2], p[3], p[4]);
  const double n = q.norm();
  // Reported quaternions are printed with finite precision.
  if (std::abs(n - 1.0) > 1e-6) {
    throw InvalidArgument("Sim3: reported quaternion is not unit (norm " + std::to_string(n) + ")");
  }
  q = canonical(q);
  return {p[0], q, Eigen::Vector3d(p[5], p[6], p[7])};
}

std::array<double, 8> Sim3::params() const {
  return {scale_,          rotation_.w(),   rotation_.x(),   rotation_.y(),
          rotation_.z(),   translation_.x(), translation_.y(), translation_.z()};
}

Sim3 Sim3::operator*(const Sim3& rhs) const {
  Sim3 out;
  out.scale_ = scale_ * rhs.scale_;
  out.rotation_ = canonical(rotation_ * rhs.rotation_);
  out.translation_ = scale_ * (rotation_ * rhs.translation_) + translation_;
  return out;
}

Sim3 Sim3::inverse() const {
  Sim3 out;
  out.scale_ = 1.0 / scale_;
  out.rotation_ = canonical(rotation_.conjugate());
  out.translation_ = -(out.scale_ * (out.rotation_ * translation_));
  return out;
}

Sim3 Sim3::retract(double d_log_scale, const Eigen::Vector3d& d_omega,
                   const Eigen::Vector3d& d_translation) const {
  Sim3 out;
  out.scale_ = scale_ * std::exp(d_log_scale);
  out.rotation_ = canonical(so3_exp(d_omega) * rotation_);
  out.translation_ = translation_ + d_translation;
  return out;
}

double max_param_difference(const Sim3& a, const Sim3& b) {
  const auto pa = a.params();
  const auto pb = b.params();
  double m = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    m = std::max(m, std::abs(pa[i] - pb[i]));
  }
  return m;
}

}  // namespace gsreg
