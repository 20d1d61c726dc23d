#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>

namespace gsreg {

/// Skew-symmetric cross-product matrix of v.
Eigen::Matrix3d hat(const Eigen::Vector3d& v);

/// Rotation exponential: axis-angle vector to unit quaternion.
Eigen::Quaterniond so3_exp(const Eigen::Vector3d& omega);

/// Rotation logarithm: unit quaternion to axis-angle vector, |result| <= pi.
Eigen::Vector3d so3_log(const Eigen::Quaterniond& q);

/// Angle in radians between two rotations.
double rotation_angle_between(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b);

/// Normalizes q and flips it so that its scalar part is non-negative.
Eigen::Quaterniond canonical(Eigen::Quaterniond q);

/**
 * Similarity transform x -> s * R * x + t.
 *
 * The scale is strictly positive and the rotation is kept as a unit
 * quaternion with non-negative scalar part, so two equal transforms have
 * equal parameters. Construction validates both constraints.
 */
class Sim3 {
 public:
  Sim3() = default;
  Sim3(double scale, const Eigen::Quaterniond& rotation, const Eigen::Vector3d& translation);
  Sim3(double scale, const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  static Sim3 identity() { return {}; }
  static Sim3 rigid(const Eigen::Quaterniond& rotation, const Eigen::Vector3d& translation) {
    return {1.0, rotation, translation};
  }

  /// Builds a transform from the 7 reported scalars (s, qw, qx, qy, qz, tx, ty, tz).
  static Sim3 from_params(const std::array<double, 8>& p);
  std::array<double, 8> params() const;

  double scale() const { return scale_; }
  const Eigen::Quaterniond& rotation() const { return rotation_; }
  Eigen::Matrix3d rotation_matrix() const { return rotation_.toRotationMatrix(); }
  const Eigen::Vector3d& translation() const { return translation_; }

  bool is_rigid(double tol = 1e-12) const { return std::abs(scale_ - 1.0) <= tol; }

  Eigen::Vector3d apply(const Eigen::Vector3d& x) const {
    return scale_ * (rotation_ * x) + translation_;
  }
  Eigen::Vector3d operator*(const Eigen::Vector3d& x) const { return apply(x); }

  /// Applies `rhs` first, then `*this`.
  Sim3 operator*(const Sim3& rhs) const;
  Sim3 inverse() const;

  /// Right-hand retraction used by the optimizer: log-scale is additive,
  /// the rotation is perturbed on the left by exp(omega), translation is additive.
  Sim3 retract(double d_log_scale, const Eigen::Vector3d& d_omega,
               const Eigen::Vector3d& d_translation) const;

 private:
  double scale_ = 1.0;
  Eigen::Quaterniond rotation_ = Eigen::Quaterniond::Identity();
  Eigen::Vector3d translation_ = Eigen::Vector3d::Zero();
};

inline Sim3 compose(const Sim3& a, const Sim3& b) { return a * b; }
inline Sim3 inverse(const Sim3& a) { return a.inverse(); }

/// Largest absolute difference over the 8 reported parameters.
double max_param_difference(const Sim3& a, const Sim3& b);

}  // namespace gsreg
