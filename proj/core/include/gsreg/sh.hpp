#pragma once

#include <Eigen/Core>

#include <array>
#include <vector>

namespace gsreg {

inline constexpr int kMaxShDegree = 3;
inline constexpr int kMaxShCoeffs = (kMaxShDegree + 1) * (kMaxShDegree + 1);

/// Conventional DC offset added to the SH expansion by 3DGS renderers.
inline constexpr double kShColorOffset = 0.5;
inline constexpr double kShC0 = 0.28209479177387814;

/// Per-channel real SH coefficients, channel-major with a fixed stride of
/// kMaxShCoeffs: coefficient k of channel c lives at [c * kMaxShCoeffs + k].
/// Entries beyond the cloud's degree are zero.
using ShCoeffs = std::array<double, 3 * kMaxShCoeffs>;

constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

/// Real SH basis in the 3DGS convention (band 1 ordered y, z, x, Condon-Shortley
/// signs included). `dir` is assumed unit; `out` receives sh_coeff_count(degree) values.
void sh_basis(const Eigen::Vector3d& dir, int degree, double* out);

/// Basis values plus their gradient with respect to the (unnormalized)
/// polynomial argument; grad is row-per-coefficient.
void sh_basis_with_gradient(const Eigen::Vector3d& dir, int degree, double* out,
                            Eigen::Matrix<double, kMaxShCoeffs, 3>& grad);

/// Evaluates the SH color at a unit direction, including the 0.5 DC offset.
/// Throws InvalidArgument when |dir| differs from 1 by more than 1e-6.
Eigen::Vector3d sh_evaluate(const ShCoeffs& sh, int degree, const Eigen::Vector3d& dir);

/**
 * Per-band Wigner-D matrices for real SH (bands 0..degree), built by the
 * Ivanic-Ruedenberg recurrence from the band-1 block. Applying band block l to
 * the band-l coefficients of a color channel yields the coefficients of the
 * rotated function f'(d) = f(R^T d).
 */
std::vector<Eigen::MatrixXd> sh_rotation_matrices(const Eigen::Matrix3d& rotation, int degree);

/// Applies sh_rotation_matrices blocks to every color channel in place.
void rotate_sh(ShCoeffs& sh, int degree, const std::vector<Eigen::MatrixXd>& blocks);

}  // namespace gsreg
