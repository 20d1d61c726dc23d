#include "gsreg/sh.hpp"

#include <cmath>
#include <string>

#include "gsreg/error.hpp"

namespace gsreg {

namespace {

constexpr double kC1 = 0.4886025119029199;
constexpr std::array<double, 5> kC2 = {1.0925484305920792, -1.0925484305920792,
                                       0.31539156525252005, -1.0925484305920792,
                                       0.5462742152960396};
constexpr std::array<double, 7> kC3 = {-0.5900435899266435, 2.890611442640554,
                                       -0.4570457994644658, 0.3731763325901154,
                                       -0.4570457994644658, 1.445305721320277,
                                       -0.5900435899266435};

void check_degree(int degree) {
  if (degree < 0 || degree > kMaxShDegree) {
    throw InvalidArgument("unsupported SH degree " + std::to_string(degree) +
                          " (supported: 0.." + std::to_string(kMaxShDegree) + ")");
  }
}

// Ivanic-Ruedenberg recurrence, for real SH without the Condon-Shortley
// phase. Matrices are indexed [m + l][n + l].
class WignerRecurrence {
 public:
  explicit WignerRecurrence(const Eigen::Matrix3d& r) {
    // band 1 basis ordering (y, z, x)
    constexpr int axis[3] = {1, 2, 0};
    band1_.resize(3, 3);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        band1_(i, j) = r(axis[i], axis[j]);
      }
    }
  }

  const Eigen::MatrixXd& band1() const { return band1_; }

  Eigen::MatrixXd next(const Eigen::MatrixXd& prev, int l) const {
    Eigen::MatrixXd out(2 * l + 1, 2 * l + 1);
    for (int m = -l; m <= l; ++m) {
      for (int n = -l; n <= l; ++n) {
        const double d = (m == 0) ? 1.0 : 0.0;
        const double denom =
            (std::abs(n) == l) ? double(2 * l * (2 * l - 1)) : double((l + n) * (l - n));
        const int am = std::abs(m);
        const double u = std::sqrt(double((l + m) * (l - m)) / denom);
        const double v = 0.5 * std::sqrt((1.0 + d) * double((l + am - 1) * (l + am)) / denom) *
                         (1.0 - 2.0 * d);
        const double w = -0.5 * std::sqrt(double((l - am - 1) * (l - am)) / denom) * (1.0 - d);

        double value = 0.0;
        if (u != 0.0) value += u * U(prev, l, m, n);
        if (v != 0.0) value += v * V(prev, l, m, n);
        if (w != 0.0) value += w * W(prev, l, m, n);
        out(m + l, n + l) = value;
      }
    }
    return out;
  }

 private:
  double r1(int i, int j) const { return band1_(i + 1, j + 1); }

  static double at(const Eigen::MatrixXd& prev, int l, int a, int b) {
    return prev(a + l - 1, b + l - 1);
  }

  double P(const Eigen::MatrixXd& prev, int i, int l, int a, int b) const {
    if (b == l) {
      return r1(i, 1) * at(prev, l, a, l - 1) - r1(i, -1) * at(prev, l, a, -l + 1);
    }
    if (b == -l) {
      return r1(i, 1) * at(prev, l, a, -l + 1) + r1(i, -1) * at(prev, l, a, l - 1);
    }
    return r1(i, 0) * at(prev, l, a, b);
  }

  double U(const Eigen::MatrixXd& prev, int l, int m, int n) const { return P(prev, 0, l, m, n); }

  double V(const Eigen::MatrixXd& prev, int l, int m, int n) const {
    if (m == 0) {
      return P(prev, 1, l, 1, n) + P(prev, -1, l, -1, n);
    }
    if (m > 0) {
      const double d = (m == 1) ? 1.0 : 0.0;
      return P(prev, 1, l, m - 1, n) * std::sqrt(1.0 + d) - P(prev, -1, l, -m + 1, n) * (1.0 - d);
    }
    const double d = (m == -1) ? 1.0 : 0.0;
    return P(prev, 1, l, m + 1, n) * (1.0 - d) + P(prev, -1, l, -m - 1, n) * std::sqrt(1.0 + d);
  }

  double W(const Eigen::MatrixXd& prev, int l, int m, int n) const {
    if (m > 0) {
      return P(prev, 1, l, m + 1, n) + P(prev, -1, l, -m - 1, n);
    }
    return P(prev, 1, l, m - 1, n) - P(prev, -1, l, -m + 1, n);
  }

  Eigen::MatrixXd band1_;
};

}  // namespace

void sh_basis(const Eigen::Vector3d& dir, int degree, double* out) {
  const double x = dir.x(), y = dir.y(), z = dir.z();
  out[0] = kShC0;
  if (degree < 1) return;
  out[1] = -kC1 * y;
  out[2] = kC1 * z;
  out[3] = -kC1 * x;
  if (degree < 2) return;
  const double xx = x * x, yy = y * y, zz = z * z;
  out[4] = kC2[0] * x * y;
  out[5] = kC2[1] * y * z;
  out[6] = kC2[2] * (2.0 * zz - xx - yy);
  out[7] = kC2[3] * x * z;
  out[8] = kC2[4] * (xx - yy);
  if (degree < 3) return;
  out[9] = kC3[0] * y * (3.0 * xx - yy);
  out[10] = kC3[1] * x * y * z;
  out[11] = kC3[2] * y * (4.0 * zz - xx - yy);
  out[12] = kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
  out[13] = kC3[4] * x * (4.0 * zz - xx - yy);
  out[14] = kC3[5] * z * (xx - yy);
  out[15] = kC3[6] * x * (xx - 3.0 * yy);
}

void sh_basis_with_gradient(const Eigen::Vector3d& dir, int degree, double* out,
                            Eigen::Matrix<double, kMaxShCoeffs, 3>& grad) {
  sh_basis(dir, degree, out);
  grad.setZero();
  if (degree < 1) return;
  const double x = dir.x(), y = dir.y(), z = dir.z();
  grad.row(1) << 0.0, -kC1, 0.0;
  grad.row(2) << 0.0, 0.0, kC1;
  grad.row(3) << -kC1, 0.0, 0.0;
  if (degree < 2) return;
  const double xx = x * x, yy = y * y, zz = z * z;
  grad.row(4) = kC2[0] * Eigen::RowVector3d(y, x, 0.0);
  grad.row(5) = kC2[1] * Eigen::RowVector3d(0.0, z, y);
  grad.row(6) = kC2[2] * Eigen::RowVector3d(-2.0 * x, -2.0 * y, 4.0 * z);
  grad.row(7) = kC2[3] * Eigen::RowVector3d(z, 0.0, x);
  grad.row(8) = kC2[4] * Eigen::RowVector3d(2.0 * x, -2.0 * y, 0.0);
  if (degree < 3) return;
  grad.row(9) = kC3[0] * Eigen::RowVector3d(6.0 * x * y, 3.0 * xx - 3.0 * yy, 0.0);
  grad.row(10) = kC3[1] * Eigen::RowVector3d(y * z, x * z, x * y);
  grad.row(11) = kC3[2] * Eigen::RowVector3d(-2.0 * x * y, 4.0 * zz - xx - 3.0 * yy, 8.0 * y * z);
  grad.row(12) =
      kC3[3] * Eigen::RowVector3d(-6.0 * x * z, -6.0 * y * z, 6.0 * zz - 3.0 * xx - 3.0 * yy);
  grad.row(13) = kC3[4] * Eigen::RowVector3d(4.0 * zz - 3.0 * xx - yy, -2.0 * x * y, 8.0 * x * z);
  grad.row(14) = kC3[5] * Eigen::RowVector3d(2.0 * x * z, -2.0 * y * z, xx - yy);
  grad.row(15) = kC3[6] * Eigen::RowVector3d(3.0 * xx - 3.0 * yy, -6.0 * x * y, 0.0);
}

Eigen::Vector3d sh_evaluate(const ShCoeffs& sh, int degree, const Eigen::Vector3d& dir) {
  check_degree(degree);
  const double n = dir.norm();
  if (!std::isfinite(n) || std::abs(n - 1.0) > 1e-6) {
    throw InvalidArgument("sh_evaluate: direction must be unit length (norm " +
                          std::to_string(n) + ")");
  }
  double basis[kMaxShCoeffs];
  sh_basis(dir, degree, basis);
  const int count = sh_coeff_count(degree);
  Eigen::Vector3d rgb = Eigen::Vector3d::Constant(kShColorOffset);
  for (int c = 0; c < 3; ++c) {
    for (int k = 0; k < count; ++k) {
      rgb[c] += sh[c * kMaxShCoeffs + k] * basis[k];
    }
  }
  return rgb;
}

std::vector<Eigen::MatrixXd> sh_rotation_matrices(const Eigen::Matrix3d& rotation, int degree) {
  check_degree(degree);
  std::vector<Eigen::MatrixXd> blocks;
  blocks.reserve(degree + 1);
  blocks.push_back(Eigen::MatrixXd::Identity(1, 1));
  if (degree == 0) return blocks;

  const WignerRecurrence recurrence(rotation);
  std::vector<Eigen::MatrixXd> plain;
  plain.push_back(recurrence.band1());
  for (int l = 2; l <= degree; ++l) {
    plain.push_back(recurrence.next(plain.back(), l));
  }
  // The 3DGS basis carries a (-1)^m sign per coefficient relative to the
  // recurrence basis; conjugate each block by that diagonal.
  for (int l = 1; l <= degree; ++l) {
    Eigen::MatrixXd block = plain[l - 1];
    for (int m = -l; m <= l; ++m) {
      for (int n = -l; n <= l; ++n) {
        if (((m + n) & 1) != 0) block(m + l, n + l) = -block(m + l, n + l);
      }
    }
    blocks.push_back(std::move(block));
  }
  return blocks;
}

void rotate_sh(ShCoeffs& sh, int degree, const std::vector<Eigen::MatrixXd>& blocks) {
  check_degree(degree);
  if (static_cast<int>(blocks.size()) < degree + 1) {
    throw InvalidArgument("rotate_sh: missing rotation blocks");
  }
  for (int c = 0; c < 3; ++c) {
    double* channel = sh.data() + c * kMaxShCoeffs;
    for (int l = 1; l <= degree; ++l) {
      const int offset = l * l;
      const int size = 2 * l + 1;
      Eigen::Map<Eigen::VectorXd> band(channel + offset, size);
      const Eigen::VectorXd rotated = blocks[l] * band;
      band = rotated;
    }
  }
}

}  // namespace gsreg
