#pragma once

#include <Eigen/Core>
#include <cmath>
#include <random>
#include <vector>

#include "gsreg/sh.hpp"
#include "test_support.hpp"

namespace gsreg::testing {

inline ShCoeffs random_coeffs(std::mt19937_64& rng, int degree) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ShCoeffs c{};
  for (int ch = 0; ch < 3; ++ch)
    for (int k = 0; k < sh_coeff_count(degree); ++k) c[ch * kMaxShCoeffs + k] = u(rng);
  return c;
}

/// D_{mn} = integral of Y_m(d) Y_n(R^T d) over the sphere, by Gauss-Legendre
/// quadrature in cos(theta) and the trapezoid rule in phi (exact for band <= 3 products).
inline Eigen::MatrixXd projected_block(const Eigen::Matrix3d& r, int l) {
  const int nt = 12, np = 24;
  // Gauss-Legendre nodes by Newton iteration on P_nt.
  std::vector<double> x(nt), w(nt);
  for (int i = 0; i < nt; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (nt + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= nt; ++k) {
        const double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double dp = nt * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) {
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        break;
      }
      x[i] = z;
      w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
  }
  const int n = 2 * l + 1;
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < nt; ++i) {
    const double st = std::sqrt(1.0 - x[i] * x[i]);
    for (int j = 0; j < np; ++j) {
      const double phi = 2.0 * M_PI * j / np;
      const Eigen::Vector3d dir(st * std::cos(phi), st * std::sin(phi), x[i]);
      const Eigen::Vector3d back = r.transpose() * dir;
      const double weight = w[i] * 2.0 * M_PI / np;
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          d(a, b) += weight * gsreg::testing::real_sh_reference(l, a - l, dir) *
                     gsreg::testing::real_sh_reference(l, b - l, back);
    }
  }
  return d;
}


}  // namespace gsreg::testing
