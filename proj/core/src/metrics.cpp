#include "gsreg/metrics.hpp"

#include <cmath>
#include <vector>

#include "gsreg/error.hpp"

namespace gsreg {

double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw InvalidArgument("psnr: image shapes differ");
  if (a.data().empty()) throw InvalidArgument("psnr: empty image");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(a.data().size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

Image luminance(const Image& rgb) {
  if (rgb.channels() == 1) return rgb;
  if (rgb.channels() != 3) throw InvalidArgument("luminance: expected 1 or 3 channels");
  Image y(rgb.width(), rgb.height(), 1);
  for (int r = 0; r < rgb.height(); ++r) {
    for (int c = 0; c < rgb.width(); ++c) {
      y(c, r) = 0.299 * rgb(c, r, 0) + 0.587 * rgb(c, r, 1) + 0.114 * rgb(c, r, 2);
    }
  }
  return y;
}

namespace {

// Separable "valid" filtering: output is (w - k + 1) x (h - k + 1).
Image filter_valid(const Image& in, const std::vector<double>& kernel) {
  const int k = static_cast<int>(kernel.size());
  const int w = in.width(), h = in.height();
  const int ow = w - k + 1, oh = h - k + 1;
  Image tmp(ow, h, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += kernel[i] * in(x + i, y);
      tmp(x, y) = s;
    }
  }
  Image out(ow, oh, 1);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += kernel[i] * tmp(x, y + i);
      out(x, y) = s;
    }
  }
  return out;
}

Image product(const Image& a, const Image& b) {
  Image out(a.width(), a.height(), 1);
  for (std::size_t i = 0; i < a.data().size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
  return out;
}

}  // namespace

double ssim(const Image& a, const Image& b, const SsimParams& p) {
  if (!a.same_shape(b)) throw InvalidArgument("ssim: image shapes differ");
  if (a.width() < p.window || a.height() < p.window) {
    throw InvalidArgument("ssim: image smaller than the " + std::to_string(p.window) + "x" +
                          std::to_string(p.window) + " window");
  }
  std::vector<double> kernel(p.window);
  double norm = 0.0;
  const double half = (p.window - 1) / 2.0;
  for (int i = 0; i < p.window; ++i) {
    kernel[i] = std::exp(-(i - half) * (i - half) / (2.0 * p.sigma * p.sigma));
    norm += kernel[i];
  }
  for (double& v : kernel) v /= norm;

  const Image ya = luminance(a), yb = luminance(b);
  const Image mu_a = filter_valid(ya, kernel);
  const Image mu_b = filter_valid(yb, kernel);
  const Image e_aa = filter_valid(product(ya, ya), kernel);
  const Image e_bb = filter_valid(product(yb, yb), kernel);
  const Image e_ab = filter_valid(product(ya, yb), kernel);

  const double c1 = std::pow(p.k1 * p.dynamic_range, 2);
  const double c2 = std::pow(p.k2 * p.dynamic_range, 2);
  double total = 0.0;
  const std::size_t n = mu_a.data().size();
  for (std::size_t i = 0; i < n; ++i) {
    const double ma = mu_a.data()[i], mb = mu_b.data()[i];
    const double va = e_aa.data()[i] - ma * ma;
    const double vb = e_bb.data()[i] - mb * mb;
    const double cov = e_ab.data()[i] - ma * mb;
    total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(n);
}

AlignmentError alignment_error(const Sim3& estimate, const Sim3& truth, const GaussianCloud& cloud,
                               double diameter) {
  if (!(diameter > 0.0)) throw InvalidArgument("alignment_error: diameter must be positive");
  AlignmentError e;
  e.rotation_deg = rotation_angle_between(estimate.rotation(), truth.rotation()) * 180.0 / M_PI;
  e.translation = (estimate.translation() - truth.translation()).norm();
  e.translation_rel = e.translation / diameter;
  e.scale_rel = std::abs(estimate.scale() / truth.scale() - 1.0);
  if (!cloud.empty()) {
    double sum = 0.0;
    for (const auto& g : cloud.gaussians()) sum += (estimate.apply(g.mu) - truth.apply(g.mu)).squaredNorm();
    e.rms_displacement = std::sqrt(sum / static_cast<double>(cloud.size()));
  }
  e.rms_displacement_rel = e.rms_displacement / diameter;
  return e;
}

}  // namespace gsreg
