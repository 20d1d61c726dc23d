#include "gsreg/renderer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "gsreg/error.hpp"
#include "gsreg/parallel.hpp"

namespace gsreg {

namespace {

using RC = RasterConstants;
constexpr int kTile = RC::kTileSize;
constexpr double kCutoffR2 = RC::kExtentSigma * RC::kExtentSigma;

const double kKernelFloor = std::exp(-0.5 * kCutoffR2);
const double kKernelNorm = 1.0 / (1.0 - kKernelFloor);

/// Shifted, truncated footprint kernel; continuous at the 3-sigma boundary.
inline double kernel(double r2) { return (std::exp(-0.5 * r2) - kKernelFloor) * kKernelNorm; }

struct Splat {
  Eigen::Vector2d mean;
  double conic_a, conic_b, conic_c;
  double opacity;
  Eigen::Vector3d color;
  double depth;
  int tile_x0, tile_y0, tile_x1, tile_y1;
  std::uint32_t source;
};

/// Forward intermediates kept for the backward pass.
struct SplatCache {
  Eigen::Vector3d mu;  // transformed world position
  Eigen::Vector3d cam;
  Eigen::Matrix3d sigma;  // transformed world covariance
  Eigen::Matrix3d view_cov;
  Eigen::Matrix<double, 2, 3> jacobian;
  bool clamp_x, clamp_y;
  double tan_x, tan_y;
  Eigen::Vector3d dir_unit;
  double dir_norm;
  Eigen::Vector3d local_dir;  // direction in the untransformed SH frame
  std::array<bool, 3> color_active;
};

struct Projection {
  std::vector<Splat> splats;  // front to back
  std::vector<SplatCache> cache;
};

void check_view(const CameraView& view) {
  if (!(view.fx() > 0.0) || !(view.fy() > 0.0) || view.width() <= 0 || view.height() <= 0 ||
      !std::isfinite(view.fx()) || !std::isfinite(view.fy())) {
    throw InvalidArgument("render: degenerate intrinsics");
  }
}

Projection project(const GaussianCloud& cloud, const CameraView& view, const Sim3& transform,
                   bool keep_cache) {
  const int degree = cloud.sh_degree();
  const int coeffs = sh_coeff_count(degree);
  const double s = transform.scale();
  const Eigen::Matrix3d r = transform.rotation_matrix();
  const Eigen::Vector3d t = transform.translation();
  const Eigen::Matrix3d rw = view.world_to_cam().rotation_matrix();
  const Eigen::Vector3d tw = view.world_to_cam().translation();
  const Eigen::Vector3d cam_center = view.center();
  const double fx = view.fx(), fy = view.fy(), cx = view.cx(), cy = view.cy();
  const double lim_x = 1.3 * std::max(cx, view.width() - cx) / fx;
  const double lim_y = 1.3 * std::max(cy, view.height() - cy) / fy;
  const int tiles_x = (view.width() + kTile - 1) / kTile;
  const int tiles_y = (view.height() + kTile - 1) / kTile;

  std::vector<Splat> splats;
  std::vector<SplatCache> cache;
  splats.reserve(cloud.size());
  if (keep_cache) cache.reserve(cloud.size());

  double basis[kMaxShCoeffs];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Gaussian& g = cloud[i];
    const Eigen::Vector3d mu = s * (r * g.mu) + t;
    const Eigen::Vector3d pc = rw * mu + tw;
    const double z = pc.z();
    if (z < RC::kNearPlane) continue;

    const Eigen::Matrix3d rg = r * g.rot.toRotationMatrix();
    const Eigen::Vector3d var = (2.0 * g.log_scale).array().exp() * (s * s);
    const Eigen::Matrix3d sigma = rg * var.asDiagonal() * rg.transpose();
    const Eigen::Matrix3d view_cov = rw * sigma * rw.transpose();

    const double tx_raw = pc.x() / z, ty_raw = pc.y() / z;
    const double tx = std::clamp(tx_raw, -lim_x, lim_x);
    const double ty = std::clamp(ty_raw, -lim_y, lim_y);
    Eigen::Matrix<double, 2, 3> jac;
    jac << fx / z, 0.0, -fx * tx / z,  //
        0.0, fy / z, -fy * ty / z;
    Eigen::Matrix2d cov2 = jac * view_cov * jac.transpose();
    cov2(0, 0) += RC::kDilation;
    cov2(1, 1) += RC::kDilation;
    const double det = cov2(0, 0) * cov2(1, 1) - cov2(0, 1) * cov2(0, 1);
    if (!(det > 0.0)) continue;

    const Eigen::Vector2d mean(fx * tx_raw + cx, fy * ty_raw + cy);
    const double mid = 0.5 * (cov2(0, 0) + cov2(1, 1));
    const double lambda = mid + std::sqrt(std::max(0.1, mid * mid - det));
    const double radius = std::ceil(RC::kExtentSigma * std::sqrt(lambda));
    const int x0 = std::max(0, static_cast<int>(std::floor((mean.x() - radius) / kTile)));
    const int y0 = std::max(0, static_cast<int>(std::floor((mean.y() - radius) / kTile)));
    const int x1 = std::min(tiles_x, static_cast<int>(std::floor((mean.x() + radius) / kTile)) + 1);
    const int y1 = std::min(tiles_y, static_cast<int>(std::floor((mean.y() + radius) / kTile)) + 1);
    if (x0 >= x1 || y0 >= y1) continue;

    const Eigen::Vector3d dir = mu - cam_center;
    const double dir_norm = dir.norm();
    const Eigen::Vector3d dir_unit = dir_norm > 0.0 ? Eigen::Vector3d(dir / dir_norm)
                                                    : Eigen::Vector3d(0.0, 0.0, 1.0);
    const Eigen::Vector3d local_dir = r.transpose() * dir_unit;
    sh_basis(local_dir, degree, basis);
    Eigen::Vector3d color;
    std::array<bool, 3> active{};
    for (int c = 0; c < 3; ++c) {
      double v = kShColorOffset;
      for (int k = 0; k < coeffs; ++k) v += g.sh[c * kMaxShCoeffs + k] * basis[k];
      active[c] = v > 0.0 && v < 1.0;
      color[c] = std::clamp(v, 0.0, 1.0);
    }

    Splat sp;
    sp.mean = mean;
    sp.conic_a = cov2(1, 1) / det;
    sp.conic_b = -cov2(0, 1) / det;
    sp.conic_c = cov2(0, 0) / det;
    sp.opacity = g.opacity();
    sp.color = color;
    sp.depth = z;
    sp.tile_x0 = x0;
    sp.tile_y0 = y0;
    sp.tile_x1 = x1;
    sp.tile_y1 = y1;
    sp.source = static_cast<std::uint32_t>(i);
    splats.push_back(sp);

    if (keep_cache) {
      SplatCache c;
      c.mu = mu;
      c.cam = pc;
      c.sigma = sigma;
      c.view_cov = view_cov;
      c.jacobian = jac;
      c.clamp_x = tx != tx_raw;
      c.clamp_y = ty != ty_raw;
      c.tan_x = tx;
      c.tan_y = ty;
      c.dir_unit = dir_unit;
      c.dir_norm = dir_norm;
      c.local_dir = local_dir;
      c.color_active = active;
      cache.push_back(c);
    }
  }

  std::vector<std::uint32_t> order(splats.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (splats[a].depth != splats[b].depth) return splats[a].depth < splats[b].depth;
    return splats[a].source < splats[b].source;
  });
  Projection out;
  out.splats.reserve(splats.size());
  for (auto idx : order) out.splats.push_back(splats[idx]);
  if (keep_cache) {
    out.cache.reserve(cache.size());
    for (auto idx : order) out.cache.push_back(cache[idx]);
  }
  return out;
}

/// Per-tile splat lists in CSR form, each list front to back.
struct TileBins {
  int tiles_x = 0, tiles_y = 0;
  std::vector<std::uint32_t> offsets;
  std::vector<std::uint32_t> items;

  std::size_t tile_count() const { return static_cast<std::size_t>(tiles_x) * tiles_y; }
};

TileBins bin_splats(const std::vector<Splat>& splats, const CameraView& view) {
  TileBins bins;
  bins.tiles_x = (view.width() + kTile - 1) / kTile;
  bins.tiles_y = (view.height() + kTile - 1) / kTile;
  bins.offsets.assign(bins.tile_count() + 1, 0);
  for (const Splat& s : splats) {
    for (int ty = s.tile_y0; ty < s.tile_y1; ++ty) {
      for (int tx = s.tile_x0; tx < s.tile_x1; ++tx) ++bins.offsets[ty * bins.tiles_x + tx + 1];
    }
  }
  std::partial_sum(bins.offsets.begin(), bins.offsets.end(), bins.offsets.begin());
  bins.items.resize(bins.offsets.back());
  std::vector<std::uint32_t> cursor(bins.offsets.begin(), bins.offsets.end() - 1);
  for (std::uint32_t i = 0; i < splats.size(); ++i) {
    const Splat& s = splats[i];
    for (int ty = s.tile_y0; ty < s.tile_y1; ++ty) {
      for (int tx = s.tile_x0; tx < s.tile_x1; ++tx) bins.items[cursor[ty * bins.tiles_x + tx]++] = i;
    }
  }
  return bins;
}

struct RasterState {
  std::vector<double> final_transmittance;
  std::vector<std::uint32_t> last;  // one past the last processed list entry
};

RenderOutput rasterize(const std::vector<Splat>& splats, const TileBins& bins,
                       const CameraView& view, RasterState* state) {
  const int w = view.width(), h = view.height();
  RenderOutput out{Image(w, h, 3), Image(w, h, 1), Image(w, h, 1)};
  if (state) {
    state->final_transmittance.assign(static_cast<std::size_t>(w) * h, 1.0);
    state->last.assign(static_cast<std::size_t>(w) * h, 0);
  }
  parallel_for(bins.tile_count(), [&](std::size_t begin, std::size_t end, int) {
    for (std::size_t tile = begin; tile < end; ++tile) {
      const int tx = static_cast<int>(tile % bins.tiles_x);
      const int ty = static_cast<int>(tile / bins.tiles_x);
      const std::uint32_t list_begin = bins.offsets[tile];
      const std::uint32_t list_end = bins.offsets[tile + 1];
      for (int py = ty * kTile; py < std::min(h, (ty + 1) * kTile); ++py) {
        for (int px = tx * kTile; px < std::min(w, (tx + 1) * kTile); ++px) {
          double trans = 1.0;
          Eigen::Vector3d rgb = Eigen::Vector3d::Zero();
          double depth = 0.0;
          std::uint32_t last = list_begin;
          for (std::uint32_t k = list_begin; k < list_end; ++k) {
            const Splat& s = splats[bins.items[k]];
            const double dx = px - s.mean.x();
            const double dy = py - s.mean.y();
            const double r2 = s.conic_a * dx * dx + 2.0 * s.conic_b * dx * dy + s.conic_c * dy * dy;
            if (r2 >= kCutoffR2) continue;
            const double alpha = std::min(RC::kMaxAlpha, s.opacity * kernel(r2));
            if (alpha <= 0.0) continue;
            const double weight = trans * alpha;
            rgb += weight * s.color;
            depth += weight * s.depth;
            trans *= 1.0 - alpha;
            last = k + 1;
            if (trans < RC::kMinTransmittance) break;
          }
          const double acc = 1.0 - trans;
          for (int c = 0; c < 3; ++c) out.rgb(px, py, c) = rgb[c];
          out.alpha(px, py) = acc;
          out.depth(px, py) = acc > 0.0 ? depth / acc : 0.0;
          if (state) {
            const std::size_t p = static_cast<std::size_t>(py) * w + px;
            state->final_transmittance[p] = trans;
            state->last[p] = last;
          }
        }
      }
    }
  });
  return out;
}

/// Screen-space gradient of one splat: mean (2), conic (a, b, c), color (3).
using ScreenGrad = std::array<double, 8>;

std::vector<ScreenGrad> rasterize_backward(const std::vector<Splat>& splats, const TileBins& bins,
                                           const CameraView& view, const RasterState& state,
                                           const std::vector<Eigen::Vector3d>& d_rgb) {
  const int w = view.width(), h = view.height();
  const int workers = num_threads();
  std::vector<std::vector<ScreenGrad>> partial(workers,
                                               std::vector<ScreenGrad>(splats.size(), ScreenGrad{}));
  parallel_for(bins.tile_count(), [&](std::size_t begin, std::size_t end, int worker) {
    std::vector<ScreenGrad>& grads = partial[worker];
    for (std::size_t tile = begin; tile < end; ++tile) {
      const int tx = static_cast<int>(tile % bins.tiles_x);
      const int ty = static_cast<int>(tile / bins.tiles_x);
      const std::uint32_t list_begin = bins.offsets[tile];
      for (int py = ty * kTile; py < std::min(h, (ty + 1) * kTile); ++py) {
        for (int px = tx * kTile; px < std::min(w, (tx + 1) * kTile); ++px) {
          const std::size_t p = static_cast<std::size_t>(py) * w + px;
          const Eigen::Vector3d& g = d_rgb[p];
          if (g.isZero(0.0)) continue;
          double trans = state.final_transmittance[p];
          Eigen::Vector3d behind = Eigen::Vector3d::Zero();
          for (std::uint32_t k = state.last[p]; k-- > list_begin;) {
            const std::uint32_t idx = bins.items[k];
            const Splat& s = splats[idx];
            const double dx = px - s.mean.x();
            const double dy = py - s.mean.y();
            const double r2 = s.conic_a * dx * dx + 2.0 * s.conic_b * dx * dy + s.conic_c * dy * dy;
            if (r2 >= kCutoffR2) continue;
            const double raw = s.opacity * kernel(r2);
            const double alpha = std::min(RC::kMaxAlpha, raw);
            if (alpha <= 0.0) continue;
            trans /= 1.0 - alpha;
            ScreenGrad& sg = grads[idx];
            const double weight = alpha * trans;
            sg[5] += weight * g.x();
            sg[6] += weight * g.y();
            sg[7] += weight * g.z();
            const double d_alpha = trans * g.dot(s.color - behind);
            behind = alpha * s.color + (1.0 - alpha) * behind;
            if (raw >= RC::kMaxAlpha) continue;
            const double d_r2 = d_alpha * s.opacity * (-0.5 * std::exp(-0.5 * r2) * kKernelNorm);
            sg[0] -= 2.0 * d_r2 * (s.conic_a * dx + s.conic_b * dy);
            sg[1] -= 2.0 * d_r2 * (s.conic_b * dx + s.conic_c * dy);
            sg[2] += d_r2 * dx * dx;
            sg[3] += d_r2 * 2.0 * dx * dy;
            sg[4] += d_r2 * dy * dy;
          }
        }
      }
    }
  });
  std::vector<ScreenGrad> total(splats.size(), ScreenGrad{});
  for (const auto& part : partial) {
    for (std::size_t i = 0; i < total.size(); ++i) {
      for (int j = 0; j < 8; ++j) total[i][j] += part[i][j];
    }
  }
  return total;
}

/// Chains screen-space gradients through projection, the covariance push-forward,
/// view-dependent color and the similarity action onto (log s, omega, t).
SplatGradients chain_to_sim3(const GaussianCloud& cloud, const Projection& proj,
                             const std::vector<ScreenGrad>& screen, const CameraView& view,
                             const Sim3& transform, const PairLossOptions& options) {
  const int degree = cloud.sh_degree();
  const int coeffs = sh_coeff_count(degree);
  const Eigen::Matrix3d r = transform.rotation_matrix();
  const Eigen::Vector3d t = transform.translation();
  const Eigen::Matrix3d rw = view.world_to_cam().rotation_matrix();
  const double fx = view.fx(), fy = view.fy();

  SplatGradients out;
  double basis[kMaxShCoeffs];
  Eigen::Matrix<double, kMaxShCoeffs, 3> basis_grad;
  for (std::size_t i = 0; i < proj.splats.size(); ++i) {
    const ScreenGrad& sg = screen[i];
    if (std::all_of(sg.begin(), sg.end(), [](double v) { return v == 0.0; })) continue;
    const Splat& sp = proj.splats[i];
    const SplatCache& c = proj.cache[i];

    // conic -> 2D covariance
    Eigen::Matrix2d conic;
    conic << sp.conic_a, sp.conic_b, sp.conic_b, sp.conic_c;
    Eigen::Matrix2d g_conic;
    g_conic << sg[2], 0.5 * sg[3], 0.5 * sg[3], sg[4];
    const Eigen::Matrix2d g_cov2 = -(conic * g_conic * conic);

    // 2D covariance -> view covariance and Jacobian
    const Eigen::Matrix<double, 2, 3>& jac = c.jacobian;
    const Eigen::Matrix3d g_view_cov = jac.transpose() * g_cov2 * jac;
    const Eigen::Matrix3d g_sigma = rw.transpose() * g_view_cov * rw;
    const Eigen::Matrix<double, 2, 3> g_jac = 2.0 * g_cov2 * jac * c.view_cov;

    const double z = c.cam.z();
    const double inv_z = 1.0 / z;
    const double inv_z2 = inv_z * inv_z;
    Eigen::Vector3d g_cam = Eigen::Vector3d::Zero();
    g_cam.z() += g_jac(0, 0) * (-fx * inv_z2) + g_jac(1, 1) * (-fy * inv_z2);
    if (c.clamp_x) {
      g_cam.z() += g_jac(0, 2) * fx * c.tan_x * inv_z2;
    } else {
      g_cam.x() += g_jac(0, 2) * (-fx * inv_z2);
      g_cam.z() += g_jac(0, 2) * 2.0 * fx * c.cam.x() * inv_z2 * inv_z;
    }
    if (c.clamp_y) {
      g_cam.z() += g_jac(1, 2) * fy * c.tan_y * inv_z2;
    } else {
      g_cam.y() += g_jac(1, 2) * (-fy * inv_z2);
      g_cam.z() += g_jac(1, 2) * 2.0 * fy * c.cam.y() * inv_z2 * inv_z;
    }
    // screen mean
    g_cam.x() += sg[0] * fx * inv_z;
    g_cam.y() += sg[1] * fy * inv_z;
    g_cam.z() -= (sg[0] * fx * c.cam.x() + sg[1] * fy * c.cam.y()) * inv_z2;

    Eigen::Vector3d g_mu = rw.transpose() * g_cam;
    Eigen::Vector3d g_omega = Eigen::Vector3d::Zero();

    if (!options.freeze_sh_rotation && degree > 0) {
      Eigen::Matrix<double, kMaxShCoeffs, 1> weights = Eigen::Matrix<double, kMaxShCoeffs, 1>::Zero();
      const Gaussian& g = cloud[sp.source];
      for (int ch = 0; ch < 3; ++ch) {
        if (!c.color_active[ch]) continue;
        const double gc = sg[5 + ch];
        for (int k = 1; k < coeffs; ++k) weights[k] += gc * g.sh[ch * kMaxShCoeffs + k];
      }
      sh_basis_with_gradient(c.local_dir, degree, basis, basis_grad);
      const Eigen::Vector3d g_local = basis_grad.transpose() * weights;
      const Eigen::Vector3d g_unit = r * g_local;
      if (c.dir_norm > 0.0) {
        g_mu += (g_unit - c.dir_unit * c.dir_unit.dot(g_unit)) / c.dir_norm;
      }
      g_omega += g_unit.cross(c.dir_unit);
    }

    const Eigen::Vector3d arm = c.mu - t;
    double g_log_s = g_mu.dot(arm);
    g_omega += arm.cross(g_mu);

    g_log_s += 2.0 * (g_sigma.array() * c.sigma.array()).sum();
    const Eigen::Matrix3d comm = c.sigma * g_sigma - g_sigma * c.sigma;
    g_omega += 2.0 * Eigen::Vector3d(comm(1, 2), comm(2, 0), comm(0, 1));

    out.d_loss_d_sim3[0] += g_log_s;
    out.d_loss_d_sim3.segment<3>(1) += g_omega;
    out.d_loss_d_sim3.segment<3>(4) += g_mu;
  }
  return out;
}

}  // namespace

Mask coverage_mask(const Image& alpha) {
  Mask m(alpha.width(), alpha.height(), 1);
  for (std::size_t i = 0; i < alpha.data().size(); ++i) {
    m.data()[i] = alpha.data()[i] > RC::kMaskThreshold ? 1 : 0;
  }
  return m;
}

Mask mask_and(const Mask& a, const Mask& b) {
  if (!a.same_shape(b)) throw InvalidArgument("mask_and: shape mismatch");
  Mask m(a.width(), a.height(), 1);
  for (std::size_t i = 0; i < a.data().size(); ++i) m.data()[i] = a.data()[i] & b.data()[i];
  return m;
}

double masked_l1(const Image& a, const Image& b, const Mask& mask) {
  if (!a.same_shape(b) || a.width() != mask.width() || a.height() != mask.height()) {
    throw InvalidArgument("masked_l1: shape mismatch");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (!mask(x, y)) continue;
      ++count;
      for (int c = 0; c < a.channels(); ++c) sum += std::abs(a(x, y, c) - b(x, y, c));
    }
  }
  if (count == 0) throw NoOverlapError("no overlap in view");
  return sum / (static_cast<double>(count) * a.channels());
}

RenderOutput render(const GaussianCloud& cloud, const CameraView& view) {
  return render(cloud, view, Sim3::identity());
}

RenderOutput render(const GaussianCloud& cloud, const CameraView& view, const Sim3& applied) {
  check_view(view);
  const Projection proj = project(cloud, view, applied, false);
  const TileBins bins = bin_splats(proj.splats, view);
  return rasterize(proj.splats, bins, view, nullptr);
}

PairLoss render_pair_loss_grad(const GaussianCloud& g1, const GaussianCloud& g2,
                               const Sim3& transform, const CameraView& view,
                               const PairLossOptions& options) {
  return render_pair_loss_grad(render(g1, view), g2, transform, view, options);
}

PairLoss render_pair_loss_grad(const RenderOutput& render1, const GaussianCloud& g2,
                               const Sim3& transform, const CameraView& view,
                               const PairLossOptions& options) {
  check_view(view);
  if (render1.rgb.width() != view.width() || render1.rgb.height() != view.height()) {
    throw InvalidArgument("render_pair_loss_grad: reference render does not match the view size");
  }
  const Projection proj = project(g2, view, transform, true);
  const TileBins bins = bin_splats(proj.splats, view);
  RasterState state;
  PairLoss result;
  result.render1 = render1;
  result.render2 = rasterize(proj.splats, bins, view, &state);

  const Mask mask = mask_and(coverage_mask(render1.alpha), coverage_mask(result.render2.alpha));
  const std::size_t count =
      static_cast<std::size_t>(std::count(mask.data().begin(), mask.data().end(), 1));
  result.mask_pixels = count;
  if (count == 0) throw NoOverlapError("no overlap in view");

  const double norm = 1.0 / (3.0 * static_cast<double>(count));
  std::vector<Eigen::Vector3d> d_rgb(mask.pixel_count(), Eigen::Vector3d::Zero());
  double sum = 0.0;
  for (int y = 0; y < view.height(); ++y) {
    for (int x = 0; x < view.width(); ++x) {
      if (!mask(x, y)) continue;
      Eigen::Vector3d& g = d_rgb[static_cast<std::size_t>(y) * view.width() + x];
      for (int c = 0; c < 3; ++c) {
        const double diff = result.render2.rgb(x, y, c) - render1.rgb(x, y, c);
        sum += std::abs(diff);
        g[c] = diff > 0.0 ? norm : (diff < 0.0 ? -norm : 0.0);
      }
    }
  }
  result.loss = sum * norm;
  const auto screen = rasterize_backward(proj.splats, bins, view, state, d_rgb);
  result.gradients = chain_to_sim3(g2, proj, screen, view, transform, options);
  return result;
}

}  // namespace gsreg
