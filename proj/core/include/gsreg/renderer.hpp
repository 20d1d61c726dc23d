#pragma once

#include <Eigen/Core>

#include <cstdint>

#include "gsreg/camera.hpp"
#include "gsreg/gaussian.hpp"
#include "gsreg/image.hpp"
#include "gsreg/sim3.hpp"

namespace gsreg {

/// Rasterizer constants.
struct RasterConstants {
  static constexpr int kTileSize = 16;
  static constexpr double kExtentSigma = 3.0;
  static constexpr double kMinTransmittance = 1e-4;
  static constexpr double kMaxAlpha = 0.99;
  static constexpr double kDilation = 0.3;  ///< screen-space low-pass, pixels^2
  static constexpr double kNearPlane = 0.01;
  static constexpr double kMaskThreshold = 0.5;
};

/// Rendered color, expected z-depth and accumulated opacity.
struct RenderOutput {
  Image rgb;    ///< 3 channels in [0, 1], black background
  Image depth;  ///< expected z-depth, 0 where alpha == 0
  Image alpha;  ///< accumulated opacity in [0, 1]
};

using Mask = Raster<std::uint8_t>;

/// M := alpha > RasterConstants::kMaskThreshold.
Mask coverage_mask(const Image& alpha);
/// Element-wise product of two masks.
Mask mask_and(const Mask& a, const Mask& b);

/**
 * Mean per-channel L1 difference over the pixels where `mask` is set.
 * Throws NoOverlapError when the mask is empty.
 */
double masked_l1(const Image& a, const Image& b, const Mask& mask);

/**
 * Renders `cloud` at `view`. Gaussians are projected with the first-order
 * (EWA) screen-space covariance plus a 0.3 px^2 dilation, sorted front to
 * back by view-space depth, and alpha-composited per pixel inside their
 * 3-sigma footprint. The footprint kernel is the Gaussian shifted down by its
 * 3-sigma value so it reaches zero continuously at the cutoff.
 * Compositing stops once transmittance drops below 1e-4.
 * Throws InvalidArgument on degenerate intrinsics.
 */
RenderOutput render(const GaussianCloud& cloud, const CameraView& view);

/// Renders `transform_cloud(cloud, applied)` without materializing the cloud.
RenderOutput render(const GaussianCloud& cloud, const CameraView& view, const Sim3& applied);

/// Gradient of the photometric loss with respect to the tangent parameters
/// (log s, omega, t) of the applied transform, omega perturbing the rotation
/// on the left: R <- exp(omega) R.
struct SplatGradients {
  Eigen::Matrix<double, 7, 1> d_loss_d_sim3 = Eigen::Matrix<double, 7, 1>::Zero();

  double d_log_scale() const { return d_loss_d_sim3[0]; }
  Eigen::Vector3d d_rotation() const { return d_loss_d_sim3.segment<3>(1); }
  Eigen::Vector3d d_translation() const { return d_loss_d_sim3.segment<3>(4); }
};

struct PairLossOptions {
  /// Treat each Gaussian's view-dependent color as locally constant in the
  /// backward pass (skips the SH rotation and view-direction terms).
  bool freeze_sh_rotation = false;
};

struct PairLoss {
  double loss = 0.0;
  SplatGradients gradients;
  RenderOutput render1;
  RenderOutput render2;
  std::size_t mask_pixels = 0;
};

/**
 * Renders g1 and transform_cloud(g2, transform) at `view` and returns the
 * masked L1 loss over M1 * M2 together with its analytic gradient with
 * respect to the transform. Masks are held constant. Throws NoOverlapError
 * when the mask intersection is empty.
 */
PairLoss render_pair_loss_grad(const GaussianCloud& g1, const GaussianCloud& g2,
                               const Sim3& transform, const CameraView& view,
                               const PairLossOptions& options = {});

/// Same as above with g1's render supplied by the caller.
PairLoss render_pair_loss_grad(const RenderOutput& render1, const GaussianCloud& g2,
                               const Sim3& transform, const CameraView& view,
                               const PairLossOptions& options = {});

}  // namespace gsreg
