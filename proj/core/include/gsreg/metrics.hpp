#pragma once

#include "gsreg/gaussian.hpp"
#include "gsreg/image.hpp"
#include "gsreg/sim3.hpp"

namespace gsreg {

/// Reported in place of +infinity for identical images.
inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE) over all channels; images must share a shape.
double psnr(const Image& a, const Image& b);

/// Rec. 601 luma of a 3-channel image (1-channel input is returned as is).
Image luminance(const Image& rgb);

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

/**
 * Mean SSIM of the luminance images over every fully contained
 * window position, with Gaussian-weighted local statistics.
 * Throws InvalidArgument when the images differ in shape or are smaller
 * than the window.
 */
double ssim(const Image& a, const Image& b, const SsimParams& params = {});

/// Pose error of an estimated model-2 -> model-1 transform against the truth.
struct AlignmentError {
  double rotation_deg = 0.0;
  double translation = 0.0;        ///< |t_est - t_true|
  double translation_rel = 0.0;    ///< translation / diameter
  double scale_rel = 0.0;          ///< |s_est / s_true - 1|
  double rms_displacement = 0.0;   ///< RMS of |T_est(x) - T_true(x)| over the points
  double rms_displacement_rel = 0.0;
};

/**
 * Compares `estimate` with `truth` on the points of `cloud` (normally g2).
 * `diameter` normalizes the distances; pass the reference scene diameter.
 */
AlignmentError alignment_error(const Sim3& estimate, const Sim3& truth, const GaussianCloud& cloud,
                               double diameter);

}  // namespace gsreg
