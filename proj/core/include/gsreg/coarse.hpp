#pragma once

#include "gsreg/camera.hpp"
#include "gsreg/gaussian.hpp"
#include "gsreg/image.hpp"
#include "gsreg/interchange.hpp"
#include "gsreg/matching.hpp"
#include "gsreg/sim3.hpp"

namespace gsreg {

/// Pixels whose foundation depth is at or below this floor are excluded.
inline constexpr double kDepthFloor = 1e-6;
/// Pixels whose rendered accumulated alpha is below this are excluded.
inline constexpr double kCoverageThreshold = 0.5;

/// Depth evidence for one image of the matched pair.
struct DepthSupport {
  const Image& rendered_depth;   ///< D, from the 3DGS model at the matched pose
  const Image* rendered_alpha;   ///< coverage gate; may be null
  const MapF& fm_depth;          ///< D-bar, from the foundation model
  const MapF& confidence;        ///< C
};

struct ScaleEstimate {
  double scale = 1.0;
  double weighted_ratio_1 = 0.0;  ///< sum C1 * D1 / D-bar1
  double weighted_ratio_2 = 0.0;
  double confidence_mass_1 = 0.0;  ///< sum of C1 over used pixels
  double confidence_mass_2 = 0.0;
  std::size_t pixels_1 = 0;
  std::size_t pixels_2 = 0;

  /// Confidence-weighted mean of D1 / D-bar1: model-1 units per foundation unit.
  double mean_ratio_1() const { return weighted_ratio_1 / confidence_mass_1; }
  double mean_ratio_2() const { return weighted_ratio_2 / confidence_mass_2; }
};

/**
 * Confidence-weighted depth-ratio scale between the two models:
 *   s = sum(C1 * D1 / D-bar1) / sum(C2 * D2 / D-bar2).
 * Pixels with D-bar <= kDepthFloor, non-finite or non-positive rendered depth,
 * or rendered alpha below kCoverageThreshold get zero confidence.
 * Throws StageError("insufficient depth support") when either image has no
 * usable pixel.
 */
ScaleEstimate estimate_scale(const DepthSupport& image1, const DepthSupport& image2);

/**
 * Chains (w2c_1)^-1 o Sim3(scale, pose_2_to_1) o w2c_2, mapping model-2
 * coordinates into model-1 coordinates. Camera poses and the relative pose
 * must be rigid; the result's scale equals `scale`.
 */
Sim3 compose_initial_transform(const Sim3& w2c_1, const Sim3& w2c_2, const Sim3& pose_2_to_1,
                               double scale);

struct CoarseOptions {
  /// Convert the foundation-model translation into model-1 units using the
  /// confidence-weighted mean depth ratio of image 1.
  bool rescale_translation = true;
};

struct CoarseEstimate {
  Sim3 transform;  ///< model-2 frame -> model-1 frame
  double scale_ratio = 1.0;
  double translation_scale = 1.0;  ///< factor applied to the foundation translation
  MatchedPair pair;
  ScaleEstimate diagnostics;
};

/**
 * Full coarse stage: renders expected depth of g1 at `view1` and g2 at
 * `view2` (each in its own frame), estimates the scale and composes the
 * camera chain with the bundle's relative pose.
 */
CoarseEstimate coarse_register(const GaussianCloud& g1, const GaussianCloud& g2,
                               const CameraView& view1, const CameraView& view2,
                               const FoundationBundle& bundle, const MatchedPair& pair = {},
                               const CoarseOptions& options = {});

}  // namespace gsreg
