#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gsreg/camera.hpp"
#include "gsreg/gaussian.hpp"
#include "gsreg/image.hpp"
#include "gsreg/interchange.hpp"
#include "gsreg/sim3.hpp"

namespace gsreg {

/// Parameters of a random layered scene centred at the origin.
struct SceneSpec {
  std::size_t count = 5000;
  Eigen::Vector3d half_extent{2.0, 1.5, 0.25};
  int sh_degree = 3;
  double scale_median = 0.04;      ///< median per-axis standard deviation
  double scale_log_sigma = 0.35;   ///< spread of log standard deviation
  double scale_min = 0.01;
  double scale_max = 0.1;
  double color_noise = 0.03;       ///< per-Gaussian jitter around the smooth color field
  double sh_rest_amplitude = 0.03; ///< magnitude of higher-band coefficients
  double wavelength_min = 0.25;     ///< plane-wave wavelengths of the color field
  double wavelength_max = 1.0;
  double opacity_min = 0.3;
  double opacity_max = 0.95;
  std::uint64_t seed = 0;
};

/**
 * Seeded random cloud: means uniform in the box, log-normal anisotropic
 * scales, uniformly random orientations, opacities uniform in
 * (opacity_min, opacity_max), a smooth multi-frequency base color plus
 * jitter, and small random higher SH bands.
 */
GaussianCloud make_scene(const SceneSpec& spec);

/// Ground truth of a split: g2's coordinates are truth.transform^-1 applied to its subset.
struct SplitTruth {
  Sim3 transform;                  ///< maps g2's frame into g1's (and the source's) frame
  double overlap_fraction = 0.0;
  Eigen::Vector3d plane_normal = Eigen::Vector3d::UnitX();
  double slab_lo = 0.0;            ///< signed plane offsets bounding the shared slab
  double slab_hi = 0.0;
  std::vector<std::size_t> ids_1;  ///< source indices kept in g1, ascending
  std::vector<std::size_t> ids_2;
  std::vector<std::size_t> shared_ids;
  std::uint64_t seed = 0;

  bool operator==(const SplitTruth& o) const {
    return transform.params() == o.transform.params() && overlap_fraction == o.overlap_fraction &&
           plane_normal == o.plane_normal && slab_lo == o.slab_lo && slab_hi == o.slab_hi &&
           ids_1 == o.ids_1 && ids_2 == o.ids_2 && shared_ids == o.shared_ids && seed == o.seed;
  }
};

struct SplitResult {
  GaussianCloud g1;
  GaussianCloud g2;
  SplitTruth truth;
};

/**
 * Cuts `cloud` with a seeded plane whose normal lies in the span of the two
 * dominant principal axes of the means. Gaussians are ranked by signed plane
 * distance; the middle `overlap_fraction` of the ranking forms the shared
 * slab, one side plus the slab becomes g1 and the other side plus the slab
 * becomes g2, which is then re-expressed through transform^-1.
 * Throws InvalidArgument for a fraction outside [0, 1] and StageError when a
 * positive fraction cannot place any Gaussian in the slab.
 */
SplitResult split_scene(const GaussianCloud& cloud, double overlap_fraction,
                        const Sim3& transform, std::uint64_t seed);

void write_truth(const SplitTruth& truth, const std::filesystem::path& path);
SplitTruth read_truth(const std::filesystem::path& path);

/// Uniform profile or a linear ramp that is 0 at the border and 1 in the centre.
enum class ConfidenceProfile { kUniform, kEdgeDecayed };

struct BundleNoise {
  double rotation_deg = 0.0;       ///< angle of a random rotation applied to the relative pose
  double translation_frac = 0.0;   ///< random offset, as a fraction of the relative-pose baseline
  double scale_frac = 0.0;         ///< bias of the image-2 foundation depth, relative
  double depth_noise = 0.0;        ///< per-pixel multiplicative noise, standard deviation
  ConfidenceProfile profile = ConfidenceProfile::kUniform;
  /// Foundation-model length unit relative to g1's unit.
  double fm_unit = 1.0;
  std::uint64_t seed = 0;
};

/// Confidence-mass target of synthetic bundles on each image's depth support.
inline constexpr double kSyntheticConfidenceMass = 1e4;

/**
 * Simulated foundation-model output for the matched views `view1` (in g1's
 * frame) and `view2` (in g2's frame). The relative pose is the rigid part of
 * w2c_1 o truth o w2c_2^-1, perturbed as requested, with its translation in
 * foundation units. Foundation depths are the rendered depths converted to
 * foundation units, times the noise factors. Confidence maps follow the
 * profile and are rescaled so both images carry kSyntheticConfidenceMass over
 * the pixels the scale estimator keeps.
 */
FoundationBundle make_synthetic_bundle(const GaussianCloud& g1, const GaussianCloud& g2,
                                       const SplitTruth& truth, const CameraView& view1,
                                       const CameraView& view2, const BundleNoise& noise = {});

/// Returns `t` with its rotation pre-multiplied by a random rotation of exactly
/// `rotation_deg`, its translation offset by `translation` in a random direction
/// and its scale multiplied by 1 + scale_frac or 1 - scale_frac (seeded choice).
Sim3 perturb_sim3(const Sim3& t, double rotation_deg, double translation, double scale_frac,
                  std::uint64_t seed);

/// nx * ny downward-looking cameras over the rectangle centre +- half_xy at `height` above it.
CameraSet overhead_grid(const Eigen::Vector3d& centre, const Eigen::Vector2d& half_xy, int nx,
                        int ny, double height, double fov_x_deg, int width, int height_px,
                        const std::string& prefix = "cam");

/// `n` cameras on a circle of `radius` at `height` above `target`, all looking at it.
CameraSet orbit_ring(const Eigen::Vector3d& target, double radius, double height, int n,
                     double fov_x_deg, int width, int height_px, double phase_deg = 0.0,
                     const std::string& prefix = "ring");

/// Downward camera that frames the whole box of `spec`.
CameraView standard_view(const SceneSpec& spec, int width, int height, double fov_x_deg = 60.0);

/// Expresses every camera of `set` in the frame reached through `a_from_b`.
CameraSet express_cameras(const CameraSet& set, const Sim3& a_from_b);

/**
 * Stand-in for learned image embeddings: each image is box-downsampled to
 * grid x grid RGB, mean-centred per channel and L2-normalised.
 */
EmbeddingSet synthetic_embeddings(const std::vector<Image>& images,
                                  const std::vector<std::string>& ids, int grid = 8);

}  // namespace gsreg
