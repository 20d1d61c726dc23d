#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gsreg/camera.hpp"
#include "gsreg/gaussian.hpp"
#include "gsreg/sim3.hpp"

namespace gsreg {

struct RefineConfig {
  int max_iters = 500;
  double lr_rot = 1e-3;
  /// Translation step; a non-positive value means 1e-3 times the diameter of g1.
  double lr_trans = 0.0;
  double lr_logscale = 1e-3;
  /// Views evaluated per iteration; all views are used when the list is no longer.
  int views_per_iter = 4;
  /// Stop once the best loss improved by less than this over `patience` iterations.
  double convergence_tol = 1e-6;
  int patience = 10;
  /// A loss at or below this counts as already converged.
  double loss_floor = 1e-10;
  /// Multiplier applied to all step sizes by the final iteration (exponential decay).
  double final_lr_factor = 1.0;
  bool freeze_sh_rotation = false;
  std::uint64_t seed = 0;
};

/// Throws InvalidArgument when a field is out of range.
void validate_refine_config(const RefineConfig& cfg);

struct RefineResult {
  Sim3 transform;                   ///< lowest-loss iterate
  std::vector<double> loss_history; ///< best loss so far, one entry per iteration
  std::vector<double> raw_loss;     ///< loss of the iterate evaluated at each iteration
  std::vector<CameraView> views_used;
  bool converged = false;
  int iterations = 0;
  int best_iteration = 0;
  std::string stop_reason;
};

/**
 * Refinement poses in g1's frame: the rigid midpoint between `c1` and `c2`
 * (centers averaged, orientations slerped), followed by k - 1 seeded
 * perturbations of it, each rotated by at most 10 degrees and shifted by at
 * most 10% of the distance between the two camera centers.
 */
std::vector<CameraView> select_refinement_views(const CameraView& c1, const CameraView& c2,
                                                int k, std::uint64_t seed);

struct OverlapView {
  std::size_t index = 0;   ///< position in the candidate list
  double fraction = 0.0;   ///< share of pixels covered by both models
};

/**
 * Scores each candidate view (in g1's frame) by the fraction of pixels where
 * both g1 and g2 under `g2_to_g1` reach the coverage threshold, keeps those at
 * or above `min_fraction` and returns at most `max_views` of them, best first
 * (ties by candidate order).
 *
 * Views sharing one optical centre cannot observe a scale change about that
 * centre, so refinement sets should mix these with the matched-pair views.
 */
std::vector<OverlapView> rank_overlap_views(const GaussianCloud& g1, const GaussianCloud& g2,
                                            const Sim3& g2_to_g1,
                                            const std::vector<CameraView>& candidates,
                                            std::size_t max_views, double min_fraction = 0.2);

struct ViewPlan {
  int midpoint_views = 2;          ///< k passed to select_refinement_views
  std::size_t overlap_views = 4;   ///< candidates kept by rank_overlap_views
  double min_fraction = 0.1;       ///< overlap share required of a candidate
  std::uint64_t seed = 0;
};

/**
 * Refinement set used by the pipeline: the matched-pair views that show any
 * overlap under `init`, followed by the best-overlapping candidate views.
 * `c2_in_g1` is the second matched camera already expressed in g1's frame.
 * Throws StageError when no view overlaps.
 */
std::vector<CameraView> plan_refinement_views(const GaussianCloud& g1, const GaussianCloud& g2,
                                              const Sim3& init, const CameraView& c1,
                                              const CameraView& c2_in_g1,
                                              const std::vector<CameraView>& candidates,
                                              const ViewPlan& plan = {});

/**
 * Minimizes the masked photometric loss between g1 and transform_cloud(g2, T)
 * over T, starting from `init`, with Adam on (log s, omega, t) and the
 * Sim3 retraction. Views with no mask overlap are skipped; an iteration where
 * every view is skipped raises StageError. A non-finite loss raises StageError.
 */
RefineResult refine(const GaussianCloud& g1, const GaussianCloud& g2, const Sim3& init,
                    const std::vector<CameraView>& views, const RefineConfig& cfg = {});

}  // namespace gsreg
