#include "gsreg/refine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gsreg/error.hpp"
#include "gsreg/renderer.hpp"

namespace gsreg {

namespace {

constexpr double kMaxPerturbRotation = 10.0 * M_PI / 180.0;
constexpr double kMaxPerturbTranslation = 0.10;
constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-12;

Eigen::Vector3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d v;
  do {
    v = {n(rng), n(rng), n(rng)};
  } while (v.norm() < 1e-9);
  return v.normalized();
}

}  // namespace

void validate_refine_config(const RefineConfig& cfg) {
  if (cfg.max_iters < 1) throw InvalidArgument("refine: max_iters must be >= 1");
  if (!(cfg.lr_rot > 0.0) || !(cfg.lr_logscale > 0.0)) {
    throw InvalidArgument("refine: step sizes must be positive");
  }
  if (!std::isfinite(cfg.lr_trans)) throw InvalidArgument("refine: lr_trans must be finite");
  if (cfg.views_per_iter < 1) throw InvalidArgument("refine: views_per_iter must be >= 1");
  if (cfg.patience < 1) throw InvalidArgument("refine: patience must be >= 1");
  if (!(cfg.convergence_tol >= 0.0)) throw InvalidArgument("refine: convergence_tol must be >= 0");
  if (!(cfg.final_lr_factor > 0.0) || cfg.final_lr_factor > 1.0) {
    throw InvalidArgument("refine: final_lr_factor must be in (0, 1]");
  }
}

std::vector<CameraView> select_refinement_views(const CameraView& c1, const CameraView& c2,
                                                int k, std::uint64_t seed) {
  if (k < 1) throw InvalidArgument("select_refinement_views: k must be >= 1");
  const Eigen::Quaterniond q1(c1.cam_to_world_rotation());
  const Eigen::Quaterniond q2(c2.cam_to_world_rotation());
  const Eigen::Quaterniond q_mid = canonical(q1.slerp(0.5, q2));
  const Eigen::Vector3d center = 0.5 * (c1.center() + c2.center());
  const double baseline = (c1.center() - c2.center()).norm();

  auto make = [&](const Eigen::Quaterniond& cam_to_world, const Eigen::Vector3d& c) {
    const Eigen::Quaterniond w2c = canonical(cam_to_world.conjugate());
    return c1.with_pose(Sim3::rigid(w2c, -(w2c * c)));
  };
  std::vector<CameraView> views;
  views.push_back(make(q_mid, center));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 1; i < k; ++i) {
    const Eigen::Vector3d axis = random_unit(rng);
    const double angle = kMaxPerturbRotation * unit(rng);
    const Eigen::Vector3d dir = random_unit(rng);
    const double shift = kMaxPerturbTranslation * baseline * std::cbrt(unit(rng));
    const Eigen::Quaterniond q = canonical(so3_exp(axis * angle) * q_mid);
    views.push_back(make(q, center + shift * dir));
  }
  return views;
}

std::vector<OverlapView> rank_overlap_views(const GaussianCloud& g1, const GaussianCloud& g2,
                                            const Sim3& g2_to_g1,
                                            const std::vector<CameraView>& candidates,
                                            std::size_t max_views, double min_fraction) {
  std::vector<OverlapView> scored;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const CameraView& view = candidates[i];
    const Mask both = mask_and(coverage_mask(render(g1, view).alpha),
                               coverage_mask(render(g2, view, g2_to_g1).alpha));
    const auto hits = static_cast<double>(std::count(both.data().begin(), both.data().end(), 1));
    const double fraction = hits / static_cast<double>(both.pixel_count());
    if (fraction >= min_fraction) scored.push_back({i, fraction});
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const OverlapView& a, const OverlapView& b) { return a.fraction > b.fraction; });
  if (scored.size() > max_views) scored.resize(max_views);
  return scored;
}

std::vector<CameraView> plan_refinement_views(const GaussianCloud& g1, const GaussianCloud& g2,
                                              const Sim3& init, const CameraView& c1,
                                              const CameraView& c2_in_g1,
                                              const std::vector<CameraView>& candidates,
                                              const ViewPlan& plan) {
  const auto mids = select_refinement_views(c1, c2_in_g1, plan.midpoint_views, plan.seed);
  std::vector<CameraView> views;
  for (const auto& kept : rank_overlap_views(g1, g2, init, mids, mids.size(), 1e-3)) {
    views.push_back(mids[kept.index]);
  }
  for (const auto& kept : rank_overlap_views(g1, g2, init, candidates, plan.overlap_views, plan.min_fraction)) {
    views.push_back(candidates[kept.index]);
  }
  if (views.empty()) {
    throw StageError("refine: no candidate view overlaps under the initial transform; "
                     "the coarse estimate needs improvement");
  }
  return views;
}

RefineResult refine(const GaussianCloud& g1, const GaussianCloud& g2, const Sim3& init,
                    const std::vector<CameraView>& views, const RefineConfig& cfg) {
  validate_refine_config(cfg);
  if (views.empty()) throw InvalidArgument("refine: no refinement views");

  const double lr_trans = cfg.lr_trans > 0.0 ? cfg.lr_trans : 1e-3 * std::max(scene_diameter(g1), 1e-12);
  Eigen::Matrix<double, 7, 1> lr;
  lr << cfg.lr_logscale, cfg.lr_rot, cfg.lr_rot, cfg.lr_rot, lr_trans, lr_trans, lr_trans;

  std::vector<RenderOutput> reference;
  reference.reserve(views.size());
  for (const auto& v : views) reference.push_back(render(g1, v));

  const std::size_t per_iter = std::min<std::size_t>(cfg.views_per_iter, views.size());
  std::vector<std::size_t> pick(views.size());
  std::iota(pick.begin(), pick.end(), std::size_t{0});
  std::mt19937_64 rng(cfg.seed);

  PairLossOptions loss_opts;
  loss_opts.freeze_sh_rotation = cfg.freeze_sh_rotation;

  RefineResult result;
  result.views_used = views;
  result.transform = init;
  double best = std::numeric_limits<double>::infinity();
  Sim3 current = init;
  Eigen::Matrix<double, 7, 1> m = Eigen::Matrix<double, 7, 1>::Zero();
  Eigen::Matrix<double, 7, 1> v = Eigen::Matrix<double, 7, 1>::Zero();
  const double decay =
      cfg.max_iters > 1 ? std::pow(cfg.final_lr_factor, 1.0 / (cfg.max_iters - 1)) : 1.0;

  for (int it = 0; it < cfg.max_iters; ++it) {
    if (per_iter < views.size()) std::shuffle(pick.begin(), pick.end(), rng);
    double loss = 0.0;
    Eigen::Matrix<double, 7, 1> grad = Eigen::Matrix<double, 7, 1>::Zero();
    std::size_t used = 0;
    for (std::size_t j = 0; j < per_iter; ++j) {
      const std::size_t idx = pick[j];
      try {
        const PairLoss pl = render_pair_loss_grad(reference[idx], g2, current, views[idx], loss_opts);
        loss += pl.loss;
        grad += pl.gradients.d_loss_d_sim3;
        ++used;
      } catch (const NoOverlapError&) {
      }
    }
    if (used == 0) {
      throw StageError("refine: no refinement view overlaps at iteration " + std::to_string(it) +
                       "; the coarse estimate needs improvement");
    }
    loss /= static_cast<double>(used);
    grad /= static_cast<double>(used);
    if (!std::isfinite(loss) || !grad.allFinite()) {
      throw StageError("refine: non-finite loss or gradient at iteration " + std::to_string(it));
    }

    result.raw_loss.push_back(loss);
    if (loss < best) {
      best = loss;
      result.transform = current;
      result.best_iteration = it;
    }
    result.loss_history.push_back(best);
    result.iterations = it + 1;

    if (best <= cfg.loss_floor) {
      result.converged = true;
      result.stop_reason = "loss below floor";
      break;
    }
    const std::size_t n = result.loss_history.size();
    if (n > static_cast<std::size_t>(cfg.patience) &&
        result.loss_history[n - 1 - cfg.patience] - best < cfg.convergence_tol) {
      result.converged = true;
      result.stop_reason = "loss change below tolerance";
      break;
    }
    if (it + 1 == cfg.max_iters) {
      result.stop_reason = "iteration limit";
      break;
    }

    m = kBeta1 * m + (1.0 - kBeta1) * grad;
    v = kBeta2 * v + (1.0 - kBeta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(kBeta1, it + 1);
    const double bc2 = 1.0 - std::pow(kBeta2, it + 1);
    const double factor = std::pow(decay, it);
    const Eigen::Matrix<double, 7, 1> step =
        factor * lr.cwiseProduct((m / bc1).cwiseQuotient(((v / bc2).cwiseSqrt().array() + kAdamEps).matrix()));
    current = current.retract(-step[0], -step.segment<3>(1), -step.segment<3>(4));
  }
  return result;
}

}  // namespace gsreg
