#include <gtest/gtest.h>

#include "gsreg/error.hpp"
#include "gsreg/metrics.hpp"
#include "gsreg/refine.hpp"
#include "gsreg/synth.hpp"
#include "test_support.hpp"

using namespace gsreg;

namespace {

CameraView down_at(const Eigen::Vector3d& eye, int size = 64) {
  return CameraView::look_at(eye, eye - Eigen::Vector3d(0, 0, eye.z()), Eigen::Vector3d::UnitY(), 60, size, size);
}

}  // namespace

TEST(SelectRefinementViews, SharedPoseIsReturned) {
  const CameraView c = CameraView::look_at({1, 2, 3}, {0, 0, 0}, Eigen::Vector3d::UnitZ(), 60, 32, 32);
  const auto views = select_refinement_views(c, c, 1, 0);
  ASSERT_EQ(views.size(), 1u);
  EXPECT_LT(max_param_difference(views[0].world_to_cam(), c.world_to_cam()), 1e-12);
}

TEST(SelectRefinementViews, MidpointOfTranslatedPair) {
  const CameraView c1 = down_at({0, 0, 3});
  const CameraView c2 = c1.with_pose(Sim3::rigid(c1.world_to_cam().rotation(),
                                                 c1.world_to_cam().translation() -
                                                     c1.world_to_cam().rotation() * Eigen::Vector3d(0, 0, 2)));
  ASSERT_LT((c2.center() - c1.center() - Eigen::Vector3d(0, 0, 2)).norm(), 1e-12);
  const auto views = select_refinement_views(c1, c2, 1, 0);
  EXPECT_LT((views[0].center() - c1.center() - Eigen::Vector3d(0, 0, 1)).norm(), 1e-12);
}

TEST(SelectRefinementViews, SeededAndBounded) {
  const CameraView c1 = down_at({0, 0, 3});
  const CameraView c2 = down_at({1, 0, 3});
  const auto a = select_refinement_views(c1, c2, 5, 42);
  const auto b = select_refinement_views(c1, c2, 5, 42);
  ASSERT_EQ(a.size(), 5u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].world_to_cam().params(), b[i].world_to_cam().params());
    const double angle = rotation_angle_between(a[i].world_to_cam().rotation(), a[0].world_to_cam().rotation());
    EXPECT_LE(angle, 10.0 * M_PI / 180.0 + 1e-12);
    EXPECT_LE((a[i].center() - a[0].center()).norm(), 0.1 + 1e-12);
  }
  EXPECT_THROW(select_refinement_views(c1, c2, 0, 1), InvalidArgument);
}

TEST(RankOverlapViews, OrdersByCoverageAndDropsEmptyViews) {
  const GaussianCloud g1 = make_scene(gsreg::testing::small_scene_spec(300, 11));
  const std::vector<CameraView> candidates = {down_at({5, 5, 2}), down_at({0, 0, 2.5}), down_at({0.8, 0, 2.5})};
  const auto ranked = rank_overlap_views(g1, g1, Sim3(), candidates, 3, 0.05);
  ASSERT_EQ(ranked.size(), 2u);
  EXPECT_EQ(ranked[0].index, 1u);
  EXPECT_EQ(ranked[1].index, 2u);
  EXPECT_GT(ranked[0].fraction, ranked[1].fraction);
  EXPECT_LE(ranked[0].fraction, 1.0);
  EXPECT_EQ(rank_overlap_views(g1, g1, Sim3(), candidates, 1, 0.05).size(), 1u);
}

TEST(PlanRefinementViews, ThrowsWithoutAnyOverlap) {
  const GaussianCloud g1 = make_scene(gsreg::testing::small_scene_spec(200, 12));
  const Sim3 far = Sim3::rigid(Eigen::Quaterniond::Identity(), {50, 0, 0});
  const CameraView c = down_at({0, 0, 2});
  EXPECT_THROW(plan_refinement_views(g1, g1, far, c, c, {c}), StageError);
  const auto views = plan_refinement_views(g1, g1, Sim3(), c, down_at({0.2, 0, 2}), {down_at({0.5, 0.5, 2})});
  EXPECT_GE(views.size(), 2u);
}

TEST(RefineConfig, Validation) {
  RefineConfig cfg;
  cfg.max_iters = 0;
  EXPECT_THROW(validate_refine_config(cfg), InvalidArgument);
  cfg = {};
  cfg.lr_rot = 0.0;
  EXPECT_THROW(validate_refine_config(cfg), InvalidArgument);
  cfg = {};
  cfg.views_per_iter = 0;
  EXPECT_THROW(validate_refine_config(cfg), InvalidArgument);
  EXPECT_NO_THROW(validate_refine_config(RefineConfig{}));
}

TEST(Refine, TruthIsAFixedPoint) {
  const GaussianCloud g1 = make_scene(gsreg::testing::small_scene_spec(400, 1));
  const Sim3 truth(1.5, so3_exp({0.1, 0.2, 0.3}), {0.2, 0.1, 0.0});
  const GaussianCloud g2 = transform_cloud(g1, truth.inverse());
  const auto views = select_refinement_views(down_at({0, 0, 2.5}), down_at({0.2, 0, 2.5}), 2, 1);
  const RefineResult r = refine(g1, g2, truth, views);
  EXPECT_TRUE(r.converged);
  EXPECT_LT(max_param_difference(r.transform, truth), 1e-6);
  EXPECT_FALSE(r.loss_history.empty());
}

TEST(Refine, RecoversSmallPerturbationWithMonotoneHistory) {
  SceneSpec spec = gsreg::testing::small_scene_spec(1500, 2);
  spec.scale_median = 0.04;
  spec.scale_min = 0.01;
  spec.scale_max = 0.1;
  const GaussianCloud g1 = make_scene(spec);
  const Sim3 truth(1.3, so3_exp({0.0, 0.1, 0.4}), {0.3, -0.2, 0.1});
  const GaussianCloud g2 = transform_cloud(g1, truth.inverse());
  const Sim3 init = perturb_sim3(truth, 3.0, 0.04, 0.05, 7);
  // Views from distinct centres pin down the scale about any single centre.
  auto views = select_refinement_views(down_at({-0.2, 0, 2.0}, 80), down_at({0.2, 0, 2.0}, 80), 2, 3);
  for (const CameraView& v : overhead_grid({0, 0, 0}, {0.5, 0.5}, 2, 2, 2.0, 60, 80, 80).views) views.push_back(v);
  RefineConfig cfg;
  cfg.max_iters = 250;
  cfg.lr_rot = 3e-3;
  cfg.lr_logscale = 3e-3;
  cfg.lr_trans = 3e-3 * scene_diameter(g1);
  cfg.final_lr_factor = 0.05;
  cfg.convergence_tol = 0.0;
  const RefineResult r = refine(g1, g2, init, views, cfg);
  for (std::size_t i = 1; i < r.loss_history.size(); ++i) EXPECT_LE(r.loss_history[i], r.loss_history[i - 1]);
  EXPECT_LE(r.loss_history.back(), r.raw_loss.front());
  const AlignmentError before = alignment_error(init, truth, g2, scene_diameter(g1));
  const AlignmentError after = alignment_error(r.transform, truth, g2, scene_diameter(g1));
  EXPECT_LT(after.rotation_deg, 0.5);
  EXPECT_LT(after.translation_rel, 0.01);
  EXPECT_LT(after.scale_rel, 0.01);
  EXPECT_LT(after.rms_displacement, 0.2 * before.rms_displacement);
}

TEST(Refine, IsDeterministic) {
  const GaussianCloud g1 = make_scene(gsreg::testing::small_scene_spec(300, 3));
  const Sim3 truth(1.1, so3_exp({0.0, 0.0, 0.2}), {0.1, 0.0, 0.0});
  const GaussianCloud g2 = transform_cloud(g1, truth.inverse());
  const Sim3 init = perturb_sim3(truth, 2.0, 0.03, 0.03, 1);
  const auto views = select_refinement_views(down_at({0, 0, 2.2}, 48), down_at({0.3, 0, 2.2}, 48), 4, 5);
  RefineConfig cfg;
  cfg.max_iters = 15;
  cfg.views_per_iter = 2;
  cfg.seed = 9;
  const RefineResult a = refine(g1, g2, init, views, cfg);
  const RefineResult b = refine(g1, g2, init, views, cfg);
  EXPECT_EQ(a.transform.params(), b.transform.params());
  EXPECT_EQ(a.raw_loss, b.raw_loss);
}

TEST(Refine, NoOverlapAnywhereIsAnError) {
  const GaussianCloud g1 = make_scene(gsreg::testing::small_scene_spec(100, 4));
  const Sim3 far = Sim3::rigid(Eigen::Quaterniond::Identity(), {100, 0, 0});
  const auto views = select_refinement_views(down_at({0, 0, 2}), down_at({0, 0, 2}), 1, 0);
  EXPECT_THROW(refine(g1, g1, far, views), StageError);
  EXPECT_THROW(refine(g1, g1, Sim3(), {}), InvalidArgument);
}
