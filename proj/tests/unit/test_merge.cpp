#include <gtest/gtest.h>

#include "gsreg/error.hpp"
#include "gsreg/merge.hpp"
#include "gsreg/metrics.hpp"
#include "gsreg/renderer.hpp"
#include "gsreg/synth.hpp"
#include "test_support.hpp"

using namespace gsreg;

namespace {

GaussianCloud cloud(std::size_t n, std::uint64_t seed, int degree = 3) {
  SceneSpec s = gsreg::testing::small_scene_spec(n, seed);
  s.sh_degree = degree;
  return make_scene(s);
}

double opacity_mass(const GaussianCloud& c) {
  double m = 0.0;
  for (const auto& g : c.gaussians()) m += g.opacity();
  return m;
}

}  // namespace

TEST(Merge, WithEmptySecondReturnsFirst) {
  std::mt19937_64 rng(1);
  const GaussianCloud g = cloud(30, 1);
  EXPECT_EQ(merge(g, GaussianCloud(3), gsreg::testing::random_sim3(rng)).gaussians(), g.gaussians());
}

TEST(Merge, EmptyFirstWithIdentityReturnsSecond) {
  const GaussianCloud g = cloud(30, 2);
  EXPECT_EQ(merge(GaussianCloud(3), g, Sim3::identity()).gaussians(), g.gaussians());
}

TEST(Merge, OrderingContractAndMassConservation) {
  std::mt19937_64 rng(3);
  const GaussianCloud a = cloud(20, 3), b = cloud(25, 4);
  const GaussianCloud a_copy = a, b_copy = b;
  const Sim3 t = gsreg::testing::random_sim3(rng);
  const GaussianCloud m = merge(a, b, t);
  ASSERT_EQ(m.size(), 45u);
  const GaussianCloud moved = transform_cloud(b, t);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(m[i], a[i]);
  for (std::size_t i = 0; i < 25; ++i) EXPECT_EQ(m[20 + i], moved[i]);
  EXPECT_NEAR(opacity_mass(m), opacity_mass(a) + opacity_mass(b), 1e-10);
  EXPECT_EQ(a, a_copy);
  EXPECT_EQ(b, b_copy);
}

TEST(Merge, PadsLowerShDegree) {
  const GaussianCloud a = cloud(5, 5, 1), b = cloud(5, 6, 3);
  const GaussianCloud m = merge(a, b, Sim3::identity());
  EXPECT_EQ(m.sh_degree(), 3);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(m[i].sh, a[i].sh);
  const GaussianCloud n = merge(b, a, Sim3::identity());
  EXPECT_EQ(n.sh_degree(), 3);
  EXPECT_EQ(n[7].sh, a[2].sh);
}

TEST(Merge, GroundTruthMergeRendersLikeFullScene) {
  SceneSpec spec = gsreg::testing::small_scene_spec(1500, 7);
  const GaussianCloud full = make_scene(spec);
  const Sim3 truth(1.7, so3_exp({0.0, 0.2, 0.3}), {0.5, 0.2, -0.1});
  const SplitResult s = split_scene(full, 0.3, truth, 7);
  const GaussianCloud fused = merge(s.g1, s.g2, truth);
  EXPECT_EQ(fused.size(), s.truth.ids_1.size() + s.truth.ids_2.size());
  const CameraSet ring = orbit_ring({0, 0, 0}, 1.5, 2.0, 3, 60, 96, 96, 20.0);
  for (const auto& v : ring.views) {
    EXPECT_GT(psnr(render(fused, v).rgb, render(full, v).rgb), 30.0);
  }
}

TEST(FuseMany, SingleCloudIsItself) {
  const GaussianCloud g = cloud(10, 8);
  EXPECT_EQ(fuse_many({g}, {}).gaussians(), g.gaussians());
}

TEST(FuseMany, IdentityPlanConcatenates) {
  const GaussianCloud a = cloud(4, 9), b = cloud(5, 10), c = cloud(6, 11);
  const GaussianCloud f = fuse_many({a, b, c}, {{1, 0, Sim3()}, {2, 0, Sim3()}});
  ASSERT_EQ(f.size(), 15u);
  EXPECT_EQ(f[4], b[0]);
  EXPECT_EQ(f[9], c[0]);
}

TEST(FuseMany, ChainsTransformsToRoot) {
  std::mt19937_64 rng(12);
  const GaussianCloud a = cloud(3, 12), b = cloud(3, 13), c = cloud(3, 14);
  const Sim3 b_to_a = gsreg::testing::random_sim3(rng), c_to_b = gsreg::testing::random_sim3(rng);
  const GaussianCloud f = fuse_many({a, b, c}, {{1, 0, b_to_a}, {2, 1, c_to_b}});
  const Eigen::Vector3d want = b_to_a.apply(c_to_b.apply(c[1].mu));
  EXPECT_LT((f[7].mu - want).norm(), 1e-10);

  // A root other than cloud 0 goes first.
  const GaussianCloud g = fuse_many({a, b}, {{0, 1, Sim3()}});
  EXPECT_EQ(g[0], b[0]);
}

TEST(FuseMany, RejectsBrokenPlans) {
  const GaussianCloud a = cloud(3, 15), b = cloud(3, 16), c = cloud(3, 17);
  EXPECT_THROW(fuse_many({a, b, c}, {{1, 0, Sim3()}}), StageError);
  EXPECT_THROW(fuse_many({a, b, c}, {{1, 2, Sim3()}, {2, 1, Sim3()}}), StageError);
  EXPECT_THROW(fuse_many({a, b}, {{1, 5, Sim3()}}), StageError);
  EXPECT_THROW(fuse_many({a, b}, {{1, 0, Sim3()}, {1, 0, Sim3()}}), StageError);
}
