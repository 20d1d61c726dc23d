#include <benchmark/benchmark.h>

#include <random>

#include "gsreg/icp.hpp"
#include "gsreg/sh.hpp"
#include "gsreg/sim3.hpp"
#include "gsreg/synth.hpp"

using namespace gsreg;

namespace {

void BM_ShRotationBlocks(benchmark::State& state) {
  const Eigen::Matrix3d r = so3_exp({0.3, -0.2, 0.9}).toRotationMatrix();
  for (auto _ : state) benchmark::DoNotOptimize(sh_rotation_matrices(r, 3));
}
BENCHMARK(BM_ShRotationBlocks);

void BM_RotateSh(benchmark::State& state) {
  const auto blocks = sh_rotation_matrices(so3_exp({0.3, -0.2, 0.9}).toRotationMatrix(), 3);
  ShCoeffs sh{};
  for (std::size_t i = 0; i < sh.size(); ++i) sh[i] = 0.01 * static_cast<double>(i);
  for (auto _ : state) {
    rotate_sh(sh, 3, blocks);
    benchmark::DoNotOptimize(sh);
  }
}
BENCHMARK(BM_RotateSh);

void BM_TransformCloud(benchmark::State& state) {
  SceneSpec spec;
  spec.count = static_cast<std::size_t>(state.range(0));
  const GaussianCloud cloud = make_scene(spec);
  const Sim3 t(1.5, so3_exp({0.1, 0.2, 0.3}), {1.0, 0.0, -1.0});
  for (auto _ : state) benchmark::DoNotOptimize(transform_cloud(cloud, t));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TransformCloud)->Arg(5000)->Arg(50000)->Unit(benchmark::kMillisecond);

void BM_KdTreeNearest(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto n = static_cast<Eigen::Index>(state.range(0));
  Eigen::Matrix3Xd pts(3, n);
  for (Eigen::Index i = 0; i < n; ++i) pts.col(i) = Eigen::Vector3d{u(rng), u(rng), u(rng)};
  const KdTree tree(pts);
  Eigen::Index q = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(tree.nearest(pts.col(q) + Eigen::Vector3d::Constant(1e-3)));
    q = (q + 1) % n;
  }
}
BENCHMARK(BM_KdTreeNearest)->Arg(10000)->Arg(100000);

void BM_Icp(benchmark::State& state) {
  SceneSpec spec;
  spec.count = static_cast<std::size_t>(state.range(0));
  const GaussianCloud cloud = make_scene(spec);
  const Sim3 truth(1.2, so3_exp({0.0, 0.0, 0.1}), {0.05, 0.0, 0.0});
  const Eigen::Matrix3Xd m1 = cloud.means();
  const Eigen::Matrix3Xd m2 = transform_cloud(cloud, truth.inverse()).means();
  for (auto _ : state) benchmark::DoNotOptimize(icp_umeyama(m1, m2, Sim3(), 20));
}
BENCHMARK(BM_Icp)->Arg(5000)->Unit(benchmark::kMillisecond);

}  // namespace
