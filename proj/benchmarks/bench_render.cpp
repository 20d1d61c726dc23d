#include <benchmark/benchmark.h>

#include "gsreg/renderer.hpp"
#include "gsreg/synth.hpp"

using namespace gsreg;

namespace {

GaussianCloud scene(std::size_t count) {
  SceneSpec spec;
  spec.count = count;
  spec.seed = 1;
  return make_scene(spec);
}

void BM_Render(benchmark::State& state) {
  const GaussianCloud cloud = scene(static_cast<std::size_t>(state.range(0)));
  const int size = static_cast<int>(state.range(1));
  const CameraView view = standard_view(SceneSpec{}, size, size);
  for (auto _ : state) benchmark::DoNotOptimize(render(cloud, view));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Render)->Args({2000, 128})->Args({5000, 256})->Args({20000, 256})->Unit(benchmark::kMillisecond);

void BM_PairLossGrad(benchmark::State& state) {
  const GaussianCloud g1 = scene(static_cast<std::size_t>(state.range(0)));
  const Sim3 truth(1.3, so3_exp({0.1, 0.2, 0.3}), {0.2, 0.1, 0.0});
  const GaussianCloud g2 = transform_cloud(g1, truth.inverse());
  const Sim3 init = perturb_sim3(truth, 2.0, 0.05, 0.05, 3);
  const int size = static_cast<int>(state.range(1));
  const CameraView view = standard_view(SceneSpec{}, size, size);
  for (auto _ : state) benchmark::DoNotOptimize(render_pair_loss_grad(g1, g2, init, view));
}
BENCHMARK(BM_PairLossGrad)->Args({2000, 128})->Args({5000, 256})->Unit(benchmark::kMillisecond);

}  // namespace
