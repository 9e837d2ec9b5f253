#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "mmvm/data.hpp"
#include "mmvm/eval.hpp"
#include "mmvm/tensor.hpp"
#include "mmvm/vae.hpp"

using namespace mmvm;
using diff::Tensor;

namespace {

Matrix normal_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  m.values = standard_normal(rng, r * c);
  return m;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto a = vae::to_tensor(normal_matrix(n, n, 1));
  auto b = vae::to_tensor(normal_matrix(n, n, 2));
  diff::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(diff::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

// One forward and backward pass of each objective on a default-sized batch.
void BM_ObjectiveStep(benchmark::State& state, const char* method) {
  auto spec = vae::ModelSpec::for_method(method, {32, 24});
  vae::Model model(spec, 0);
  std::vector<Tensor> x{vae::to_tensor(normal_matrix(32, 32, 3)),
                        vae::to_tensor(normal_matrix(32, 24, 4))};
  auto noise = vae::make_noise(vae::noise_slots(spec), 32, spec.latent_dim, 5);
  for (auto _ : state) {
    diff::TapeScope scope;
    auto obj = vae::objective(model, x, noise);
    diff::backward(obj);
    benchmark::DoNotOptimize(obj.item());
  }
}
BENCHMARK_CAPTURE(BM_ObjectiveStep, independent, "independent");
BENCHMARK_CAPTURE(BM_ObjectiveStep, poe, "poe");
BENCHMARK_CAPTURE(BM_ObjectiveStep, mopoe, "mopoe");
BENCHMARK_CAPTURE(BM_ObjectiveStep, mmvm, "mmvm");

void BM_ForestTrain(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix x = normal_matrix(n, 8, 6);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = x(i, 0) + 0.3 * x(i, 1) > 0 ? 1.0 : 0.0;
  eval::ForestConfig cfg{.n_estimators = 100, .max_depth = 10, .seed = 7};
  for (auto _ : state) benchmark::DoNotOptimize(eval::rf_train(x, y, cfg));
}
BENCHMARK(BM_ForestTrain)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_Auroc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(8);
  std::vector<double> s = standard_normal(rng, n), y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<double>(i % 3 == 0);
  for (auto _ : state) benchmark::DoNotOptimize(eval::auroc(s, y));
}
BENCHMARK(BM_Auroc)->Arg(1000)->Arg(100000);

void BM_Synthetic(benchmark::State& state) {
  data::SyntheticConfig cfg;
  cfg.n_subjects = 300;
  for (auto _ : state) benchmark::DoNotOptimize(data::generate_synthetic(cfg, 9));
}
BENCHMARK(BM_Synthetic)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
