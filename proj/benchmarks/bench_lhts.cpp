#include <benchmark/benchmark.h>

#include <vector>

#include "lhts/diffusion.hpp"
#include "lhts/numerics/log_space.hpp"
#include "lhts/oracle.hpp"
#include "lhts/scenarios.hpp"
#include "lhts/trainer.hpp"

using namespace lhts;

namespace {

std::vector<train::Example> examples(const ar::Model& model, std::size_t n) {
  std::vector<train::Example> out;
  for (const auto& x : scenarios::sample_dataset(model, n, 1)) out.push_back({x, 1.0});
  return out;
}

void BM_LogSumExp(benchmark::State& state) {
  numerics::Rng rng(1);
  std::vector<double> v(static_cast<std::size_t>(state.range(0)));
  for (double& x : v) x = 10.0 * rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(numerics::log_sum_exp(v));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LogSumExp)->Arg(16)->Arg(1024);

void BM_SuffixWeights(benchmark::State& state) {
  const auto length = static_cast<int>(state.range(0));
  const auto model = scenarios::iid_model(std::vector{0.4, 0.3, 0.2, 0.1}, length);
  const auto batch = examples(model, 32);
  const std::vector<double> mean(static_cast<std::size_t>(length), -1.0);
  for (auto _ : state) {
    std::vector<std::vector<double>> suffixes;
    for (const auto& ex : batch) suffixes.push_back(train::apply_horizon(train::suffix_log_liks(model, ex.tokens), 4));
    benchmark::DoNotOptimize(train::ar_weights(suffixes, 0.5, mean, 3.0));
  }
}
BENCHMARK(BM_SuffixWeights)->Arg(16)->Arg(64);

void BM_ArLossGradient(benchmark::State& state) {
  const auto base = scenarios::random_tabular(4, 4, 1.0, 2);
  auto q = ar::Model::linear(4, 4, 3);
  if (state.range(0)) q.enable_temperature_embedding(4, 3);
  const auto batch = examples(base, 32);
  std::vector<std::vector<double>> suffixes;
  for (const auto& ex : batch) suffixes.push_back(train::suffix_log_liks(base, ex.tokens));
  const auto weights = train::ar_weights(suffixes, 0.5, std::vector<double>(4, -2.0), 3.0);
  const auto t_cond = state.range(0) ? std::optional(0.5) : std::nullopt;
  numerics::Tape tape;
  for (auto _ : state) benchmark::DoNotOptimize(train::ar_loss_gradient(base, q, batch, &weights, 0.1, t_cond, tape));
}
BENCHMARK(BM_ArLossGradient)->Arg(0)->Arg(1);

void BM_LhtsStep(benchmark::State& state) {
  const auto base = scenarios::random_tabular(4, 4, 1.0, 4);
  const auto batch = examples(base, 32);
  train::LhtsConfig c;
  c.temperatures = {0.5};
  train::TrainState ts(base, c);
  for (auto _ : state) benchmark::DoNotOptimize(train::lhts_step(ts, batch, 0));
}
BENCHMARK(BM_LhtsStep);

void BM_EnumerateAndScale(benchmark::State& state) {
  const auto base = scenarios::random_tabular(4, static_cast<int>(state.range(0)), 1.0, 5);
  for (auto _ : state) {
    const auto p = oracle::enumerate_joint(base, base.max_length());
    benchmark::DoNotOptimize(oracle::temperature_scale_exact(p, 0.5));
  }
}
BENCHMARK(BM_EnumerateAndScale)->Arg(4)->Arg(8);

void BM_Sample(benchmark::State& state) {
  const auto model = scenarios::random_tabular(4, 8, 1.0, 6);
  for (auto _ : state) {
    numerics::Rng rng(7);
    benchmark::DoNotOptimize(ar::sample(model, 1000, 0.8, std::nullopt, rng));
  }
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_Sample);

void BM_DenoiseGradient(benchmark::State& state) {
  using namespace diffusion;
  const DiffusionModel model(2, NoiseSchedule::linear(50), 64, 16, 1);
  numerics::Rng rng(2);
  const auto data = MixtureGroundTruth::two_component(2, 0.7, 3.0, 0.3).sample(256, rng);
  const auto terms = draw_terms(model, data, {}, 128, rng);
  std::vector<double> grad;
  for (auto _ : state) benchmark::DoNotOptimize(weighted_loss_gradient(model, model.parameters(), data, terms, grad));
}
BENCHMARK(BM_DenoiseGradient);

void BM_Elbo(benchmark::State& state) {
  using namespace diffusion;
  const DiffusionModel model(2, NoiseSchedule::linear(50), 64, 16, 1);
  const std::vector<double> x{1.5, 0.0};
  numerics::Rng rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(elbo(model, x, rng, 4));
}
BENCHMARK(BM_Elbo);

}  // namespace

BENCHMARK_MAIN();
