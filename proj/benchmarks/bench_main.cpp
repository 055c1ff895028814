#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "prmi/dataset.hpp"
#include "prmi/dynamics.hpp"
#include "prmi/fusion.hpp"
#include "prmi/neural/training.hpp"
#include "prmi/optics.hpp"

using namespace prmi;

namespace {

// Latency does not depend on weight values, so untrained models suffice.
dataset::NormalizationConstants norms_for(const std::vector<optics::OpticalSignals>& sig) {
  return dataset::compute_normalization(sig, optics::OpticalConfig{}.lambda);
}

std::vector<optics::OpticalSignals> free_signals(double seconds) {
  dynamics::MechConfig m;
  m.seed = 5;
  const auto traj = dynamics::free_trajectory(seconds, m);
  return dynamics::signals_along(traj, optics::OpticalConfig{});
}

void BM_OpticalSignals(benchmark::State& state) {
  const optics::OpticalConfig cfg;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e-6, 1e-6);
  std::vector<optics::DofState> states(1024);
  for (auto& s : states) s = {u(rng), u(rng), 0.0, 0.0};
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(optics::optical_signals(states[i++ & 1023], cfg));
  }
}
BENCHMARK(BM_OpticalSignals);

void BM_EstimatorStep(benchmark::State& state) {
  const auto sig = free_signals(4.0);
  const auto norms = norms_for(sig);
  const auto pos = neural::ModelWeights::initialize(neural::ModelSpec::position_default(), 1);
  const auto vel = neural::ModelWeights::initialize(neural::ModelSpec::velocity_default(), 2);
  fusion::NeuralStateEstimator est(pos, vel, norms, fusion::FilterConfig{}, 16);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(est.step(sig[i]));
    if (++i == sig.size()) i = 0;
  }
  state.counters["budget_us"] = 1e6 / 2048.0;
}
BENCHMARK(BM_EstimatorStep)->Unit(benchmark::kMicrosecond);

void BM_FuseAndSelect(benchmark::State& state) {
  fusion::FilterConfig cfg;
  fusion::FilterState s;
  s.p_star = {1e-7, -2e-7};
  s.sigma_p = {1e-16, 1e-16};
  s.sigma_v = {1e-12, 1e-12};
  fusion::Measurement m;
  m.mu_p = {1.1e-7, -1.9e-7};
  m.var_p = {4e-16, 4e-16};
  m.var_v = {1e-12, 1e-12};
  std::vector<fusion::Candidate> scratch;
  for (auto _ : state) benchmark::DoNotOptimize(fusion::fuse_and_select(s, m, cfg, scratch));
}
BENCHMARK(BM_FuseAndSelect);

void BM_TrainingBatch(benchmark::State& state) {
  const auto spec = neural::ModelSpec::position_default();
  const auto w = neural::ModelWeights::initialize(spec, 1);
  const auto batch_size = static_cast<std::size_t>(state.range(0));
  std::mt19937 rng(1);
  std::uniform_real_distribution<float> u(-1, 1);
  std::vector<std::vector<float>> data(batch_size, std::vector<float>(dataset::kDefaultWindow * dataset::kChannels));
  neural::Batch b;
  for (auto& d : data) {
    for (auto& v : d) v = u(rng);
    b.windows.emplace_back(d);
    b.targets.push_back({0.1f, -0.2f});
  }
  neural::BatchNetwork<float> net(spec);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(neural::compute_gradients<float>(net, w.values, b, 10.0, true, seed++, 64));
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * batch_size));
}
BENCHMARK(BM_TrainingBatch)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
