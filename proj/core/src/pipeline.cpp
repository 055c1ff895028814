#include "prmi/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "prmi/errors.hpp"

namespace prmi::pipeline {

void DatasetGenConfig::validate() const {
  if (!(duration > 0.0) || !(segment > 0.0) || !(episode > 0.0)) {
    throw ConfigError("dataset: durations must be > 0");
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("dataset: test_fraction must lie in (0, 1)");
  }
  if (!(closed_loop_fraction >= 0.0 && closed_loop_fraction <= 1.0)) {
    throw ConfigError("dataset: closed_loop_fraction must lie in [0, 1]");
  }
  if (estimate_noise_pos < 0.0 || estimate_noise_vel < 0.0) {
    throw ConfigError("dataset: estimate noise must be >= 0");
  }
  if (stride == 0 || window == 0) throw ConfigError("dataset: stride and window must be >= 1");
  if (!(normalization_duration > 0.0)) throw ConfigError("dataset: normalization_duration must be > 0");
}

std::vector<SegmentPlan> plan_segments(const DatasetGenConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(std::ceil(cfg.duration / cfg.segment - 1e-9));
  auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * cfg.test_fraction));
  n_test = std::clamp<std::size_t>(n_test, 1, n > 1 ? n - 1 : 1);
  if (n < 2) throw ConfigError("dataset: need at least two segments for a train/test split");
  const std::size_t n_train = n - n_test;
  const auto closed = [&](std::size_t count) {
    return static_cast<std::size_t>(std::llround(static_cast<double>(count) * cfg.closed_loop_fraction));
  };
  const std::size_t cl_train = closed(n_train), cl_test = closed(n_test);
  std::vector<SegmentPlan> plan;
  for (std::size_t i = 0; i < n; ++i) {
    SegmentPlan p;
    p.seed = cfg.seed + i;
    p.test = i >= n_train;
    const std::size_t k = p.test ? i - n_train : i;
    const std::size_t count = p.test ? n_test : n_train;
    const std::size_t cl = p.test ? cl_test : cl_train;
    // Closed-loop segments sit at the end of each split's block.
    p.closed_loop = k >= count - cl;
    plan.push_back(p);
  }
  return plan;
}

dynamics::ClosedLoopRun closed_loop_episode(const DatasetGenConfig& cfg,
                                            const optics::OpticalConfig& ocfg,
                                            const dynamics::MechConfig& mcfg,
                                            const control::LockConfig& lcfg, std::uint64_t seed) {
  dynamics::MechConfig m = mcfg;
  m.seed = seed;
  control::TwoStageController ctrl(lcfg, ocfg.lambda, m.dt());
  std::mt19937_64 rng(seed ^ 0xa5a5a5a5a5a5a5a5ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto estimator = [&](const dynamics::Observation& o) {
    dynamics::StateEstimate e;
    e.valid = true;
    e.position = {o.truth.dl_prcl + cfg.estimate_noise_pos * gauss(rng),
                  o.truth.dl_mich + cfg.estimate_noise_pos * gauss(rng)};
    e.velocity = {o.truth.v_prcl + cfg.estimate_noise_vel * gauss(rng),
                  o.truth.v_mich + cfg.estimate_noise_vel * gauss(rng)};
    return e;
  };
  const auto controller = [&](double t, const dynamics::StateEstimate& e,
                              const optics::OpticalSignals&) { return ctrl(t, e); };
  return dynamics::run_closed_loop(controller, estimator, cfg.episode, m, ocfg);
}

dataset::Dataset generate_dataset(const DatasetGenConfig& cfg, const optics::OpticalConfig& ocfg,
                                  const dynamics::MechConfig& mcfg,
                                  const control::LockConfig& lcfg, const std::string& config_hash,
                                  const LogFn& log) {
  cfg.validate();
  ocfg.validate();
  mcfg.validate();
  lcfg.validate();
  const auto plan = plan_segments(cfg);
  const auto say = [&](const std::string& s) {
    if (log) log(s);
  };

  dataset::Dataset ds;
  {
    dynamics::MechConfig m = mcfg;
    m.seed = cfg.seed + 1'000'000;
    say("normalization run: " + std::to_string(cfg.normalization_duration) + " s");
    const auto traj = dynamics::free_trajectory(cfg.normalization_duration, m);
    const auto sig = dynamics::signals_along(traj, ocfg);
    ds.norms = dataset::compute_normalization(sig, ocfg.lambda, cfg.window + 1);
  }
  ds.train = dataset::DatasetSplit(cfg.window);
  ds.test = dataset::DatasetSplit(cfg.window);
  ds.meta.stride = cfg.stride;
  ds.meta.window = cfg.window;
  ds.meta.config_hash = config_hash;

  for (const auto& p : plan) {
    auto& split = p.test ? ds.test : ds.train;
    (p.test ? ds.meta.test_seeds : ds.meta.train_seeds).push_back(p.seed);
    if (p.closed_loop) {
      const auto episodes = static_cast<std::size_t>(std::max(1.0, std::round(cfg.segment / cfg.episode)));
      for (std::size_t e = 0; e < episodes; ++e) {
        const std::uint64_t s = p.seed * 1000 + e;
        const auto run = closed_loop_episode(cfg, ocfg, mcfg, lcfg, s);
        split.append(dataset::build_samples(run.trajectory, run.signals, ds.norms, ocfg.lambda,
                                            cfg.stride, cfg.window));
        ds.meta.closed_loop_duration += cfg.episode;
      }
    } else {
      dynamics::MechConfig m = mcfg;
      m.seed = p.seed;
      const auto traj = dynamics::free_trajectory(cfg.segment, m);
      const auto sig = dynamics::signals_along(traj, ocfg);
      split.append(dataset::build_samples(traj, sig, ds.norms, ocfg.lambda, cfg.stride, cfg.window));
      ds.meta.free_duration += cfg.segment;
    }
    say(std::string(p.test ? "test" : "train") + (p.closed_loop ? " closed-loop" : " free") +
        " segment seed " + std::to_string(p.seed) + ": " + std::to_string(ds.train.size()) + " train / " +
        std::to_string(ds.test.size()) + " test samples");
  }
  ds.meta.n_train = ds.train.size();
  ds.meta.n_test = ds.test.size();
  return ds;
}

}  // namespace prmi::pipeline
