#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "prmi/dataset.hpp"
#include "prmi/errors.hpp"
#include "prmi/fusion.hpp"
#include "prmi/latency.hpp"
#include "prmi/lock.hpp"
#include "prmi/neural/training.hpp"
#include "prmi/neural/weights_io.hpp"
#include "prmi/pipeline.hpp"

namespace prmi::cli {

namespace {

namespace fs = std::filesystem;

void ensure_parent(const std::string& path) {
  const fs::path p = fs::path(path).parent_path();
  if (!p.empty()) fs::create_directories(p);
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream f(path);
  if (!f) throw FormatError("cannot write " + path);
  f << j.dump(2) << '\n';
}

void log(const std::string& s) { std::fprintf(stderr, "%s\n", s.c_str()); }

struct LoadedModels {
  neural::ModelWeights position;
  neural::ModelWeights velocity;
  dataset::NormalizationConstants norms;
};

LoadedModels load_models(const ModelFiles& f) {
  if (f.position.empty() || f.velocity.empty() || f.norms.empty()) {
    throw ConfigError("--position, --velocity and --norms are required");
  }
  return {neural::load_weights(f.position, neural::ModelSpec::position_default()),
          neural::load_weights(f.velocity, neural::ModelSpec::velocity_default()),
          dataset::load_norms(f.norms)};
}

dynamics::MechConfig with_seed(dynamics::MechConfig m, std::uint64_t seed) {
  m.seed = seed;
  return m;
}

}  // namespace

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    if (item.empty()) throw ConfigError("seeds: empty item in '" + text + "'");
    try {
      const std::size_t dash = item.find('-');
      if (dash == std::string::npos) {
        out.push_back(std::stoull(item));
      } else {
        const auto a = std::stoull(item.substr(0, dash));
        const auto b = std::stoull(item.substr(dash + 1));
        if (b < a) throw ConfigError("seeds: descending range '" + item + "'");
        for (auto s = a; s <= b; ++s) out.push_back(s);
      }
    } catch (const std::logic_error& e) {
      if (dynamic_cast<const ConfigError*>(&e)) throw;
      throw ConfigError("seeds: cannot parse '" + item + "'");
    }
    pos = comma + 1;
  }
  return out;
}

int cmd_simulate(const RunConfig& cfg, const SimulateOptions& o) {
  cfg.validate();
  ensure_parent(o.out);
  const auto traj = dynamics::free_trajectory(o.duration, with_seed(cfg.mech, o.seed));
  const auto sig = dynamics::signals_along(traj, cfg.optics);
  dynamics::write_trajectory_csv(o.out, traj, sig);
  RunConfig resolved = cfg;
  resolved.mech.seed = o.seed;
  save_config(o.out + ".config.json", resolved);
  log("wrote " + std::to_string(traj.size()) + " samples to " + o.out);
  return kOk;
}

int cmd_dataset(RunConfig cfg, const DatasetOptions& o) {
  if (o.duration) cfg.dataset.duration = *o.duration;
  if (o.seed) cfg.dataset.seed = *o.seed;
  cfg.validate();
  ensure_parent(o.out);
  const auto ds = pipeline::generate_dataset(cfg.dataset, cfg.optics, cfg.mech, cfg.lock,
                                             config_hash(cfg), log);
  dataset::save(o.out, ds);
  dataset::save_norms(o.out + ".norms.json", ds.norms);
  save_config(o.out + ".config.json", cfg);
  log("dataset: " + std::to_string(ds.train.size()) + " train / " + std::to_string(ds.test.size()) +
      " test windows -> " + o.out);
  return kOk;
}

int cmd_train(const RunConfig& cfg, const TrainOptions& o) {
  cfg.validate();
  neural::ModelSpec spec;
  neural::Target target;
  neural::TrainConfig tc;
  if (o.model == "position") {
    spec = neural::ModelSpec::position_default();
    target = neural::Target::kPosition;
    tc = cfg.train_position;
  } else if (o.model == "velocity") {
    spec = neural::ModelSpec::velocity_default();
    target = neural::Target::kVelocity;
    tc = cfg.train_velocity;
  } else {
    throw ConfigError("--model must be position or velocity");
  }
  if (o.target == "position") {
    target = neural::Target::kPosition;
  } else if (o.target == "velocity") {
    target = neural::Target::kVelocity;
  } else if (!o.target.empty()) {
    throw ConfigError("--target must be position or velocity");
  }
  const auto ds = dataset::load(o.dataset);
  ensure_parent(o.out);
  std::optional<neural::ModelWeights> init;
  if (!o.init.empty()) init = neural::load_weights(o.init, spec);
  log("training " + o.model + " model (" + std::to_string(neural::parameter_count(spec)) +
      " parameters) on " + std::to_string(ds.train.size()) + " windows");
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = neural::train(
      spec, ds, target, tc,
      [&](const neural::EpochRecord& r, const neural::ModelWeights& best) {
        std::fprintf(stderr, "epoch %d lr %.3g train %.5f val %.5f\n", r.epoch, r.lr, r.train_loss,
                     r.val_loss);
        neural::save_weights(o.out, best);
      },
      init ? &*init : nullptr);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  neural::save_weights(o.out, res.weights);
  const std::string history = o.history.empty() ? o.out + ".history.csv" : o.history;
  neural::write_history_csv(history, res.history);
  save_config(o.out + ".config.json", cfg);
  const auto ev = neural::evaluate(res.weights, ds.test, target, tc.alpha);
  const nlohmann::json summary = {{"model", o.model},
                                  {"target", target == neural::Target::kPosition ? "position" : "velocity"},
                                  {"parameters", neural::parameter_count(spec)},
                                  {"epochs_run", res.epochs_run},
                                  {"best_epoch", res.best_epoch},
                                  {"early_stopped", res.early_stopped},
                                  {"train_seconds", seconds},
                                  {"test_loss", ev.loss},
                                  {"test_rmse", ev.rmse},
                                  {"test_mean_sigma", ev.mean_sigma},
                                  {"test_samples", ev.samples}};
  write_json(o.out + ".summary.json", summary);
  log(summary.dump());
  return kOk;
}

int cmd_estimate(const RunConfig& cfg, const EstimateOptions& o) {
  cfg.validate();
  const auto m = load_models(o.models);
  ensure_parent(o.out);
  const auto traj = dynamics::free_trajectory(o.duration, with_seed(cfg.mech, o.seed));
  const auto sig = dynamics::signals_along(traj, cfg.optics);
  const auto run = fusion::filter_run(m.position, m.velocity, sig, traj.sample_rate, m.norms, cfg.filter);
  fusion::write_estimate_csv(o.out, run, &traj);
  const auto st = fusion::residual_stats(traj, run, cfg.optics.lambda);
  const nlohmann::json summary = {{"seed", o.seed},
                                  {"duration", o.duration},
                                  {"samples", st.samples},
                                  {"offset", st.offset},
                                  {"residual_rms", st.rms},
                                  {"offset_grid_distance", st.grid_distance},
                                  {"offset_on_grid", st.grid_distance[0] <= 1e-9 && st.grid_distance[1] <= 1e-9},
                                  {"shift_changes", st.shift_changes},
                                  {"boundary_hits", run.boundary_hits},
                                  {"continuity_violations", run.continuity_violations}};
  write_json(o.out + ".summary.json", summary);
  RunConfig resolved = cfg;
  resolved.mech.seed = o.seed;
  save_config(o.out + ".config.json", resolved);
  log(summary.dump());
  return kOk;
}

int cmd_lock(const RunConfig& cfg, const LockOptions& o) {
  cfg.validate();
  const auto mode = control::parse_lock_mode(o.mode);
  const auto seeds = parse_seeds(o.seeds);
  std::optional<control::NeuralSetup> setup;
  if (mode == control::LockMode::kNeural) {
    auto m = load_models(o.models);
    setup = control::NeuralSetup{std::move(m.position), std::move(m.velocity), m.norms, cfg.filter,
                                 dataset::kDefaultWindow};
  }
  fs::create_directories(o.out_dir);
  const double duration = o.duration.value_or(control::default_duration(mode));
  std::vector<control::LockReport> reports;
  for (auto seed : seeds) {
    const auto r = control::run_lock(mode, seed, duration, cfg.optics, cfg.mech, cfg.lock, cfg.classical,
                                     cfg.criteria, setup ? &*setup : nullptr);
    control::write_lock_csv(
        (fs::path(o.out_dir) / ("lock_" + o.mode + "_seed" + std::to_string(seed) + ".csv")).string(), r.run);
    std::fprintf(stderr, "seed %llu: locked %d duty %.3f peak force %.4g N time to lock %.1f s\n",
                 static_cast<unsigned long long>(seed), r.report.locked ? 1 : 0, r.report.duty,
                 r.report.peak_force, r.report.time_to_lock);
    reports.push_back(r.report);
  }
  control::write_lock_reports_json((fs::path(o.out_dir) / ("report_" + o.mode + ".json")).string(), reports);
  save_config((fs::path(o.out_dir) / "resolved_config.json").string(), cfg);
  const bool any = std::any_of(reports.begin(), reports.end(), [](const auto& r) { return r.locked; });
  return any ? kOk : kAcceptanceFailure;
}

int cmd_bench(const RunConfig& cfg, const BenchOptions& o) {
  cfg.validate();
  const auto m = load_models(o.models);
  const bool pinned = pin_to_current_cpu();
  const auto traj = dynamics::free_trajectory(o.duration, with_seed(cfg.mech, o.seed));
  const auto sig = dynamics::signals_along(traj, cfg.optics);
  fusion::NeuralStateEstimator est(m.position, m.velocity, m.norms, cfg.filter);
  auto st = measure_step_latency(est, sig, dataset::kDefaultWindow);
  st.pinned = pinned;
  const double budget = 1e6 / cfg.mech.sample_rate;
  const bool pass = st.mean_us < budget && st.p99_us < 2.0 * st.mean_us;
  const nlohmann::json j = {{"steps", st.steps},     {"mean_us", st.mean_us}, {"p50_us", st.p50_us},
                            {"p99_us", st.p99_us},   {"max_us", st.max_us},   {"budget_us", budget},
                            {"pinned", st.pinned},   {"pass", pass}};
  std::printf("%s\n", j.dump(2).c_str());
  if (!o.out.empty()) {
    ensure_parent(o.out);
    write_json(o.out, j);
    save_config(o.out + ".config.json", cfg);
  }
  return pass ? kOk : kAcceptanceFailure;
}

}  // namespace prmi::cli
