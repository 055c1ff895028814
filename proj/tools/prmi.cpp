#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "prmi/errors.hpp"

using namespace prmi;
using namespace prmi::cli;

namespace {

void add_models(CLI::App* c, ModelFiles& m) {
  c->add_option("--position", m.position, "Position model weights")->check(CLI::ExistingFile);
  c->add_option("--velocity", m.velocity, "Velocity model weights")->check(CLI::ExistingFile);
  c->add_option("--norms", m.norms, "Normalization constants JSON")->check(CLI::ExistingFile);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lock acquisition toolkit for a power-recycled Michelson interferometer"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "Override a config value, e.g. --set lock.prop_gain=2e5");

  SimulateOptions sim;
  auto* c_sim = app.add_subcommand("simulate", "Free-running trajectory and signals to CSV");
  c_sim->add_option("--duration", sim.duration, "Seconds")->check(CLI::PositiveNumber);
  c_sim->add_option("--seed", sim.seed);
  c_sim->add_option("-o,--out", sim.out, "CSV path")->required();

  DatasetOptions ds;
  auto* c_ds = app.add_subcommand("dataset", "Generate a normalized training/test dataset");
  c_ds->add_option("--duration", ds.duration, "Total simulated seconds")->check(CLI::PositiveNumber);
  c_ds->add_option("--seed", ds.seed, "First segment seed");
  c_ds->add_option("-o,--out", ds.out, "Dataset path")->required();

  TrainOptions tr;
  auto* c_tr = app.add_subcommand("train", "Train the position or velocity model");
  c_tr->add_option("--model", tr.model)->required()->check(CLI::IsMember({"position", "velocity"}));
  c_tr->add_option("--dataset", tr.dataset)->required()->check(CLI::ExistingFile);
  c_tr->add_option("-o,--out", tr.out, "Weights path")->required();
  c_tr->add_option("--history", tr.history, "Loss history CSV (default <out>.history.csv)");
  c_tr->add_option("--init", tr.init, "Start from these weights")->check(CLI::ExistingFile);
  c_tr->add_option("--target", tr.target, "Supervise on these targets (default: the model's own)")
      ->check(CLI::IsMember({"position", "velocity"}));

  EstimateOptions est;
  auto* c_est = app.add_subcommand("estimate", "Unwrapped state estimation on a held-out trajectory");
  add_models(c_est, est.models);
  c_est->add_option("--duration", est.duration)->check(CLI::PositiveNumber);
  c_est->add_option("--seed", est.seed);
  c_est->add_option("-o,--out", est.out, "Estimate CSV path")->required();

  LockOptions lk;
  auto* c_lk = app.add_subcommand("lock", "Closed-loop lock acquisition runs");
  c_lk->add_option("--mode", lk.mode)->required()->check(CLI::IsMember({"perfect", "neural", "classical"}));
  c_lk->add_option("--seeds", lk.seeds, "e.g. 1-10 or 1,3,5");
  c_lk->add_option("--duration", lk.duration, "Seconds (default 20, classical 60)")->check(CLI::PositiveNumber);
  add_models(c_lk, lk.models);
  c_lk->add_option("-o,--out-dir", lk.out_dir)->required();

  BenchOptions bn;
  auto* c_bn = app.add_subcommand("bench", "Per-step latency of both models plus the filter");
  add_models(c_bn, bn.models);
  c_bn->add_option("--duration", bn.duration, "Seconds of signal to stream")->check(CLI::PositiveNumber);
  c_bn->add_option("--seed", bn.seed);
  c_bn->add_option("-o,--out", bn.out, "JSON result path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    for (const auto& o : overrides) apply_override(cfg, o);
    if (*c_sim) return cmd_simulate(cfg, sim);
    if (*c_ds) return cmd_dataset(cfg, ds);
    if (*c_tr) return cmd_train(cfg, tr);
    if (*c_est) return cmd_estimate(cfg, est);
    if (*c_lk) return cmd_lock(cfg, lk);
    if (*c_bn) return cmd_bench(cfg, bn);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kAcceptanceFailure;
  }
  return kUsage;
}
