#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prmi/config.hpp"

namespace prmi::cli {

enum ExitCode : int { kOk = 0, kAcceptanceFailure = 1, kUsage = 2, kIo = 3 };

struct SimulateOptions {
  double duration = 120.0;
  std::uint64_t seed = 1;
  std::string out;
};

struct DatasetOptions {
  std::optional<double> duration;
  std::optional<std::uint64_t> seed;
  std::string out;
};

struct TrainOptions {
  std::string model;  // position | velocity
  std::string dataset;
  std::string out;
  std::string history;
  std::string init;
  /// Supervision target; empty means the model's own. A velocity network
  /// can be pre-trained on position targets.
  std::string target;
};

struct ModelFiles {
  std::string position;
  std::string velocity;
  std::string norms;
};

struct EstimateOptions {
  ModelFiles models;
  double duration = 10.0;
  std::uint64_t seed = 424242;
  std::string out;
};

struct LockOptions {
  std::string mode;
  std::string seeds = "1-10";
  std::optional<double> duration;
  ModelFiles models;
  std::string out_dir;
};

struct BenchOptions {
  ModelFiles models;
  double duration = 10.0;
  std::uint64_t seed = 7;
  std::string out;
};

/// "1-10", "3", "1,4,9" or combinations such as "1-3,7".
std::vector<std::uint64_t> parse_seeds(const std::string& text);

int cmd_simulate(const RunConfig& cfg, const SimulateOptions& o);
int cmd_dataset(RunConfig cfg, const DatasetOptions& o);
int cmd_train(const RunConfig& cfg, const TrainOptions& o);
int cmd_estimate(const RunConfig& cfg, const EstimateOptions& o);
int cmd_lock(const RunConfig& cfg, const LockOptions& o);
int cmd_bench(const RunConfig& cfg, const BenchOptions& o);

}  // namespace prmi::cli
