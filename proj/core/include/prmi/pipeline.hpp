#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "prmi/control.hpp"
#include "prmi/dataset.hpp"
#include "prmi/dynamics.hpp"
#include "prmi/optics.hpp"

namespace prmi::pipeline {

struct DatasetGenConfig {
  /// Total simulated time over both splits, s.
  double duration = 2000.0;
  /// Length of one independently seeded trajectory, s.
  double segment = 100.0;
  double test_fraction = 0.2;
  /// Share of segments recorded under closed-loop lock acquisition.
  double closed_loop_fraction = 1.0 / 6.0;
  /// Closed-loop segments are cut into episodes that each start from free
  /// motion and run the two-stage controller.
  double episode = 20.0;
  /// White noise added to the controller's state knowledge, m and m/s.
  double estimate_noise_pos = 5e-9;
  double estimate_noise_vel = 2e-7;
  std::size_t stride = 64;
  std::size_t window = dataset::kDefaultWindow;
  /// Length of the dedicated normalization run, s.
  double normalization_duration = 2000.0;
  std::uint64_t seed = 1000;

  void validate() const;
};

struct SegmentPlan {
  std::uint64_t seed = 0;
  bool test = false;
  bool closed_loop = false;
};

/// Deterministic assignment of seeds to splits and sources. Test segments
/// come last so that train and test seeds never overlap.
std::vector<SegmentPlan> plan_segments(const DatasetGenConfig& cfg);

using LogFn = std::function<void(const std::string&)>;

/// Normalization run, then every planned segment simulated, normalized and
/// windowed into its split.
dataset::Dataset generate_dataset(const DatasetGenConfig& cfg, const optics::OpticalConfig& ocfg,
                                  const dynamics::MechConfig& mcfg,
                                  const control::LockConfig& lcfg, const std::string& config_hash,
                                  const LogFn& log = {});

/// One closed-loop lock-acquisition episode with noisy perfect-state
/// knowledge.
dynamics::ClosedLoopRun closed_loop_episode(const DatasetGenConfig& cfg,
                                            const optics::OpticalConfig& ocfg,
                                            const dynamics::MechConfig& mcfg,
                                            const control::LockConfig& lcfg, std::uint64_t seed);

}  // namespace prmi::pipeline
