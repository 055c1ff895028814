#pragma once

#include <cstddef>
#include <vector>

#include "prmi/fusion.hpp"

namespace prmi {

struct LatencyStats {
  std::size_t steps = 0;
  double mean_us = 0.0;
  double p50_us = 0.0;
  double p99_us = 0.0;
  double max_us = 0.0;
  bool pinned = false;
};

/// Pins the calling thread to the CPU it is currently running on. Returns
/// false where unsupported.
bool pin_to_current_cpu();

/// Wall time of NeuralStateEstimator::step (both models plus one filter
/// update) per sample. The first `skip` steps are excluded from the
/// statistics; they are still executed.
LatencyStats measure_step_latency(fusion::NeuralStateEstimator& est,
                                  const std::vector<optics::OpticalSignals>& signals,
                                  std::size_t skip = 0);

}  // namespace prmi
