#include "prmi/latency.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "prmi/errors.hpp"

#if defined(__linux__)
#include <sched.h>
#endif

namespace prmi {

bool pin_to_current_cpu() {
#if defined(__linux__)
  const int cpu = sched_getcpu();
  if (cpu < 0) return false;
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(cpu, &set);
  return sched_setaffinity(0, sizeof(set), &set) == 0;
#else
  return false;
#endif
}

LatencyStats measure_step_latency(fusion::NeuralStateEstimator& est,
                                  const std::vector<optics::OpticalSignals>& signals, std::size_t skip) {
  if (signals.size() <= skip) throw ConfigError("latency: stream shorter than the skipped prefix");
  using clock = std::chrono::steady_clock;
  std::vector<double> us;
  us.reserve(signals.size() - skip);
  double sink = 0.0;
  for (std::size_t i = 0; i < signals.size(); ++i) {
    const auto t0 = clock::now();
    const auto e = est.step(signals[i]);
    const auto t1 = clock::now();
    sink += e.position[0];
    if (i >= skip) us.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
  }
  if (!std::isfinite(sink)) throw NumericalError("latency: non-finite estimate");
  LatencyStats s;
  s.steps = us.size();
  double total = 0.0;
  for (double v : us) total += v;
  s.mean_us = total / static_cast<double>(us.size());
  std::sort(us.begin(), us.end());
  const auto pct = [&](double q) {
    const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(us.size()))) - 1;
    return us[std::min(k, us.size() - 1)];
  };
  s.p50_us = pct(0.5);
  s.p99_us = pct(0.99);
  s.max_us = us.back();
  return s;
}

}  // namespace prmi
