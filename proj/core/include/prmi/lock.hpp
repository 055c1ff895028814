#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prmi/control.hpp"
#include "prmi/dataset.hpp"
#include "prmi/dynamics.hpp"
#include "prmi/fusion.hpp"
#include "prmi/neural/network.hpp"

namespace prmi::control {

enum class LockMode { kPerfect, kNeural, kClassical };

std::string to_string(LockMode m);
LockMode parse_lock_mode(const std::string& s);

struct LockCriteria {
  double final_window = 5.0;       // s
  double power_fraction = 0.5;     // of peak pop_dc
  double min_duty = 0.9;

  void validate() const;
};

struct LockReport {
  std::uint64_t seed = 0;
  LockMode mode = LockMode::kPerfect;
  bool locked = false;
  /// Start of the earliest 1 s window from which every later 1 s window has
  /// duty >= min_duty; NaN when the run never settles.
  double time_to_lock = 0.0;
  double peak_force = 0.0;  // N, max |F| over both dofs and the whole run
  double duty = 0.0;        // over the final window
  std::array<double, 2> residual_rms{};  // wrapped (PRCL, MICH) over the final window, m
  std::size_t engagements = 0;           // classical mode
  std::size_t final_shift_changes = 0;   // neural mode, over the final window
};

/// Trained models and filter settings for neural mode.
struct NeuralSetup {
  neural::ModelWeights position;
  neural::ModelWeights velocity;
  dataset::NormalizationConstants norms;
  fusion::FilterConfig filter;
  std::size_t warmup_steps = dataset::kDefaultWindow;
};

struct LockRun {
  dynamics::ClosedLoopRun run;
  LockReport report;
  std::vector<std::array<int, 2>> shifts;  // neural mode, per step
};

/// Lock power threshold reference: pop_dc at the operating point.
double peak_pop_dc(const optics::OpticalConfig& ocfg);

LockReport evaluate_lock(const dynamics::ClosedLoopRun& run, double peak_dc, double lambda,
                         const LockCriteria& crit);

/// Default run lengths: 20 s for the two-stage modes, 60 s for classical.
double default_duration(LockMode mode);

LockRun run_lock(LockMode mode, std::uint64_t seed, double duration, const optics::OpticalConfig& ocfg,
                 const dynamics::MechConfig& mcfg, const LockConfig& lcfg,
                 const ClassicalConfig& ccfg, const LockCriteria& crit,
                 const NeuralSetup* neural = nullptr);

/// Columns: t, dl_prcl, dl_mich, v_prcl, v_mich, est_valid, est_prcl,
/// est_mich, est_v_prcl, est_v_mich, f_prcl, f_mich, pop_dc.
void write_lock_csv(const std::string& path, const dynamics::ClosedLoopRun& run);

void write_lock_reports_json(const std::string& path, const std::vector<LockReport>& reports);

}  // namespace prmi::control
