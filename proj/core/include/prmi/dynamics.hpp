#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "prmi/optics.hpp"

namespace prmi::dynamics {

/// (PRCL, MICH) force in newtons.
using Force = std::array<double, 2>;

/// Per-sample RMS of a white drive force that gives a damped oscillator the
/// requested stationary position standard deviation.
double drive_rms_for_position_std(double position_std, double f0, double q, double mass,
                                  double sample_rate);

struct MechConfig {
  double f0 = 1.0;
  double q = 10.0;
  double mass_eff = 1.0;
  double drive_rms = drive_rms_for_position_std(0.7e-6, 1.0, 10.0, 1.0, 2048.0);
  double sample_rate = 2048.0;
  std::uint64_t seed = 1;
  /// Free-running time discarded before recording starts. Raised to at
  /// least 10/f0 and three amplitude decay times.
  double warmup = 20.0;

  void validate() const;
  double dt() const { return 1.0 / sample_rate; }
  double omega0() const;
  double effective_warmup() const;
};

struct Trajectory {
  double sample_rate = 2048.0;
  std::vector<double> t;
  std::vector<optics::DofState> states;
  std::vector<Force> forces;

  std::size_t size() const { return states.size(); }
};

/// Semi-implicit Euler step of two independent damped oscillators: velocity
/// first, then position with the new velocity.
optics::DofState step(const optics::DofState& state, const Force& force, const Force& drive,
                      const MechConfig& cfg);

/// Stateful seismic-driven mirror model shared by free and closed-loop runs so
/// that both consume the random stream identically.
class Simulator {
 public:
  explicit Simulator(const MechConfig& cfg);

  void warm_up();
  optics::DofState advance(const Force& force);

  const optics::DofState& state() const { return state_; }
  const MechConfig& config() const { return cfg_; }

 private:
  MechConfig cfg_;
  optics::DofState state_{};
  std::mt19937_64 rng_;
  std::normal_distribution<double> noise_{0.0, 1.0};
};

Trajectory free_trajectory(double duration, const MechConfig& cfg);

struct StateEstimate {
  bool valid = false;
  std::array<double, 2> position{};  // (PRCL, MICH), m
  std::array<double, 2> velocity{};  // m/s
};

struct Observation {
  std::size_t index = 0;
  double t = 0.0;
  const optics::OpticalSignals& signals;
  /// Ground truth; only a perfect-knowledge estimator is allowed to read it.
  const optics::DofState& truth;
};

using EstimatorFn = std::function<StateEstimate(const Observation&)>;
using ControllerFn =
    std::function<Force(double t, const StateEstimate&, const optics::OpticalSignals&)>;

struct ClosedLoopRun {
  Trajectory trajectory;
  std::vector<optics::OpticalSignals> signals;
  std::vector<StateEstimate> estimates;
};

/// Per step: signals(state) -> estimator -> controller -> force -> dynamics.
/// Throws NumericalError if the controller returns a non-finite force.
ClosedLoopRun run_closed_loop(const ControllerFn& controller, const EstimatorFn& estimator,
                              double duration, const MechConfig& cfg,
                              const optics::OpticalConfig& ocfg);

std::vector<optics::OpticalSignals> signals_along(const Trajectory& traj,
                                                  const optics::OpticalConfig& ocfg);

/// Columns: t, dl_prcl, dl_mich, v_prcl, v_mich, f_prcl, f_mich, then the ten
/// signals in canonical order.
void write_trajectory_csv(const std::string& path, const Trajectory& traj,
                          const std::vector<optics::OpticalSignals>& signals);

}  // namespace prmi::dynamics
