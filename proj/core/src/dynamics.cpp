#include "prmi/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "prmi/csv.hpp"
#include "prmi/errors.hpp"

namespace prmi::dynamics {

double drive_rms_for_position_std(double position_std, double f0, double q, double mass,
                                  double sample_rate) {
  // White acceleration noise of spectral density S gives var(x) = S / (2 gamma w0^2)
  // with gamma = w0 / q; a force held for dt carries S = (F/m)^2 dt.
  const double w0 = 2.0 * std::numbers::pi * f0;
  const double gamma = w0 / q;
  return position_std * mass * w0 * std::sqrt(2.0 * gamma * sample_rate);
}

void MechConfig::validate() const {
  if (!(std::isfinite(f0) && f0 > 0.0)) throw ConfigError("dynamics: f0 must be > 0");
  if (!(std::isfinite(q) && q > 0.0)) throw ConfigError("dynamics: q must be > 0");
  if (!(std::isfinite(mass_eff) && mass_eff > 0.0)) throw ConfigError("dynamics: mass_eff must be > 0");
  if (!(std::isfinite(sample_rate) && sample_rate > 0.0)) throw ConfigError("dynamics: sample_rate must be > 0");
  if (!(std::isfinite(drive_rms) && drive_rms >= 0.0)) throw ConfigError("dynamics: drive_rms must be >= 0");
  if (!(std::isfinite(warmup) && warmup >= 0.0)) throw ConfigError("dynamics: warmup must be >= 0");
}

double MechConfig::omega0() const { return 2.0 * std::numbers::pi * f0; }

double MechConfig::effective_warmup() const {
  const double decay_time = 2.0 * q / omega0();
  return std::max({warmup, 10.0 / f0, 3.0 * decay_time});
}

optics::DofState step(const optics::DofState& s, const Force& force, const Force& drive,
                      const MechConfig& cfg) {
  const double w0 = cfg.omega0();
  const double w0_sq = w0 * w0;
  const double gamma = w0 / cfg.q;
  const double dt = cfg.dt();
  auto advance = [&](double x, double v, double f) {
    const double a = -w0_sq * x - gamma * v + f / cfg.mass_eff;
    const double v_new = v + a * dt;
    return std::pair{x + v_new * dt, v_new};
  };
  const auto [xp, vp] = advance(s.dl_prcl, s.v_prcl, force[0] + drive[0]);
  const auto [xm, vm] = advance(s.dl_mich, s.v_mich, force[1] + drive[1]);
  return {xp, xm, vp, vm};
}

Simulator::Simulator(const MechConfig& cfg) : cfg_(cfg), rng_(cfg.seed) { cfg_.validate(); }

void Simulator::warm_up() {
  const auto n = static_cast<std::size_t>(std::llround(cfg_.effective_warmup() * cfg_.sample_rate));
  for (std::size_t i = 0; i < n; ++i) advance({0.0, 0.0});
}

optics::DofState Simulator::advance(const Force& force) {
  const Force drive{cfg_.drive_rms * noise_(rng_), cfg_.drive_rms * noise_(rng_)};
  state_ = step(state_, force, drive, cfg_);
  return state_;
}

Trajectory free_trajectory(double duration, const MechConfig& cfg) {
  if (!(duration > 0.0)) throw ConfigError("dynamics: duration must be > 0");
  Simulator sim(cfg);
  sim.warm_up();
  const auto n = static_cast<std::size_t>(std::llround(duration * cfg.sample_rate));
  Trajectory traj;
  traj.sample_rate = cfg.sample_rate;
  traj.t.reserve(n);
  traj.states.reserve(n);
  traj.forces.assign(n, Force{0.0, 0.0});
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) sim.advance({0.0, 0.0});
    traj.t.push_back(static_cast<double>(i) / cfg.sample_rate);
    traj.states.push_back(sim.state());
  }
  return traj;
}

ClosedLoopRun run_closed_loop(const ControllerFn& controller, const EstimatorFn& estimator,
                              double duration, const MechConfig& cfg,
                              const optics::OpticalConfig& ocfg) {
  if (!(duration > 0.0)) throw ConfigError("dynamics: duration must be > 0");
  Simulator sim(cfg);
  sim.warm_up();
  const auto n = static_cast<std::size_t>(std::llround(duration * cfg.sample_rate));
  ClosedLoopRun run;
  auto& traj = run.trajectory;
  traj.sample_rate = cfg.sample_rate;
  traj.t.reserve(n);
  traj.states.reserve(n);
  traj.forces.reserve(n);
  run.signals.reserve(n);
  run.estimates.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / cfg.sample_rate;
    const optics::DofState truth = sim.state();
    const optics::OpticalSignals sig = optics::optical_signals(truth, ocfg);
    const StateEstimate est = estimator(Observation{i, t, sig, truth});
    const Force f = controller(t, est, sig);
    if (!std::isfinite(f[0]) || !std::isfinite(f[1])) {
      throw NumericalError("dynamics: controller returned a non-finite force at t=" + std::to_string(t));
    }
    traj.t.push_back(t);
    traj.states.push_back(truth);
    traj.forces.push_back(f);
    run.signals.push_back(sig);
    run.estimates.push_back(est);
    if (i + 1 < n) sim.advance(f);
  }
  return run;
}

std::vector<optics::OpticalSignals> signals_along(const Trajectory& traj,
                                                  const optics::OpticalConfig& ocfg) {
  std::vector<optics::OpticalSignals> out;
  out.reserve(traj.size());
  for (const auto& s : traj.states) out.push_back(optics::optical_signals(s, ocfg));
  return out;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj,
                          const std::vector<optics::OpticalSignals>& signals) {
  if (signals.size() != traj.size()) throw IntegrityError("trajectory/signal length mismatch");
  CsvWriter csv(path);
  std::vector<std::string> header{"t", "dl_prcl", "dl_mich", "v_prcl", "v_mich", "f_prcl", "f_mich"};
  for (auto name : optics::kSignalNames) header.emplace_back(name);
  csv.header(header);
  std::vector<double> row(header.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto& s = traj.states[i];
    row[0] = traj.t[i];
    row[1] = s.dl_prcl;
    row[2] = s.dl_mich;
    row[3] = s.v_prcl;
    row[4] = s.v_mich;
    row[5] = traj.forces[i][0];
    row[6] = traj.forces[i][1];
    const auto a = signals[i].to_array();
    std::copy(a.begin(), a.end(), row.begin() + 7);
    csv.row(row);
  }
}

}  // namespace prmi::dynamics
