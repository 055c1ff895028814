#include "prmi/lock.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "prmi/csv.hpp"
#include "prmi/errors.hpp"
#include "prmi/wrapping.hpp"

namespace prmi::control {

std::string to_string(LockMode m) {
  switch (m) {
    case LockMode::kPerfect:
      return "perfect";
    case LockMode::kNeural:
      return "neural";
    case LockMode::kClassical:
      return "classical";
  }
  return "unknown";
}

LockMode parse_lock_mode(const std::string& s) {
  if (s == "perfect") return LockMode::kPerfect;
  if (s == "neural") return LockMode::kNeural;
  if (s == "classical") return LockMode::kClassical;
  throw ConfigError("lock: unknown mode '" + s + "' (perfect, neural, classical)");
}

void LockCriteria::validate() const {
  if (!(final_window > 0.0)) throw ConfigError("lock: final_window must be > 0");
  if (!(power_fraction > 0.0 && power_fraction < 1.0)) {
    throw ConfigError("lock: power_fraction must lie in (0, 1)");
  }
  if (!(min_duty > 0.0 && min_duty <= 1.0)) throw ConfigError("lock: min_duty must lie in (0, 1]");
}

double peak_pop_dc(const optics::OpticalConfig& ocfg) {
  return optics::optical_signals(optics::DofState{}, ocfg).pop_dc;
}

double default_duration(LockMode mode) { return mode == LockMode::kClassical ? 60.0 : 20.0; }

LockReport evaluate_lock(const dynamics::ClosedLoopRun& run, double peak_dc, double lambda,
                         const LockCriteria& crit) {
  crit.validate();
  const auto& traj = run.trajectory;
  const std::size_t n = traj.size();
  const double fs = traj.sample_rate;
  const auto win = static_cast<std::size_t>(std::llround(crit.final_window * fs));
  if (n < win || win == 0) throw ConfigError("lock: run shorter than the final window");
  const double threshold = crit.power_fraction * peak_dc;

  LockReport r;
  for (const auto& f : traj.forces) r.peak_force = std::max({r.peak_force, std::abs(f[0]), std::abs(f[1])});

  std::size_t high = 0;
  std::array<double, 2> sq{};
  for (std::size_t i = n - win; i < n; ++i) {
    if (run.signals[i].pop_dc >= threshold) ++high;
    const auto w = wrapping::wrap(traj.states[i].dl_prcl, traj.states[i].dl_mich, lambda);
    sq[0] += w.wrapped.dl_prcl * w.wrapped.dl_prcl;
    sq[1] += w.wrapped.dl_mich * w.wrapped.dl_mich;
  }
  r.duty = static_cast<double>(high) / static_cast<double>(win);
  r.residual_rms = {std::sqrt(sq[0] / win), std::sqrt(sq[1] / win)};
  r.locked = r.duty >= crit.min_duty;

  const auto sec = static_cast<std::size_t>(std::llround(fs));
  const std::size_t windows = n / sec;
  std::size_t first_good = windows;
  for (std::size_t k = windows; k-- > 0;) {
    std::size_t h = 0;
    for (std::size_t i = k * sec; i < (k + 1) * sec; ++i) {
      if (run.signals[i].pop_dc >= threshold) ++h;
    }
    if (static_cast<double>(h) / static_cast<double>(sec) < crit.min_duty) break;
    first_good = k;
  }
  r.time_to_lock = r.locked && first_good < windows ? static_cast<double>(first_good)
                                                     : std::numeric_limits<double>::quiet_NaN();
  return r;
}

LockRun run_lock(LockMode mode, std::uint64_t seed, double duration, const optics::OpticalConfig& ocfg,
                 const dynamics::MechConfig& mcfg, const LockConfig& lcfg,
                 const ClassicalConfig& ccfg, const LockCriteria& crit, const NeuralSetup* neural) {
  dynamics::MechConfig m = mcfg;
  m.seed = seed;
  m.validate();
  const double peak = peak_pop_dc(ocfg);
  LockRun out;

  switch (mode) {
    case LockMode::kPerfect: {
      TwoStageController ctrl(lcfg, ocfg.lambda, m.dt());
      const auto estimator = [](const dynamics::Observation& o) {
        dynamics::StateEstimate e;
        e.valid = true;
        e.position = {o.truth.dl_prcl, o.truth.dl_mich};
        e.velocity = {o.truth.v_prcl, o.truth.v_mich};
        return e;
      };
      const auto controller = [&](double t, const dynamics::StateEstimate& e,
                                  const optics::OpticalSignals&) { return ctrl(t, e); };
      out.run = dynamics::run_closed_loop(controller, estimator, duration, m, ocfg);
      break;
    }
    case LockMode::kNeural: {
      if (!neural) throw ConfigError("lock: neural mode needs trained models");
      fusion::NeuralStateEstimator est(neural->position, neural->velocity, neural->norms,
                                       neural->filter, neural->warmup_steps);
      TwoStageController ctrl(lcfg, ocfg.lambda, m.dt());
      const auto estimator = [&](const dynamics::Observation& o) {
        const auto e = est.step(o.signals);
        out.shifts.push_back(est.filter().state().shifts);
        return e;
      };
      const auto controller = [&](double t, const dynamics::StateEstimate& e,
                                  const optics::OpticalSignals&) { return ctrl(t, e); };
      out.run = dynamics::run_closed_loop(controller, estimator, duration, m, ocfg);
      break;
    }
    case LockMode::kClassical: {
      ClassicalController ctrl(ccfg, measure_sensing_matrix(ocfg), peak, m.dt());
      const auto estimator = [](const dynamics::Observation&) { return dynamics::StateEstimate{}; };
      const auto controller = [&](double, const dynamics::StateEstimate&,
                                  const optics::OpticalSignals& s) { return ctrl(s); };
      out.run = dynamics::run_closed_loop(controller, estimator, duration, m, ocfg);
      out.report.engagements = ctrl.engagements();
      break;
    }
  }

  const std::size_t engagements = out.report.engagements;
  out.report = evaluate_lock(out.run, peak, ocfg.lambda, crit);
  out.report.seed = seed;
  out.report.mode = mode;
  out.report.engagements = engagements;
  if (mode == LockMode::kNeural) {
    const auto win = static_cast<std::size_t>(std::llround(crit.final_window * m.sample_rate));
    const std::size_t n = out.shifts.size();
    for (std::size_t i = n - win + 1; i < n; ++i) {
      if (out.shifts[i] != out.shifts[i - 1]) ++out.report.final_shift_changes;
    }
  }
  return out;
}

void write_lock_csv(const std::string& path, const dynamics::ClosedLoopRun& run) {
  CsvWriter csv(path);
  csv.header({"t", "dl_prcl", "dl_mich", "v_prcl", "v_mich", "est_valid", "est_prcl", "est_mich",
              "est_v_prcl", "est_v_mich", "f_prcl", "f_mich", "pop_dc"});
  const auto& tr = run.trajectory;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const auto& s = tr.states[i];
    const auto& e = run.estimates[i];
    const std::array<double, 13> row{tr.t[i],         s.dl_prcl,       s.dl_mich,       s.v_prcl,
                                     s.v_mich,        e.valid ? 1.0 : 0.0, e.position[0], e.position[1],
                                     e.velocity[0],   e.velocity[1],   tr.forces[i][0], tr.forces[i][1],
                                     run.signals[i].pop_dc};
    csv.row(row);
  }
}

void write_lock_reports_json(const std::string& path, const std::vector<LockReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  std::size_t locked = 0;
  for (const auto& r : reports) {
    if (r.locked) ++locked;
    arr.push_back({{"seed", r.seed},
                   {"mode", to_string(r.mode)},
                   {"locked", r.locked},
                   {"time_to_lock", std::isfinite(r.time_to_lock) ? nlohmann::json(r.time_to_lock)
                                                                  : nlohmann::json(nullptr)},
                   {"peak_force", r.peak_force},
                   {"duty", r.duty},
                   {"residual_rms", r.residual_rms},
                   {"engagements", r.engagements},
                   {"final_shift_changes", r.final_shift_changes}});
  }
  const nlohmann::json doc = {{"runs", arr}, {"locked", locked}, {"total", reports.size()}};
  std::ofstream f(path);
  if (!f) throw FormatError("cannot write " + path);
  f << doc.dump(2) << '\n';
}

}  // namespace prmi::control
