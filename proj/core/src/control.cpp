#include "prmi/control.hpp"

#include <algorithm>
#include <cmath>

#include "prmi/errors.hpp"
#include "prmi/wrapping.hpp"

namespace prmi::control {

double ramp(double t, double start, double duration) {
  if (!(duration > 0.0)) throw ConfigError("ramp: duration must be > 0");
  if (t <= start) return 0.0;
  if (t >= start + duration) return 1.0;
  return (t - start) / duration;
}

void LockConfig::validate() const {
  if (damp_gain < 0.0 || prop_gain < 0.0 || int_gain < 0.0) {
    throw ConfigError("lock: gains must be >= 0");
  }
  if (!(damp_duration > 0.0) || !(int_duration > 0.0)) {
    throw ConfigError("lock: ramp durations must be > 0");
  }
  if (damp_start < 0.0 || int_start < damp_start) {
    throw ConfigError("lock: the damping ramp must start first");
  }
  if (!(force_clamp > 0.0)) throw ConfigError("lock: force_clamp must be > 0");
}

std::array<double, 2> nearest_operating_point(const std::array<double, 2>& position, double lambda) {
  const auto z = wrapping::to_z(position[0], position[1]);
  const double half = lambda / 2.0;
  const wrapping::ZCoords grid{std::round(z.z1 / half) * half, std::round(z.z2 / half) * half};
  const auto p = wrapping::from_z(grid);
  return {p.dl_prcl, p.dl_mich};
}

TwoStageController::TwoStageController(const LockConfig& cfg, double lambda, double dt)
    : cfg_(cfg), lambda_(lambda), dt_(dt) {
  cfg_.validate();
  if (!(lambda > 0.0) || !(dt > 0.0)) throw ConfigError("lock: lambda and dt must be > 0");
}

void TwoStageController::reset() {
  latched_ = false;
  target_ = {};
  integral_ = {};
}

dynamics::Force TwoStageController::operator()(double t, const dynamics::StateEstimate& est) {
  if (!est.valid) return {0.0, 0.0};
  const double rd = ramp(t, cfg_.damp_start, cfg_.damp_duration);
  const double ri = ramp(t, cfg_.int_start, cfg_.int_duration);
  if (ri > 0.0 && !latched_) {
    target_ = nearest_operating_point(est.position, lambda_);
    latched_ = true;
  }
  dynamics::Force f{};
  for (int d = 0; d < 2; ++d) {
    const double x = latched_ ? est.position[d] - target_[d] : 0.0;
    const double candidate_integral = ri > 0.0 ? integral_[d] + x * dt_ : integral_[d];
    double u = -rd * cfg_.damp_gain * est.velocity[d] -
               ri * (cfg_.prop_gain * x + cfg_.int_gain * candidate_integral);
    if (std::abs(u) > cfg_.force_clamp) {
      u = std::copysign(cfg_.force_clamp, u);
    } else {
      integral_[d] = candidate_integral;
    }
    f[d] = u;
  }
  return f;
}

std::array<double, 2> SensingMatrix::error(const optics::OpticalSignals& s) const {
  const auto a = s.to_array();
  const double e0 = a[channels[0]] - offset[0];
  const double e1 = a[channels[1]] - offset[1];
  return {inverse[0][0] * e0 + inverse[0][1] * e1, inverse[1][0] * e0 + inverse[1][1] * e1};
}

SensingMatrix measure_sensing_matrix(const optics::OpticalConfig& ocfg, double step) {
  if (!(step > 0.0)) throw ConfigError("sensing: step must be > 0");
  const auto at = [&](double p, double m) {
    optics::DofState s;
    s.dl_prcl = p;
    s.dl_mich = m;
    return optics::optical_signals(s, ocfg).to_array();
  };
  const auto zero = at(0.0, 0.0);
  const auto pp = at(step, 0.0), pm = at(-step, 0.0);
  const auto mp = at(0.0, step), mm = at(0.0, -step);
  std::array<std::array<double, 2>, optics::kNumSignals> jac{};
  for (std::size_t c = 0; c < optics::kNumSignals; ++c) {
    jac[c] = {(pp[c] - pm[c]) / (2 * step), (mp[c] - mm[c]) / (2 * step)};
  }
  // RF channels only; the DC channels are quadratic around the operating point.
  const std::array<std::size_t, 8> rf = {1, 2, 3, 4, 6, 7, 8, 9};
  double best = 0.0;
  SensingMatrix m;
  for (std::size_t i : rf) {
    for (std::size_t j : rf) {
      if (i == j) continue;
      const double det = jac[i][0] * jac[j][1] - jac[i][1] * jac[j][0];
      const double ni = std::hypot(jac[i][0], jac[i][1]);
      const double nj = std::hypot(jac[j][0], jac[j][1]);
      if (ni == 0.0 || nj == 0.0) continue;
      // Orientation quality times geometric-mean gain.
      const double score = std::abs(det) / (ni * nj) * std::sqrt(ni * nj);
      if (score > best) {
        best = score;
        m.channels = {i, j};
      }
    }
  }
  if (best == 0.0) throw NumericalError("sensing: no invertible channel pair at the operating point");
  const auto [i, j] = m.channels;
  m.offset = {zero[i], zero[j]};
  m.jacobian = {jac[i], jac[j]};
  const double det = jac[i][0] * jac[j][1] - jac[i][1] * jac[j][0];
  m.inverse = {{{jac[j][1] / det, -jac[i][1] / det}, {-jac[j][0] / det, jac[i][0] / det}}};
  return m;
}

void ClassicalConfig::validate() const {
  if (!(trigger_fraction > 0.0 && trigger_fraction < 1.0)) {
    throw ConfigError("classical: trigger_fraction must lie in (0, 1)");
  }
  if (!(release_fraction >= 0.0 && release_fraction <= trigger_fraction)) {
    throw ConfigError("classical: release_fraction must lie in [0, trigger_fraction]");
  }
  if (prop_gain < 0.0 || deriv_gain < 0.0) throw ConfigError("classical: gains must be >= 0");
  if (!(force_clamp > 0.0)) throw ConfigError("classical: force_clamp must be > 0");
}

ClassicalController::ClassicalController(const ClassicalConfig& cfg, const SensingMatrix& sensing,
                                         double peak_dc, double dt)
    : cfg_(cfg), sensing_(sensing), peak_dc_(peak_dc), dt_(dt) {
  cfg_.validate();
  if (!(peak_dc > 0.0) || !(dt > 0.0)) throw ConfigError("classical: peak_dc and dt must be > 0");
}

void ClassicalController::reset() {
  engaged_ = false;
  have_prev_ = false;
  engagements_ = 0;
  prev_error_ = {};
}

dynamics::Force ClassicalController::operator()(const optics::OpticalSignals& s) {
  if (!engaged_ && s.pop_dc > cfg_.trigger_fraction * peak_dc_) {
    engaged_ = true;
    have_prev_ = false;
    ++engagements_;
  } else if (engaged_ && s.pop_dc < cfg_.release_fraction * peak_dc_) {
    engaged_ = false;
  }
  if (!engaged_) return {0.0, 0.0};
  const auto e = sensing_.error(s);
  dynamics::Force f{};
  for (int d = 0; d < 2; ++d) {
    const double de = have_prev_ ? (e[d] - prev_error_[d]) / dt_ : 0.0;
    const double u = -(cfg_.prop_gain * e[d] + cfg_.deriv_gain * de);
    f[d] = std::clamp(u, -cfg_.force_clamp, cfg_.force_clamp);
  }
  prev_error_ = e;
  have_prev_ = true;
  return f;
}

}  // namespace prmi::control
