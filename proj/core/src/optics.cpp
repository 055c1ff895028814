#include "prmi/optics.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "prmi/errors.hpp"

namespace prmi::optics {

namespace {

constexpr Complex kI{0.0, 1.0};

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("optics: " + what);
}

bool unit_interval(double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; }

double pop_dc_at(double dl_prcl, const OpticalConfig& cfg) {
  return optical_signals(DofState{dl_prcl, 0.0, 0.0, 0.0}, cfg).pop_dc;
}

}  // namespace

void OpticalConfig::validate() const {
  require(std::isfinite(lambda) && lambda > 0.0, "lambda must be > 0");
  require(std::isfinite(f_mod) && f_mod > 0.0, "f_mod must be > 0");
  require(std::isfinite(c) && c > 0.0, "c must be > 0");
  require(std::isfinite(l_mich_macro) && std::isfinite(l_prc_macro), "macroscopic lengths must be finite");
  require(unit_interval(r_x) && unit_interval(r_y), "arm reflectivities must lie in [0,1]");
  require(unit_interval(r_bs) && unit_interval(t_bs), "beamsplitter coefficients must lie in [0,1]");
  require(unit_interval(r_pr) && unit_interval(t_pr), "PRM coefficients must lie in [0,1]");
  // Small slack so that sqrt(0.5)^2 * 2 does not trip the energy check.
  require(r_bs * r_bs + t_bs * t_bs <= 1.0 + 1e-12, "r_bs^2 + t_bs^2 must be <= 1");
  require(r_pr * r_pr + t_pr * t_pr <= 1.0 + 1e-12, "r_pr^2 + t_pr^2 must be <= 1");
  require(std::isfinite(mod_depth) && mod_depth >= 0.0, "mod_depth must be >= 0");
  require(std::isfinite(demod_phase_45) && std::isfinite(demod_phase_90), "demodulation phases must be finite");
}

double OpticalConfig::wavenumber() const { return 2.0 * std::numbers::pi / lambda; }

double OpticalConfig::angular_mod_frequency() const { return 2.0 * std::numbers::pi * f_mod; }

void OpticalConfig::set_lossless_prm(double r) {
  r_pr = r;
  t_pr = std::sqrt(std::max(0.0, 1.0 - r * r));
}

std::array<double, kNumSignals> OpticalSignals::to_array() const {
  return {as_dc, as_45_i, as_45_q, as_90_i, as_90_q, pop_dc, pop_45_i, pop_45_q, pop_90_i, pop_90_q};
}

OpticalSignals OpticalSignals::from_array(const std::array<double, kNumSignals>& a) {
  return {a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7], a[8], a[9]};
}

PropagationPhases propagation_phases(const DofState& state, const OpticalConfig& cfg,
                                     Sideband sideband) {
  const double k = cfg.wavenumber();
  const double index = static_cast<double>(static_cast<int>(sideband));
  const double omega_over_c = cfg.angular_mod_frequency() / cfg.c;
  PropagationPhases p;
  // Double pass: a mirror displacement dl changes the optical path by 2 dl.
  p.phi_mich = 2.0 * k * state.dl_mich + index * omega_over_c * cfg.l_mich_macro;
  p.phi_prc = 2.0 * k * state.dl_prcl + index * omega_over_c * cfg.l_prc_macro;
  p.sideband = sideband;
  return p;
}

MichelsonCoefficients michelson_coefficients(const PropagationPhases& phases,
                                             const OpticalConfig& cfg) {
  const Complex ep = std::exp(kI * phases.phi_mich);
  const Complex em = std::exp(-kI * phases.phi_mich);
  MichelsonCoefficients m;
  m.r_mich = cfg.r_x * cfg.t_bs * cfg.t_bs * ep + cfg.r_y * cfg.r_bs * cfg.r_bs * em;
  m.t_mich = cfg.t_bs * cfg.r_bs * (cfg.r_x * ep - cfg.r_y * em);
  return m;
}

PortFields port_fields(const PropagationPhases& phases, const OpticalConfig& cfg, Complex psi_in) {
  const auto [r_mich, t_mich] = michelson_coefficients(phases, cfg);
  const Complex round_trip = std::exp(2.0 * kI * phases.phi_prc);
  const Complex denom = 1.0 - cfg.r_pr * r_mich * round_trip;
  if (std::abs(denom) < 1e-12) {
    throw NumericalError("optics: degenerate resonator, |1 - r_pr r_mich e^{2i phi_prc}| < 1e-12");
  }
  PortFields f;
  f.r_mich = r_mich;
  f.t_mich = t_mich;
  f.psi_prc = cfg.t_pr / denom * psi_in;
  f.psi_ref = (kI * cfg.r_pr - kI * cfg.t_pr * cfg.t_pr * r_mich * round_trip) / denom * psi_in;
  f.psi_ap = kI * t_mich * cfg.t_pr * std::exp(kI * phases.phi_prc) / denom * psi_in;
  return f;
}

FieldTriplet input_field_amplitudes(const OpticalConfig& cfg) {
  const double j0 = std::cyl_bessel_j(0.0, cfg.mod_depth);
  const double j1 = std::cyl_bessel_j(1.0, cfg.mod_depth);
  return {Complex{j0, 0.0}, Complex{j1, 0.0}, Complex{-j1, 0.0}};
}

FieldTriplet field_triplet_at_port(const DofState& state, const OpticalConfig& cfg, Port port) {
  const FieldTriplet in = input_field_amplitudes(cfg);
  auto at_port = [&](Sideband sb, Complex psi_in) -> Complex {
    if (psi_in == Complex{}) return {};
    const PortFields f = port_fields(propagation_phases(state, cfg, sb), cfg, psi_in);
    return port == Port::kPrcPickoff ? f.psi_prc : f.psi_ap;
  };
  return {at_port(Sideband::kCarrier, in.carrier), at_port(Sideband::kUpper, in.upper),
          at_port(Sideband::kLower, in.lower)};
}

DemodulatedSignals demodulate(const FieldTriplet& triplet, const OpticalConfig& cfg) {
  const Complex& c0 = triplet.carrier;
  const Complex& up = triplet.upper;
  const Complex& lo = triplet.lower;
  const Complex s1 = 2.0 * (std::conj(c0) * up + std::conj(lo) * c0);
  const Complex s2 = 2.0 * std::conj(lo) * up;
  const Complex r1 = s1 * std::exp(-kI * cfg.demod_phase_45);
  const Complex r2 = s2 * std::exp(-kI * cfg.demod_phase_90);
  DemodulatedSignals d;
  d.dc = std::norm(c0) + std::norm(up) + std::norm(lo);
  d.i45 = r1.real();
  d.q45 = r1.imag();
  d.i90 = r2.real();
  d.q90 = r2.imag();
  return d;
}

OpticalSignals optical_signals(const DofState& state, const OpticalConfig& cfg) {
  const DemodulatedSignals as = demodulate(field_triplet_at_port(state, cfg, Port::kAntisymmetric), cfg);
  const DemodulatedSignals pop = demodulate(field_triplet_at_port(state, cfg, Port::kPrcPickoff), cfg);
  return {as.dc, as.i45, as.q45, as.i90, as.q90, pop.dc, pop.i45, pop.q45, pop.i90, pop.q90};
}

double prc_linewidth(const OpticalConfig& cfg) {
  cfg.validate();
  // One PRCL period is lambda/4; scan it for the resonance peak.
  const double half_period = cfg.lambda / 8.0;
  const int n_scan = 4000;
  double best_x = 0.0;
  double best_p = -1.0;
  for (int i = -n_scan; i <= n_scan; ++i) {
    const double x = half_period * i / n_scan;
    const double p = pop_dc_at(x, cfg);
    if (p > best_p) {
      best_p = p;
      best_x = x;
    }
  }
  // Golden-section refinement inside one scan step on each side.
  const double step = half_period / n_scan;
  double a = best_x - step;
  double b = best_x + step;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 80; ++it) {
    const double x1 = b - g * (b - a);
    const double x2 = a + g * (b - a);
    if (pop_dc_at(x1, cfg) > pop_dc_at(x2, cfg)) {
      b = x2;
    } else {
      a = x1;
    }
  }
  const double peak_x = 0.5 * (a + b);
  const double half = 0.5 * pop_dc_at(peak_x, cfg);

  auto crossing = [&](double direction) {
    double inside = peak_x;
    double outside = peak_x + direction * half_period;
    if (pop_dc_at(outside, cfg) >= half) {
      throw NumericalError("optics: no half-power crossing of pop_dc within one PRCL period");
    }
    for (int it = 0; it < 200 && std::abs(outside - inside) > 1e-18; ++it) {
      const double mid = 0.5 * (inside + outside);
      if (pop_dc_at(mid, cfg) >= half) {
        inside = mid;
      } else {
        outside = mid;
      }
    }
    return 0.5 * (inside + outside);
  };
  return crossing(+1.0) - crossing(-1.0);
}

double calibrate_r_pr(OpticalConfig cfg, double target_linewidth) {
  // Linewidth shrinks monotonically as r_pr grows.
  double lo = 0.5;
  double hi = 0.9999;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    cfg.set_lossless_prm(mid);
    if (prc_linewidth(cfg) > target_linewidth) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace prmi::optics
