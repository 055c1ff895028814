#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <string_view>
#include <utility>

namespace prmi::optics {

using Complex = std::complex<double>;

/// Power-recycled Michelson parameters. Reflectivities and transmissivities
/// are amplitude coefficients. The default r_pr places the recycling-cavity
/// linewidth at about 7 nm of PRCL displacement.
struct OpticalConfig {
  double lambda = 1.064e-6;
  double f_mod = 45e6;
  double c = 299792458.0;
  double l_mich_macro = 0.08;
  double l_prc_macro = 57.65;
  double r_x = 0.993;
  double r_y = 0.993;
  double r_bs = 0.70710678118654752;
  double t_bs = 0.70710678118654752;
  double r_pr = 0.92719430082;
  double t_pr = 0.37458073699;
  double mod_depth = 0.3;
  double demod_phase_45 = 0.0;
  double demod_phase_90 = 0.0;

  /// Throws ConfigError when a physical constraint is violated.
  void validate() const;

  double wavenumber() const;
  double angular_mod_frequency() const;

  /// Lossless power-recycling mirror: t_pr = sqrt(1 - r_pr^2).
  void set_lossless_prm(double r);
};

/// Microscopic deviation of the two longitudinal degrees of freedom from the
/// operating point. Displacements are mirror displacements, so the light
/// picks up twice the displacement in every reflection.
struct DofState {
  double dl_prcl = 0.0;
  double dl_mich = 0.0;
  double v_prcl = 0.0;
  double v_mich = 0.0;
};

enum class Sideband : int { kLower = -1, kCarrier = 0, kUpper = 1 };

struct PropagationPhases {
  double phi_mich = 0.0;
  double phi_prc = 0.0;
  Sideband sideband = Sideband::kCarrier;
};

struct MichelsonCoefficients {
  Complex r_mich;
  Complex t_mich;
};

struct PortFields {
  Complex r_mich;
  Complex t_mich;
  Complex psi_prc;
  Complex psi_ref;
  Complex psi_ap;
};

struct FieldTriplet {
  Complex carrier;
  Complex upper;
  Complex lower;
};

enum class Port { kPrcPickoff, kAntisymmetric };

struct DemodulatedSignals {
  double dc = 0.0;
  double i45 = 0.0;
  double q45 = 0.0;
  double i90 = 0.0;
  double q90 = 0.0;
};

inline constexpr std::size_t kNumSignals = 10;

/// Canonical channel order used by every file and tensor in the project.
inline constexpr std::array<std::string_view, kNumSignals> kSignalNames = {
    "as_dc",  "as_45_i",  "as_45_q",  "as_90_i",  "as_90_q",
    "pop_dc", "pop_45_i", "pop_45_q", "pop_90_i", "pop_90_q"};

struct OpticalSignals {
  double as_dc = 0.0;
  double as_45_i = 0.0;
  double as_45_q = 0.0;
  double as_90_i = 0.0;
  double as_90_q = 0.0;
  double pop_dc = 0.0;
  double pop_45_i = 0.0;
  double pop_45_q = 0.0;
  double pop_90_i = 0.0;
  double pop_90_q = 0.0;

  std::array<double, kNumSignals> to_array() const;
  static OpticalSignals from_array(const std::array<double, kNumSignals>& a);
};

PropagationPhases propagation_phases(const DofState& state, const OpticalConfig& cfg,
                                     Sideband sideband);

MichelsonCoefficients michelson_coefficients(const PropagationPhases& phases,
                                             const OpticalConfig& cfg);

/// Fields at the recycling-cavity pick-off, reflection and anti-symmetric
/// ports for an input field psi_in. Throws NumericalError when the cavity
/// round-trip factor is within 1e-12 of one.
PortFields port_fields(const PropagationPhases& phases, const OpticalConfig& cfg,
                       Complex psi_in);

/// Input amplitudes of carrier, upper and lower sideband for a pure phase
/// modulation truncated at first order: J0(m), +J1(m), -J1(m).
FieldTriplet input_field_amplitudes(const OpticalConfig& cfg);

FieldTriplet field_triplet_at_port(const DofState& state, const OpticalConfig& cfg, Port port);

/// DC, f_mod and 2 f_mod components of P(t) = |c + e^{iWt} u + e^{-iWt} l|^2.
DemodulatedSignals demodulate(const FieldTriplet& triplet, const OpticalConfig& cfg);

OpticalSignals optical_signals(const DofState& state, const OpticalConfig& cfg);

/// Full width in dl_prcl over which pop_dc stays above half of its peak, with
/// MICH held on the dark fringe.
double prc_linewidth(const OpticalConfig& cfg);

/// r_pr (lossless PRM) giving the requested linewidth; bisection on prc_linewidth.
double calibrate_r_pr(OpticalConfig cfg, double target_linewidth);

}  // namespace prmi::optics
