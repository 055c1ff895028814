#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "prmi/errors.hpp"
#include "prmi/optics.hpp"

namespace prmi::optics {
namespace {

TEST(Optics, MatchesRoundTripOracleAtRandomStates) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pos(-2e-6, 2e-6);
  std::uniform_real_distribution<double> phase(-3.0, 3.0);
  OpticalConfig cfg;
  double worst = 0.0;
  for (int n = 0; n < 300; ++n) {
    cfg.demod_phase_45 = n % 2 ? phase(rng) : 0.0;
    cfg.demod_phase_90 = n % 3 ? phase(rng) : 0.0;
    const DofState s{pos(rng), pos(rng), 0.0, 0.0};
    worst = std::max(worst, oracle::max_relative_error(optical_signals(s, cfg), oracle::brute_force_signals(s, cfg)));
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(Optics, OperatingPointIsCarrierResonanceOnDarkFringe) {
  const OpticalConfig cfg;
  const auto s0 = optical_signals({}, cfg);
  EXPECT_NEAR(s0.pop_dc, oracle::brute_force_signals({}, cfg).pop_dc, 1e-9 * s0.pop_dc);
  for (double dx : {-2e-9, 2e-9, 1e-8}) {
    EXPECT_LT(optical_signals({dx, 0.0, 0.0, 0.0}, cfg).pop_dc, s0.pop_dc);
    EXPECT_GT(optical_signals({0.0, dx, 0.0, 0.0}, cfg).as_dc, s0.as_dc);
  }
}

TEST(Optics, DoublePassPhase) {
  const OpticalConfig cfg;
  const auto p = propagation_phases({0.0, cfg.lambda / 8.0, 0.0, 0.0}, cfg, Sideband::kCarrier);
  EXPECT_NEAR(p.phi_mich, M_PI / 2.0, 1e-12);
  EXPECT_EQ(p.phi_prc, 0.0);
  const auto u = propagation_phases({}, cfg, Sideband::kUpper);
  const auto l = propagation_phases({}, cfg, Sideband::kLower);
  EXPECT_NEAR(u.phi_prc, -l.phi_prc, 1e-15);
  EXPECT_NEAR(u.phi_prc, 2 * M_PI * cfg.f_mod / cfg.c * cfg.l_prc_macro, 1e-12);
}

TEST(Optics, LosslessMichelsonConservesEnergy) {
  OpticalConfig cfg;
  cfg.r_x = cfg.r_y = 1.0;
  for (double phi : {0.0, 0.3, 1.2, -2.0}) {
    const auto m = michelson_coefficients({phi, 0.0, Sideband::kCarrier}, cfg);
    EXPECT_NEAR(std::norm(m.r_mich) + std::norm(m.t_mich), 1.0, 1e-12);
  }
}

TEST(Optics, OpaqueMichelsonRemovesCavityTerm) {
  OpticalConfig cfg;
  cfg.r_x = cfg.r_y = 0.0;
  const Complex in{0.8, 0.1};
  const auto f = port_fields({0.3, 0.1, Sideband::kCarrier}, cfg, in);
  EXPECT_EQ(f.r_mich, Complex(0.0, 0.0));
  EXPECT_NEAR(std::abs(f.psi_ref - Complex(0.0, cfg.r_pr) * in), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(f.psi_prc - cfg.t_pr * in), 0.0, 1e-15);
  EXPECT_EQ(f.psi_ap, Complex(0.0, 0.0));
}

TEST(Optics, AntisymmetricFieldIsPickoffTimesMichelsonTransmission) {
  const OpticalConfig cfg;
  const PropagationPhases ph{0.2, 0.1, Sideband::kCarrier};
  const auto f = port_fields(ph, cfg, Complex{1.0, 0.0});
  const Complex expect = Complex(0.0, 1.0) * f.t_mich * std::exp(Complex(0.0, 0.1)) * f.psi_prc;
  EXPECT_NEAR(std::abs(f.psi_ap - expect), 0.0, 1e-14);
}

TEST(Optics, SidebandAmplitudesFollowBessel) {
  OpticalConfig cfg;
  cfg.mod_depth = 0.0;
  const auto t0 = input_field_amplitudes(cfg);
  EXPECT_EQ(t0.carrier, Complex(1.0, 0.0));
  EXPECT_EQ(t0.upper, Complex(0.0, 0.0));
  cfg.mod_depth = 0.3;
  const auto t = input_field_amplitudes(cfg);
  EXPECT_NEAR(t.upper.real(), 0.148318816273104, 1e-12);
  EXPECT_EQ(t.lower, -t.upper);
}

TEST(Optics, DemodulateOfPureCarrierIsDcOnly) {
  const OpticalConfig cfg;
  const auto d = demodulate({Complex{2.0, 1.0}, {}, {}}, cfg);
  EXPECT_DOUBLE_EQ(d.dc, 5.0);
  EXPECT_EQ(d.i45, 0.0);
  EXPECT_EQ(d.q90, 0.0);
}

TEST(Optics, DemodulationPhaseRotatesIQ) {
  OpticalConfig cfg;
  const FieldTriplet t{Complex{1.0, 0.2}, Complex{0.1, 0.3}, Complex{-0.2, 0.05}};
  const auto a = demodulate(t, cfg);
  cfg.demod_phase_45 = M_PI / 2;
  const auto b = demodulate(t, cfg);
  EXPECT_NEAR(b.i45, a.q45, 1e-14);
  EXPECT_NEAR(b.q45, -a.i45, 1e-14);
  EXPECT_NEAR(std::hypot(a.i90, a.q90), std::hypot(b.i90, b.q90), 1e-14);
}

TEST(Optics, PrcLinewidthNearSevenNanometres) {
  const double w = prc_linewidth(OpticalConfig{});
  EXPECT_GT(w, 7e-9 * 0.8);
  EXPECT_LT(w, 7e-9 * 1.2);
}

TEST(Optics, LinewidthAgreesWithFinesse) {
  OpticalConfig cfg;
  cfg.r_x = cfg.r_y = 1.0;
  cfg.set_lossless_prm(0.98);
  const double rr = cfg.r_pr;
  const double finesse = M_PI * std::sqrt(rr) / (1.0 - rr);
  EXPECT_NEAR(prc_linewidth(cfg), (cfg.lambda / 4.0) / finesse, 0.02 * (cfg.lambda / 4.0) / finesse);
}

TEST(Optics, CalibrateRprHitsTarget) {
  OpticalConfig cfg;
  cfg.set_lossless_prm(calibrate_r_pr(cfg, 5e-9));
  EXPECT_NEAR(prc_linewidth(cfg), 5e-9, 1e-12);
}

TEST(Optics, ValidateRejectsUnphysicalValues) {
  auto bad = [](auto mutate) {
    OpticalConfig c;
    mutate(c);
    return c;
  };
  EXPECT_NO_THROW(OpticalConfig{}.validate());
  EXPECT_THROW(bad([](auto& c) { c.lambda = 0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.r_x = 1.2; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.r_pr = 0.9; c.t_pr = 0.9; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.mod_depth = -1; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.f_mod = NAN; }).validate(), ConfigError);
}

TEST(Optics, DegenerateResonatorThrows) {
  OpticalConfig cfg;
  cfg.r_x = cfg.r_y = 1.0;
  cfg.r_pr = 1.0;
  cfg.t_pr = 0.0;
  EXPECT_THROW(port_fields({0.0, 0.0, Sideband::kCarrier}, cfg, Complex{1.0, 0.0}), NumericalError);
}

TEST(Optics, SignalArrayRoundTrip) {
  std::array<double, kNumSignals> a{};
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<double>(i) + 0.5;
  EXPECT_EQ(OpticalSignals::from_array(a).to_array(), a);
  EXPECT_EQ(kSignalNames[7], "pop_45_q");
}


TEST(Optics, DemodulateMatchesSampledPowerOnRandomTriplets) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  OpticalConfig cfg;
  for (int n = 0; n < 1000; ++n) {
    cfg.demod_phase_45 = 3 * u(rng);
    cfg.demod_phase_90 = 3 * u(rng);
    const FieldTriplet t{{u(rng), u(rng)}, {u(rng), u(rng)}, {u(rng), u(rng)}};
    const auto d = demodulate(t, cfg);
    const int m = 64;
    double dc = 0, i1 = 0, q1 = 0, i2 = 0, q2 = 0;
    for (int k = 0; k < m; ++k) {
      const double th = 2 * M_PI * k / m;
      const double p = std::norm(t.carrier + t.upper * std::polar(1.0, th) + t.lower * std::polar(1.0, -th));
      dc += p / m;
      i1 += 2 * p * std::cos(th + cfg.demod_phase_45) / m;
      q1 -= 2 * p * std::sin(th + cfg.demod_phase_45) / m;
      i2 += 2 * p * std::cos(2 * th + cfg.demod_phase_90) / m;
      q2 -= 2 * p * std::sin(2 * th + cfg.demod_phase_90) / m;
    }
    const double tol = 1e-10 * dc;
    EXPECT_NEAR(d.dc, dc, tol);
    EXPECT_NEAR(d.i45, i1, tol);
    EXPECT_NEAR(d.q45, q1, tol);
    EXPECT_NEAR(d.i90, i2, tol);
    EXPECT_NEAR(d.q90, q2, tol);
  }
}

TEST(Optics, CarrierPhaseIndependentOfModulationFrequency) {
  OpticalConfig a, b;
  b.f_mod = 9e6;
  const DofState s{3e-8, -5e-8, 0, 0};
  EXPECT_EQ(propagation_phases(s, a, Sideband::kCarrier).phi_prc, propagation_phases(s, b, Sideband::kCarrier).phi_prc);
  const auto c = propagation_phases(s, a, Sideband::kCarrier);
  const auto u = propagation_phases(s, a, Sideband::kUpper);
  const auto l = propagation_phases(s, a, Sideband::kLower);
  EXPECT_NEAR(u.phi_mich - c.phi_mich, c.phi_mich - l.phi_mich, 1e-12);
}

TEST(Optics, SymmetricLosslessMichelsonIsDarkForCarrier) {
  OpticalConfig cfg;
  cfg.r_x = cfg.r_y = 1.0;
  const auto f = port_fields({0.0, 0.1, Sideband::kCarrier}, cfg, Complex{1.0, 0.0});
  EXPECT_EQ(std::abs(f.psi_ap), 0.0);
}

TEST(Optics, PowersAreNonNegative) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1e-6, 1e-6);
  const OpticalConfig cfg;
  for (int n = 0; n < 200; ++n) {
    const auto s = optical_signals({u(rng), u(rng), 0, 0}, cfg);
    EXPECT_GE(s.as_dc, 0.0);
    EXPECT_GE(s.pop_dc, 0.0);
  }
}

TEST(Optics, OperatingPointIsGlobalMaximumOfPopDc) {
  const OpticalConfig cfg;
  const double peak = optical_signals({}, cfg).pop_dc;
  const double q = cfg.lambda / 4;
  for (int i = -40; i < 40; ++i) {
    for (int j = -40; j < 40; ++j) {
      const double z1 = q * i / 40.0, z2 = q * j / 40.0;
      const DofState s{(z1 + z2) / 4, (z1 - z2) / 2, 0, 0};
      if (i == 0 && j == 0) continue;
      EXPECT_LT(optical_signals(s, cfg).pop_dc, peak);
    }
  }
}

TEST(Optics, WeakRecyclingMirrorGivesBroadResonance) {
  OpticalConfig cfg;
  cfg.set_lossless_prm(0.2);
  EXPECT_GT(prc_linewidth(cfg), cfg.lambda / 8);
  cfg.set_lossless_prm(0.05);  // power never halves
  EXPECT_THROW(prc_linewidth(cfg), NumericalError);
}

TEST(Optics, EndToEndExampleState) {
  const OpticalConfig cfg;
  const DofState s{50e-9, 120e-9, 0, 0};
  EXPECT_LT(oracle::max_relative_error(optical_signals(s, cfg), oracle::brute_force_signals(s, cfg)), 1e-10);
}

}  // namespace
}  // namespace prmi::optics
