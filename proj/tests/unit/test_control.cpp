#include <gtest/gtest.h>

#include <cmath>

#include "prmi/control.hpp"
#include "prmi/errors.hpp"
#include "prmi/lock.hpp"
#include "prmi/wrapping.hpp"

namespace prmi::control {
namespace {

constexpr double kLambda = 1.064e-6;
constexpr double kDt = 1.0 / 2048.0;

dynamics::StateEstimate est(double x0, double x1, double v0, double v1) {
  return {true, {x0, x1}, {v0, v1}};
}

TEST(Ramp, PiecewiseLinear) {
  EXPECT_EQ(ramp(0.5, 1.0, 2.0), 0.0);
  EXPECT_EQ(ramp(1.0, 1.0, 2.0), 0.0);
  EXPECT_DOUBLE_EQ(ramp(2.0, 1.0, 2.0), 0.5);
  EXPECT_EQ(ramp(3.5, 1.0, 2.0), 1.0);
  EXPECT_THROW(ramp(1.0, 0.0, 0.0), ConfigError);
}

TEST(OperatingPoint, NearestGridTranslateOfOrigin) {
  const auto g = wrapping::from_z({3 * kLambda / 2, -kLambda / 2});
  const auto p = nearest_operating_point({g.dl_prcl + 1e-8, g.dl_mich - 2e-8}, kLambda);
  EXPECT_NEAR(p[0], g.dl_prcl, 1e-20);
  EXPECT_NEAR(p[1], g.dl_mich, 1e-20);
  const auto o = nearest_operating_point({1e-9, -1e-9}, kLambda);
  EXPECT_EQ(o[0], 0.0);
}

TEST(TwoStage, OnlyDampingBeforeIntegratorRamp) {
  LockConfig cfg;
  TwoStageController c(cfg, kLambda, kDt);
  EXPECT_EQ(c(0.5, est(1e-7, 0, 1e-5, 0))[0], 0.0);
  const auto f = c(2.0, est(1e-7, 0, 1e-5, -2e-5));
  EXPECT_NEAR(f[0], -0.5 * 450 * 1e-5, 1e-15);
  EXPECT_NEAR(f[1], 0.5 * 450 * 2e-5, 1e-15);
  EXPECT_FALSE(c.target_latched());
}

TEST(TwoStage, LatchesTargetAndAppliesPi) {
  LockConfig cfg;
  TwoStageController c(cfg, kLambda, kDt);
  const auto g = wrapping::from_z({kLambda / 2, 0.0});
  const double x = g.dl_prcl + 2e-9;
  const auto f = c(5.0, est(x, g.dl_mich, 0, 0));
  ASSERT_TRUE(c.target_latched());
  EXPECT_NEAR(c.target()[0], g.dl_prcl, 1e-20);
  const double ri = 0.5;
  const double err = x - g.dl_prcl;
  EXPECT_NEAR(f[0], -ri * (1e5 * err + 2e6 * err * kDt), 1e-15);
  // A later estimate in another cell does not move the target.
  c(5.1, est(x + kLambda / 2, 0, 0, 0));
  EXPECT_NEAR(c.target()[0], g.dl_prcl, 1e-20);
}

TEST(TwoStage, ClampHoldsIntegrator) {
  LockConfig cfg;
  cfg.force_clamp = 1e-4;
  TwoStageController c(cfg, kLambda, kDt);
  const auto f = c(7.0, est(1e-7, 0, 0, 0));
  EXPECT_EQ(f[0], -1e-4);
  EXPECT_EQ(c.integral()[0], 0.0);
  c(7.1, est(1e-12, 0, 0, 0));
  EXPECT_NEAR(c.integral()[0], 1e-12 * kDt, 1e-30);
}

TEST(TwoStage, InvalidEstimateGivesZeroForce) {
  TwoStageController c(LockConfig{}, kLambda, kDt);
  EXPECT_EQ(c(10.0, dynamics::StateEstimate{}), (dynamics::Force{0, 0}));
}

TEST(TwoStage, ConfigValidation) {
  LockConfig c;
  c.int_start = 0.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = LockConfig{};
  c.prop_gain = -1;
  EXPECT_THROW(TwoStageController(c, kLambda, kDt), ConfigError);
  EXPECT_THROW(TwoStageController(LockConfig{}, 0.0, kDt), ConfigError);
}

TEST(Sensing, InverseRecoversSmallDisplacements) {
  const optics::OpticalConfig o;
  const auto m = measure_sensing_matrix(o);
  EXPECT_NE(m.channels[0], m.channels[1]);
  for (const auto& d : {std::array<double, 2>{1e-11, 0}, {0, -1e-11}, {2e-11, 1e-11}}) {
    const auto e = m.error(optics::optical_signals({d[0], d[1], 0, 0}, o));
    EXPECT_NEAR(e[0], d[0], 1e-3 * 2e-11);
    EXPECT_NEAR(e[1], d[1], 1e-3 * 2e-11);
  }
  const auto z = m.error(optics::optical_signals({}, o));
  EXPECT_NEAR(z[0], 0.0, 1e-25);
}

TEST(Classical, TriggerAndReleaseHysteresis) {
  const optics::OpticalConfig o;
  const double peak = peak_pop_dc(o);
  ClassicalController c(ClassicalConfig{}, measure_sensing_matrix(o), peak, kDt);
  auto sig = optics::optical_signals({}, o);
  sig.pop_dc = 0.4 * peak;
  EXPECT_EQ(c(sig), (dynamics::Force{0, 0}));
  EXPECT_FALSE(c.engaged());
  sig.pop_dc = 0.6 * peak;
  c(sig);
  EXPECT_TRUE(c.engaged());
  sig.pop_dc = 0.3 * peak;  // between release and trigger: stays on
  c(sig);
  EXPECT_TRUE(c.engaged());
  sig.pop_dc = 0.1 * peak;
  c(sig);
  EXPECT_FALSE(c.engaged());
  sig.pop_dc = 0.9 * peak;
  c(sig);
  EXPECT_EQ(c.engagements(), 2u);
}

TEST(Classical, ForceOpposesErrorAndIsClamped) {
  const optics::OpticalConfig o;
  ClassicalConfig cfg;
  cfg.deriv_gain = 0;
  ClassicalController c(cfg, measure_sensing_matrix(o), peak_pop_dc(o), kDt);
  const auto f = c(optics::optical_signals({1e-10, 0, 0, 0}, o));
  EXPECT_LT(f[0], 0.0);
  EXPECT_NEAR(f[0], -2e6 * 1e-10, 1e-6);
  const auto g = c(optics::optical_signals({1e-9, -1e-9, 0, 0}, o));
  EXPECT_LE(std::abs(g[0]), cfg.force_clamp);
}

TEST(Classical, ConfigValidation) {
  ClassicalConfig c;
  c.release_fraction = 0.8;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ClassicalConfig{};
  EXPECT_THROW(ClassicalController(c, SensingMatrix{}, 0.0, kDt), ConfigError);
}

dynamics::ClosedLoopRun synthetic_run(double seconds, double lock_from, double peak) {
  dynamics::ClosedLoopRun run;
  const auto n = static_cast<std::size_t>(seconds * 2048);
  run.trajectory.sample_rate = 2048;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = i / 2048.0;
    run.trajectory.t.push_back(t);
    run.trajectory.states.push_back({t >= lock_from ? 1e-9 : 2e-7, 0, 0, 0});
    run.trajectory.forces.push_back({i == 10 ? -0.02 : 0.0, 0.0});
    optics::OpticalSignals s;
    s.pop_dc = t >= lock_from ? peak : 0.1 * peak;
    run.signals.push_back(s);
  }
  return run;
}

TEST(LockEvaluation, LockedRun) {
  const auto run = synthetic_run(12, 3.0, 20.0);
  const auto r = evaluate_lock(run, 20.0, kLambda, LockCriteria{});
  EXPECT_TRUE(r.locked);
  EXPECT_DOUBLE_EQ(r.duty, 1.0);
  EXPECT_DOUBLE_EQ(r.time_to_lock, 3.0);
  EXPECT_DOUBLE_EQ(r.peak_force, 0.02);
  EXPECT_NEAR(r.residual_rms[0], 1e-9, 1e-18);
}

TEST(LockEvaluation, LateLockFailsDutyAndReportsNan) {
  const auto run = synthetic_run(12, 8.5, 20.0);
  const auto r = evaluate_lock(run, 20.0, kLambda, LockCriteria{});
  EXPECT_FALSE(r.locked);
  EXPECT_NEAR(r.duty, 3.5 / 5.0, 1e-3);
  EXPECT_TRUE(std::isnan(r.time_to_lock));
  EXPECT_THROW(evaluate_lock(synthetic_run(2, 0, 20.0), 20.0, kLambda, LockCriteria{}), ConfigError);
}

TEST(LockModes, ParseAndPrint) {
  for (auto m : {LockMode::kPerfect, LockMode::kNeural, LockMode::kClassical}) {
    EXPECT_EQ(parse_lock_mode(to_string(m)), m);
  }
  EXPECT_THROW(parse_lock_mode("fancy"), ConfigError);
  EXPECT_EQ(default_duration(LockMode::kClassical), 60.0);
}

TEST(LockModes, NeuralModeRequiresModels) {
  EXPECT_THROW(run_lock(LockMode::kNeural, 1, 6.0, {}, {}, {}, {}, {}, nullptr), ConfigError);
}

TEST(LockModes, PerfectStateLocksOneSeed) {
  const auto r = run_lock(LockMode::kPerfect, 3, 12.0, {}, {}, {}, {}, {});
  EXPECT_TRUE(r.report.locked);
  EXPECT_LT(r.report.residual_rms[0], 1e-9);
  EXPECT_LE(r.report.peak_force, LockConfig{}.force_clamp);
}

}  // namespace
}  // namespace prmi::control
