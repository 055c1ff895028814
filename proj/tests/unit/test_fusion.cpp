#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "prmi/errors.hpp"
#include "prmi/fusion.hpp"
#include "prmi/wrapping.hpp"

namespace prmi::fusion {
namespace {

constexpr double kLambda = 1.064e-6;

dataset::NormalizationConstants unit_norms() {
  dataset::NormalizationConstants n;
  n.signal_max_abs.fill(1.0);
  n.pos_scale = kLambda / 4;
  n.vel_scale = 2 * kLambda;
  return n;
}

Vec2 wrapped(const Vec2& p) {
  const auto w = wrapping::wrap(p[0], p[1], kLambda);
  return {w.wrapped.dl_prcl, w.wrapped.dl_mich};
}

TEST(Propagate, ConstantVelocityPrediction) {
  FilterConfig cfg;
  FilterState s;
  s.p_star = {1e-7, -2e-7};
  s.sigma_p = {1e-18, 2e-18};
  s.v_est = {kLambda, 0.0};
  s.sigma_v = {1e-12, 4e-12};
  const auto p = propagate(s, cfg);
  EXPECT_NEAR(p.mu_hat[0], 1e-7 + kLambda / 2048, 1e-22);
  EXPECT_EQ(p.mu_hat[1], -2e-7);
  EXPECT_NEAR(p.sigma_hat[1], 2e-18 + 4e-12 / (2048.0 * 2048.0), 1e-30);
  EXPECT_GE(p.sigma_hat[0], s.sigma_p[0]);
}

TEST(Candidates, GridAroundPrediction) {
  FilterConfig cfg;
  const Vec2 w{1e-8, 3e-8};
  const Vec2 mu_hat{2.3e-6, -0.4e-6};
  const auto c = candidates(w, mu_hat, cfg);
  ASSERT_EQ(c.size(), 25u);
  const auto zw = wrapping::to_z(w[0], w[1]);
  for (const auto& k : c) {
    const auto z = wrapping::to_z(k.mu[0], k.mu[1]);
    const double n1 = (z.z1 - zw.z1) / (kLambda / 2), n2 = (z.z2 - zw.z2) / (kLambda / 2);
    EXPECT_NEAR(n1, k.shift[0], 1e-9);
    EXPECT_NEAR(n2, k.shift[1], 1e-9);
    EXPECT_LE(std::abs(k.offset[0]), 2);
  }
  // Centre candidate is the copy of w nearest mu_hat in Z.
  const auto& centre = c[12];
  EXPECT_EQ(centre.offset, (std::array<int, 2>{0, 0}));
  const auto zc = wrapping::to_z(centre.mu[0], centre.mu[1]);
  const auto zh = wrapping::to_z(mu_hat[0], mu_hat[1]);
  EXPECT_LE(std::abs(zc.z1 - zh.z1), kLambda / 4 + 1e-15);
  EXPECT_LE(std::abs(zc.z2 - zh.z2), kLambda / 4 + 1e-15);
}

TEST(Candidates, SymmetricAboutCentredPrediction) {
  const auto c = candidates({0.0, 0.0}, {0.0, 0.0}, FilterConfig{});
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_NEAR(c[i].mu[0], -c[c.size() - 1 - i].mu[0], 1e-20);
    EXPECT_NEAR(c[i].mu[1], -c[c.size() - 1 - i].mu[1], 1e-20);
  }
}

TEST(Fuse, EqualTrustAveragesAndBothCovarianceForms) {
  Prediction pred{{1.0, 2.0}, {4.0, 4.0}};
  const auto t = fuse({3.0, 2.0}, pred, {4.0, 4.0}, CovarianceUpdate::kTextbook);
  EXPECT_DOUBLE_EQ(t.gain[0], 0.5);
  EXPECT_DOUBLE_EQ(t.mean[0], 2.0);
  EXPECT_DOUBLE_EQ(t.mean[1], 2.0);
  EXPECT_DOUBLE_EQ(t.cov[0], 2.0);
  const auto p = fuse({3.0, 2.0}, Prediction{{0, 0}, {1.0, 3.0}}, {3.0, 1.0}, CovarianceUpdate::kPaperLiteral);
  EXPECT_DOUBLE_EQ(p.gain[0], 0.25);
  EXPECT_DOUBLE_EQ(p.cov[0], (1.0 + 0.25 * (3.0 - 1.0)) * 0.25);
  EXPECT_DOUBLE_EQ(p.cov[1], (3.0 + 0.75 * (1.0 - 3.0)) * 0.75);
}

TEST(Fuse, GainInUnitIntervalAndCovariancePositive) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-20, -12);  // (0.1 nm)^2 .. (1 um)^2
  for (int n = 0; n < 200; ++n) {
    const Prediction pred{{0, 0}, {std::pow(10, u(rng)), std::pow(10, u(rng))}};
    const Vec2 var{std::pow(10, u(rng)), std::pow(10, u(rng))};
    for (auto mode : {CovarianceUpdate::kPaperLiteral, CovarianceUpdate::kTextbook}) {
      const auto f = fuse({1e-8, 1e-8}, pred, var, mode);
      for (int d = 0; d < 2; ++d) {
        EXPECT_GT(f.gain[d], 0.0);
        EXPECT_LT(f.gain[d], 1.0);
        EXPECT_GT(f.cov[d], 0.0);
      }
    }
  }
}

TEST(LogScore, GaussianDensity) {
  const Prediction pred{{0.0, 1.0}, {1.0, 2.0}};
  const double s = log_score({1.0, 1.0}, pred, {1.0, 2.0});
  EXPECT_NEAR(s, std::log(std::exp(-0.25) / std::sqrt(2 * M_PI * 2.0)) - 0.5 * std::log(2 * M_PI * 4.0), 1e-12);
  EXPECT_THROW(log_score({0, 0}, Prediction{{0, 0}, {0, 0}}, {0, 1}), NumericalError);
}

struct Case {
  FilterState state;
  Measurement m;
};

Case random_case(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-3e-6, 3e-6);
  std::uniform_real_distribution<double> lsig(std::log(2e-9), std::log(6e-8));
  std::normal_distribution<double> g(0.0, 1.0);
  Case c;
  c.state.p_star = {pos(rng), pos(rng)};
  c.state.v_est = {1e-5 * g(rng), 1e-5 * g(rng)};
  for (int d = 0; d < 2; ++d) {
    c.state.sigma_p[d] = std::pow(std::exp(lsig(rng)), 2);
    c.state.sigma_v[d] = std::pow(std::exp(lsig(rng)) * 2048, 2);
    c.m.var_p[d] = std::pow(std::exp(lsig(rng)), 2);
    c.m.var_v[d] = 1e-12;
    c.m.mu_v[d] = 1e-6 * g(rng);
  }
  const Vec2 truth{c.state.p_star[0] + 4e-8 * g(rng), c.state.p_star[1] + 4e-8 * g(rng)};
  c.m.mu_p = wrapped(truth);
  return c;
}

TEST(FuseAndSelect, MatchesExhaustiveGridSearch) {
  std::mt19937_64 rng(42);
  FilterConfig cfg;
  std::vector<Candidate> scratch;
  const double half = kLambda / 2;
  for (int n = 0; n < 1000; ++n) {
    const auto c = random_case(rng);
    SelectInfo info;
    const auto next = fuse_and_select(c.state, c.m, cfg, scratch, &info);

    // Exhaustive search over a window m_half + 2 wide, scored from scratch.
    const Vec2 mu_hat{c.state.p_star[0] + c.state.v_est[0] * cfg.dt, c.state.p_star[1] + c.state.v_est[1] * cfg.dt};
    Vec2 sh;
    for (int d = 0; d < 2; ++d) sh[d] = c.state.sigma_p[d] + c.state.sigma_v[d] * cfg.dt * cfg.dt;
    const auto zw = wrapping::to_z(c.m.mu_p[0], c.m.mu_p[1]);
    const auto zh = wrapping::to_z(mu_hat[0], mu_hat[1]);
    const int c1 = static_cast<int>(std::lround((zh.z1 - zw.z1) / half));
    const int c2 = static_cast<int>(std::lround((zh.z2 - zw.z2) / half));
    const int r = cfg.m_half + 2;
    double best = -INFINITY;
    std::array<int, 2> arg{};
    for (int a = c1 - r; a <= c1 + r; ++a) {
      for (int b = c2 - r; b <= c2 + r; ++b) {
        const double z1 = zw.z1 + a * half, z2 = zw.z2 + b * half;
        const double x[2] = {(z1 + z2) / 4, (z1 - z2) / 2};
        double score = 0;
        for (int d = 0; d < 2; ++d) {
          const double s = c.m.var_p[d] + sh[d];
          score += -0.5 * (x[d] - mu_hat[d]) * (x[d] - mu_hat[d]) / s - 0.5 * std::log(2 * M_PI * s);
        }
        if (score > best) {
          best = score;
          arg = {a, b};
        }
      }
    }
    ASSERT_EQ(next.shifts, arg) << "case " << n;
    EXPECT_FALSE(info.boundary_hit) << "case " << n;
    EXPECT_NEAR(next.log_score, best, 1e-9 * std::abs(best));
    EXPECT_EQ(next.v_est, c.m.mu_v);
    EXPECT_EQ(next.sigma_v, c.m.var_v);
  }
}

TEST(FuseAndSelect, CandidateAtPredictionWinsAndMeanIsPrediction) {
  FilterConfig cfg;
  FilterState s;
  s.p_star = {6e-7, -2e-7};
  s.sigma_p = {1e-16, 1e-16};
  s.sigma_v = {0, 0};
  Measurement m;
  m.mu_p = wrapped(s.p_star);
  m.var_p = {4e-16, 4e-16};
  m.var_v = {1e-12, 1e-12};
  std::vector<Candidate> scratch;
  const auto next = fuse_and_select(s, m, cfg, scratch);
  EXPECT_NEAR(next.p_star[0], s.p_star[0], 1e-18);
  EXPECT_NEAR(next.p_star[1], s.p_star[1], 1e-18);
}

TEST(FuseAndSelect, SensorDominatedLimit) {
  FilterConfig cfg;
  cfg.vel_sigma_inflation = 1e6;
  FilterState s;
  s.p_star = {1e-7, 1e-7};
  s.sigma_p = {1e-10, 1e-10};  // huge prediction uncertainty
  s.sigma_v = {1.0, 1.0};
  Measurement m;
  m.mu_p = {1.3e-7, 0.6e-7};
  m.var_p = {1e-20, 1e-20};
  m.var_v = {1e-12, 1e-12};
  std::vector<Candidate> scratch;
  const auto next = fuse_and_select(s, m, cfg, scratch);
  EXPECT_NEAR(next.p_star[0], 1.3e-7, 1e-15);
  EXPECT_NEAR(next.p_star[1], 0.6e-7, 1e-15);
}

TEST(FuseAndSelect, DynamicsDominatedLimit) {
  FilterConfig cfg;
  FilterState s;
  s.p_star = {1e-7, 1e-7};
  s.sigma_p = {1e-20, 1e-20};
  s.v_est = {1e-4, -1e-4};
  s.sigma_v = {0, 0};
  Measurement m;
  m.mu_p = {1.3e-7, 0.6e-7};
  m.var_p = {1e-8, 1e-8};  // model sigma far beyond a wavelength
  m.var_v = {1e-12, 1e-12};
  std::vector<Candidate> scratch;
  const auto next = fuse_and_select(s, m, cfg, scratch);
  EXPECT_NEAR(next.p_star[0], 1e-7 + 1e-4 * cfg.dt, 1e-17);
  EXPECT_NEAR(next.p_star[1], 1e-7 - 1e-4 * cfg.dt, 1e-17);
}

TEST(Filter, DenormalizeScalesAndInflates) {
  FilterConfig cfg;
  const auto m = denormalize({{0.5, -0.5}, {0.1, 0.2}}, {{0.25, 0}, {0.01, 0.02}}, unit_norms(), cfg);
  EXPECT_DOUBLE_EQ(m.mu_p[0], 0.5 * kLambda / 4);
  EXPECT_NEAR(m.var_p[1], std::pow(0.2 * kLambda / 4, 2), 1e-30);
  EXPECT_DOUBLE_EQ(m.mu_v[0], 0.25 * 2 * kLambda);
  EXPECT_NEAR(m.var_v[0], std::pow(15 * 0.01 * 2 * kLambda, 2), 1e-24);
  EXPECT_THROW(denormalize({{0, 0}, {0, 1}}, {{0, 0}, {1, 1}}, unit_norms(), cfg), NumericalError);
}

TEST(Filter, StationaryStateGivesConstantEstimate) {
  const Vec2 truth{2.1e-6, -1.3e-6};
  const auto w = wrapped(truth);
  UnwrappingFilter f(FilterConfig{}, unit_norms());
  const neural::GaussianEstimate pos{{w[0] / (kLambda / 4), w[1] / (kLambda / 4)}, {1e-3, 1e-3}};
  const neural::GaussianEstimate vel{{0, 0}, {1e-4, 1e-4}};
  f.update(pos, vel);
  const auto first = f.state();
  for (int i = 0; i < 200; ++i) f.update(pos, vel);
  EXPECT_NEAR(f.state().p_star[0], first.p_star[0], 1e-15);
  EXPECT_EQ(f.state().shifts, (std::array<int, 2>{0, 0}));
  EXPECT_EQ(f.boundary_hits(), 0u);
  EXPECT_EQ(f.continuity_violations(), 0u);
}

TEST(Filter, TracksMotionAcrossCells) {
  // Ideal models: wrapped truth and exact velocity; the filter must unwrap.
  UnwrappingFilter f(FilterConfig{}, unit_norms());
  const double v = 3e-6;  // m/s, crosses many cells in 1 s
  std::array<int, 2> last_shift{};
  for (int i = 0; i < 2048; ++i) {
    const Vec2 truth{v * i / 2048.0, -0.5 * v * i / 2048.0};
    const auto w = wrapped(truth);
    f.update({{w[0] / (kLambda / 4), w[1] / (kLambda / 4)}, {0.02, 0.02}},
             {{v / (2 * kLambda), -0.5 * v / (2 * kLambda)}, {1e-3, 1e-3}});
    const auto& s = f.state();
    if (i > 0) {
      EXPECT_NEAR(s.p_star[0], truth[0], 5e-9) << i;
      EXPECT_NEAR(s.p_star[1], truth[1], 5e-9) << i;
    }
    last_shift = s.shifts;
  }
  EXPECT_NE(last_shift, (std::array<int, 2>{0, 0}));
  EXPECT_EQ(f.continuity_violations(), 0u);
}

TEST(Filter, ConfigValidation) {
  FilterConfig c;
  c.m_half = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = FilterConfig{};
  c.dt = 0;
  EXPECT_THROW(UnwrappingFilter(c, unit_norms()), ConfigError);
}

TEST(Residuals, OffsetOnGridAndRms) {
  dynamics::Trajectory truth;
  FilterRun run;
  for (int i = 0; i < 100; ++i) {
    optics::DofState s{1e-7 * std::sin(i * 0.1), 2e-7 * std::cos(i * 0.1), 0, 0};
    truth.states.push_back(s);
    truth.t.push_back(i / 2048.0);
    const auto shifted = wrapping::shift_by_grid({s.dl_prcl, s.dl_mich}, 1, -2, kLambda);
    FilterRecord r;
    r.valid = i >= 10;
    r.state.p_star = {shifted.dl_prcl + (i % 2 ? 1e-9 : -1e-9), shifted.dl_mich};
    run.records.push_back(r);
  }
  const auto st = residual_stats(truth, run, kLambda);
  EXPECT_EQ(st.samples, 90u);
  EXPECT_NEAR(st.rms[0], 1e-9, 1e-12);
  EXPECT_NEAR(st.rms[1], 0.0, 1e-15);
  EXPECT_LT(st.grid_distance[0], 1e-12);
  EXPECT_LT(st.grid_distance[1], 1e-12);
  const auto off = wrapping::from_z({-1 * kLambda / 2, 2 * kLambda / 2});
  EXPECT_NEAR(st.offset[0], off.dl_prcl, 1e-12);
  EXPECT_NEAR(st.offset[1], off.dl_mich, 1e-12);
}

}  // namespace
}  // namespace prmi::fusion
