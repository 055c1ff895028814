#include "prmi/fusion.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "prmi/csv.hpp"
#include "prmi/errors.hpp"
#include "prmi/wrapping.hpp"

namespace prmi::fusion {

void FilterConfig::validate() const {
  if (!(dt > 0.0)) throw ConfigError("filter: dt must be > 0");
  if (m_half < 1) throw ConfigError("filter: m_half must be >= 1");
  if (!(vel_sigma_inflation > 0.0)) throw ConfigError("filter: vel_sigma_inflation must be > 0");
  if (!(lambda > 0.0)) throw ConfigError("filter: lambda must be > 0");
}

Measurement denormalize(const neural::GaussianEstimate& pos, const neural::GaussianEstimate& vel,
                        const dataset::NormalizationConstants& norms, const FilterConfig& cfg) {
  Measurement m;
  for (int d = 0; d < 2; ++d) {
    if (!(pos.sigma[d] > 0.0) || !(vel.sigma[d] > 0.0)) {
      throw NumericalError("filter: model sigma must be > 0");
    }
    m.mu_p[d] = pos.mu[d] * norms.pos_scale;
    const double sp = pos.sigma[d] * norms.pos_scale;
    m.var_p[d] = sp * sp;
    m.mu_v[d] = vel.mu[d] * norms.vel_scale;
    const double sv = cfg.vel_sigma_inflation * vel.sigma[d] * norms.vel_scale;
    m.var_v[d] = sv * sv;
  }
  return m;
}

FilterState init(const neural::GaussianEstimate& pos, const neural::GaussianEstimate& vel,
                 const dataset::NormalizationConstants& norms, const FilterConfig& cfg) {
  const Measurement m = denormalize(pos, vel, norms, cfg);
  FilterState s;
  s.p_star = m.mu_p;
  s.sigma_p = m.var_p;
  s.v_est = m.mu_v;
  s.sigma_v = m.var_v;
  return s;
}

Prediction propagate(const FilterState& state, const FilterConfig& cfg) {
  Prediction p;
  for (int d = 0; d < 2; ++d) {
    p.mu_hat[d] = state.p_star[d] + state.v_est[d] * cfg.dt;
    p.sigma_hat[d] = state.sigma_p[d] + state.sigma_v[d] * cfg.dt * cfg.dt;
  }
  return p;
}

void candidates(const Vec2& wrapped_mu, const Vec2& mu_hat, const FilterConfig& cfg,
                std::vector<Candidate>& out) {
  const double half = cfg.lambda / 2.0;
  const auto zw = wrapping::to_z(wrapped_mu[0], wrapped_mu[1]);
  const auto zh = wrapping::to_z(mu_hat[0], mu_hat[1]);
  const int n1 = static_cast<int>(std::lround((zh.z1 - zw.z1) / half));
  const int n2 = static_cast<int>(std::lround((zh.z2 - zw.z2) / half));
  const int m = cfg.m_half;
  out.clear();
  for (int a = -m; a <= m; ++a) {
    for (int b = -m; b <= m; ++b) {
      const wrapping::ZCoords z{zw.z1 + (n1 + a) * half, zw.z2 + (n2 + b) * half};
      const auto p = wrapping::from_z(z);
      out.push_back({{p.dl_prcl, p.dl_mich}, {n1 + a, n2 + b}, {a, b}});
    }
  }
}

std::vector<Candidate> candidates(const Vec2& wrapped_mu, const Vec2& mu_hat, const FilterConfig& cfg) {
  std::vector<Candidate> out;
  candidates(wrapped_mu, mu_hat, cfg, out);
  return out;
}

double log_score(const Vec2& c, const Prediction& pred, const Vec2& var_p) {
  double maha = 0.0;
  double log_det = 0.0;
  for (int d = 0; d < 2; ++d) {
    const double s = var_p[d] + pred.sigma_hat[d];
    if (!(s > 0.0)) throw NumericalError("filter: singular innovation covariance");
    const double e = c[d] - pred.mu_hat[d];
    maha += e * e / s;
    log_det += std::log(2.0 * std::numbers::pi * s);
  }
  return -0.5 * maha - 0.5 * log_det;
}

Fused fuse(const Vec2& candidate, const Prediction& pred, const Vec2& var_p, CovarianceUpdate mode) {
  Fused f;
  for (int d = 0; d < 2; ++d) {
    const double a = pred.sigma_hat[d];
    const double k = a / (a + var_p[d]);
    const double one_minus_k = var_p[d] / (a + var_p[d]);
    f.gain[d] = k;
    f.mean[d] = pred.mu_hat[d] + k * (candidate[d] - pred.mu_hat[d]);
    f.cov[d] = mode == CovarianceUpdate::kPaperLiteral ? (a + k * (var_p[d] - a)) * k : one_minus_k * a;
  }
  return f;
}

FilterState fuse_and_select(const FilterState& state, const Measurement& m, const FilterConfig& cfg,
                            std::vector<Candidate>& scratch, SelectInfo* info) {
  const Prediction pred = propagate(state, cfg);
  candidates(m.mu_p, pred.mu_hat, cfg, scratch);
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scratch.size(); ++i) {
    const double s = log_score(scratch[i].mu, pred, m.var_p);
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  const Candidate& c = scratch[best];
  const Fused f = fuse(c.mu, pred, m.var_p, cfg.covariance_update);
  FilterState next;
  next.p_star = f.mean;
  next.sigma_p = f.cov;
  next.v_est = m.mu_v;
  next.sigma_v = m.var_v;
  next.shifts = c.shift;
  next.log_score = best_score;
  if (info) {
    info->winner = best;
    info->boundary_hit = std::abs(c.offset[0]) == cfg.m_half || std::abs(c.offset[1]) == cfg.m_half;
  }
  return next;
}

UnwrappingFilter::UnwrappingFilter(const FilterConfig& cfg, const dataset::NormalizationConstants& norms)
    : cfg_(cfg), norms_(norms) {
  cfg_.validate();
  norms_.validate();
  const auto n = static_cast<std::size_t>(2 * cfg_.m_half + 1);
  scratch_.reserve(n * n);
}

void UnwrappingFilter::reset() {
  initialized_ = false;
  state_ = {};
  boundary_hits_ = 0;
  continuity_violations_ = 0;
}

const FilterState& UnwrappingFilter::update(const neural::GaussianEstimate& pos,
                                            const neural::GaussianEstimate& vel) {
  if (!initialized_) {
    state_ = init(pos, vel, norms_, cfg_);
    initialized_ = true;
    return state_;
  }
  const Measurement m = denormalize(pos, vel, norms_, cfg_);
  SelectInfo info;
  const FilterState next = fuse_and_select(state_, m, cfg_, scratch_, &info);
  if (info.boundary_hit) ++boundary_hits_;
  for (int d = 0; d < 2; ++d) {
    if (std::abs(next.p_star[d] - state_.p_star[d]) >
        std::abs(state_.v_est[d]) * cfg_.dt + cfg_.lambda / 4.0) {
      ++continuity_violations_;
      break;
    }
  }
  state_ = next;
  return state_;
}

NeuralStateEstimator::NeuralStateEstimator(const neural::ModelWeights& position,
                                           const neural::ModelWeights& velocity,
                                           const dataset::NormalizationConstants& norms,
                                           const FilterConfig& cfg, std::size_t warmup_steps)
    : pos_model_(position),
      vel_model_(velocity),
      pos_state_(pos_model_.make_state()),
      vel_state_(vel_model_.make_state()),
      norms_(norms),
      filter_(cfg, norms),
      warmup_(warmup_steps) {
  if (position.spec.input_width != static_cast<int>(dataset::kChannels) ||
      velocity.spec.input_width != static_cast<int>(dataset::kChannels)) {
    throw ShapeMismatchError("estimator: models must take the ten optical channels");
  }
}

void NeuralStateEstimator::reset() {
  pos_model_.reset(pos_state_);
  vel_model_.reset(vel_state_);
  filter_.reset();
  steps_ = 0;
}

dynamics::StateEstimate NeuralStateEstimator::step(const optics::OpticalSignals& s) {
  norms_.normalize(s, input_);
  const auto& p = pos_model_.step(pos_state_, input_);
  const auto& v = vel_model_.step(vel_state_, input_);
  ++steps_;
  dynamics::StateEstimate e;
  if (steps_ < warmup_) return e;
  const FilterState& f = filter_.update(p, v);
  e.valid = true;
  e.position = f.p_star;
  e.velocity = f.v_est;
  return e;
}

FilterRun filter_run(const neural::ModelWeights& position, const neural::ModelWeights& velocity,
                     const std::vector<optics::OpticalSignals>& signals, double sample_rate,
                     const dataset::NormalizationConstants& norms, const FilterConfig& cfg,
                     std::size_t warmup_steps) {
  NeuralStateEstimator est(position, velocity, norms, cfg, warmup_steps);
  FilterRun run;
  run.records.reserve(signals.size());
  for (std::size_t i = 0; i < signals.size(); ++i) {
    const auto e = est.step(signals[i]);
    FilterRecord r;
    r.t = static_cast<double>(i) / sample_rate;
    r.valid = e.valid;
    if (e.valid) r.state = est.filter().state();
    run.records.push_back(r);
  }
  run.boundary_hits = est.filter().boundary_hits();
  run.continuity_violations = est.filter().continuity_violations();
  return run;
}

ResidualStats residual_stats(const dynamics::Trajectory& truth, const FilterRun& run, double lambda) {
  if (truth.size() != run.records.size()) throw IntegrityError("residual: length mismatch");
  ResidualStats r;
  Vec2 sum{};
  const std::array<int, 2>* prev = nullptr;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto& rec = run.records[i];
    if (!rec.valid) continue;
    sum[0] += truth.states[i].dl_prcl - rec.state.p_star[0];
    sum[1] += truth.states[i].dl_mich - rec.state.p_star[1];
    if (prev && *prev != rec.state.shifts) ++r.shift_changes;
    prev = &rec.state.shifts;
    ++r.samples;
  }
  if (r.samples == 0) throw ConfigError("residual: no valid estimates");
  const double n = static_cast<double>(r.samples);
  r.offset = {sum[0] / n, sum[1] / n};
  Vec2 sq{};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto& rec = run.records[i];
    if (!rec.valid) continue;
    const double e0 = truth.states[i].dl_prcl - rec.state.p_star[0] - r.offset[0];
    const double e1 = truth.states[i].dl_mich - rec.state.p_star[1] - r.offset[1];
    sq[0] += e0 * e0;
    sq[1] += e1 * e1;
  }
  r.rms = {std::sqrt(sq[0] / n), std::sqrt(sq[1] / n)};
  const auto z = wrapping::to_z(r.offset[0], r.offset[1]);
  const double half = lambda / 2.0;
  r.grid_distance = {std::abs(z.z1 - std::round(z.z1 / half) * half),
                     std::abs(z.z2 - std::round(z.z2 / half) * half)};
  return r;
}

void write_estimate_csv(const std::string& path, const FilterRun& run, const dynamics::Trajectory* truth) {
  if (truth && truth->size() != run.records.size()) throw IntegrityError("estimate csv: length mismatch");
  CsvWriter csv(path);
  std::vector<std::string> cols = {"t",     "p_prcl", "p_mich", "var_prcl", "var_mich", "v_prcl",
                                   "v_mich", "n1",     "n2",     "log_score"};
  if (truth) cols.insert(cols.end(), {"true_prcl", "true_mich", "res_prcl", "res_mich"});
  csv.header(cols);
  std::vector<double> row;
  for (std::size_t i = 0; i < run.records.size(); ++i) {
    const auto& r = run.records[i];
    if (!r.valid) continue;
    const auto& s = r.state;
    row = {r.t,        s.p_star[0], s.p_star[1], s.sigma_p[0],          s.sigma_p[1],
           s.v_est[0], s.v_est[1],  static_cast<double>(s.shifts[0]), static_cast<double>(s.shifts[1]),
           s.log_score};
    if (truth) {
      const auto& x = truth->states[i];
      row.insert(row.end(), {x.dl_prcl, x.dl_mich, x.dl_prcl - s.p_star[0], x.dl_mich - s.p_star[1]});
    }
    csv.row(row);
  }
}

}  // namespace prmi::fusion
