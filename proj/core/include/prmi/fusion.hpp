#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "prmi/dataset.hpp"
#include "prmi/dynamics.hpp"
#include "prmi/neural/network.hpp"

namespace prmi::fusion {

using Vec2 = std::array<double, 2>;

enum class CovarianceUpdate { kPaperLiteral, kTextbook };

struct FilterConfig {
  double dt = 1.0 / 2048.0;
  int m_half = 2;
  double vel_sigma_inflation = 15.0;
  CovarianceUpdate covariance_update = CovarianceUpdate::kPaperLiteral;
  double lambda = 1.064e-6;

  void validate() const;
};

/// Covariances are diagonal and stored as per-dof variances.
struct FilterState {
  Vec2 p_star{};   // m
  Vec2 sigma_p{};  // m^2
  Vec2 v_est{};    // m/s
  Vec2 sigma_v{};  // (m/s)^2
  std::array<int, 2> shifts{};  // Z-grid shift applied to the winning measurement
  double log_score = 0.0;
};

/// Model outputs in physical units; velocity variance already inflated.
struct Measurement {
  Vec2 mu_p{};
  Vec2 var_p{};
  Vec2 mu_v{};
  Vec2 var_v{};
};

Measurement denormalize(const neural::GaussianEstimate& pos, const neural::GaussianEstimate& vel,
                        const dataset::NormalizationConstants& norms, const FilterConfig& cfg);

FilterState init(const neural::GaussianEstimate& pos, const neural::GaussianEstimate& vel,
                 const dataset::NormalizationConstants& norms, const FilterConfig& cfg);

struct Prediction {
  Vec2 mu_hat{};
  Vec2 sigma_hat{};
};

/// Constant-velocity prediction: mu_hat = p* + v dt, sigma_hat = sigma_p + sigma_v dt^2.
Prediction propagate(const FilterState& state, const FilterConfig& cfg);

struct Candidate {
  Vec2 mu{};
  std::array<int, 2> shift{};   // total Z shift relative to the wrapped measurement
  std::array<int, 2> offset{};  // position inside the search window, |offset_i| <= m_half
};

/// Places the wrapped measurement in the Z cell nearest mu_hat and enumerates
/// the (2 m_half + 1)^2 neighbouring cells. `out` is overwritten.
void candidates(const Vec2& wrapped_mu, const Vec2& mu_hat, const FilterConfig& cfg,
                std::vector<Candidate>& out);
std::vector<Candidate> candidates(const Vec2& wrapped_mu, const Vec2& mu_hat, const FilterConfig& cfg);

/// log of the Gaussian density of candidate c under N(mu_hat, var_p + sigma_hat).
double log_score(const Vec2& c, const Prediction& pred, const Vec2& var_p);

struct Fused {
  Vec2 mean{};
  Vec2 cov{};
  Vec2 gain{};
};

Fused fuse(const Vec2& candidate, const Prediction& pred, const Vec2& var_p, CovarianceUpdate mode);

struct SelectInfo {
  std::size_t winner = 0;
  bool boundary_hit = false;
};

/// One filter step after propagation: scores every candidate, keeps the most
/// probable one fused with the prediction and takes over the new velocity
/// measurement. `scratch` is reused to avoid allocation.
FilterState fuse_and_select(const FilterState& state, const Measurement& m, const FilterConfig& cfg,
                            std::vector<Candidate>& scratch, SelectInfo* info = nullptr);

/// Stateful filter over a stream of model outputs.
class UnwrappingFilter {
 public:
  UnwrappingFilter(const FilterConfig& cfg, const dataset::NormalizationConstants& norms);

  const FilterState& update(const neural::GaussianEstimate& pos, const neural::GaussianEstimate& vel);

  bool initialized() const { return initialized_; }
  const FilterState& state() const { return state_; }
  std::size_t boundary_hits() const { return boundary_hits_; }
  std::size_t continuity_violations() const { return continuity_violations_; }
  void reset();

 private:
  FilterConfig cfg_;
  dataset::NormalizationConstants norms_;
  FilterState state_{};
  bool initialized_ = false;
  std::size_t boundary_hits_ = 0;
  std::size_t continuity_violations_ = 0;
  std::vector<Candidate> scratch_;
};

/// Both streaming models plus the filter: signals in, state estimate out.
/// The filter starts once the models have seen `warmup_steps` samples.
class NeuralStateEstimator {
 public:
  NeuralStateEstimator(const neural::ModelWeights& position, const neural::ModelWeights& velocity,
                       const dataset::NormalizationConstants& norms, const FilterConfig& cfg,
                       std::size_t warmup_steps = dataset::kDefaultWindow);

  dynamics::StateEstimate step(const optics::OpticalSignals& s);

  const UnwrappingFilter& filter() const { return filter_; }
  const neural::GaussianEstimate& last_position() const { return pos_state_.last; }
  const neural::GaussianEstimate& last_velocity() const { return vel_state_.last; }
  void reset();

 private:
  neural::StreamingModel pos_model_;
  neural::StreamingModel vel_model_;
  neural::StreamState pos_state_;
  neural::StreamState vel_state_;
  dataset::NormalizationConstants norms_;
  UnwrappingFilter filter_;
  std::size_t warmup_;
  std::size_t steps_ = 0;
  std::array<float, dataset::kChannels> input_{};
};

struct FilterRecord {
  double t = 0.0;
  bool valid = false;
  FilterState state;
};

struct FilterRun {
  std::vector<FilterRecord> records;
  std::size_t boundary_hits = 0;
  std::size_t continuity_violations = 0;
};

FilterRun filter_run(const neural::ModelWeights& position, const neural::ModelWeights& velocity,
                     const std::vector<optics::OpticalSignals>& signals, double sample_rate,
                     const dataset::NormalizationConstants& norms, const FilterConfig& cfg,
                     std::size_t warmup_steps = dataset::kDefaultWindow);

/// Residual of an unwrapped estimate against ground truth over the valid
/// records: the mean offset, the RMS around it and the offset's distance to
/// the nearest lambda/2 Z-grid point.
struct ResidualStats {
  Vec2 offset{};
  Vec2 rms{};
  Vec2 grid_distance{};  // per Z axis
  std::size_t samples = 0;
  std::size_t shift_changes = 0;
};

ResidualStats residual_stats(const dynamics::Trajectory& truth, const FilterRun& run, double lambda);

/// Columns: t, p_prcl, p_mich, var_prcl, var_mich, v_prcl, v_mich, n1, n2,
/// log_score, and when truth is given true_prcl, true_mich, res_prcl,
/// res_mich (truth - estimate).
void write_estimate_csv(const std::string& path, const FilterRun& run,
                        const dynamics::Trajectory* truth = nullptr);

}  // namespace prmi::fusion
