#pragma once

#include <array>
#include <cstddef>

#include "prmi/dynamics.hpp"
#include "prmi/optics.hpp"

namespace prmi::control {

/// 0 before `start`, linear to 1 over `duration`, then 1.
double ramp(double t, double start, double duration);

struct LockConfig {
  double damp_gain = 450.0;  // N per m/s
  double prop_gain = 1.0e5;  // N per m
  double int_gain = 2.0e6;   // N per m s
  double damp_start = 1.0;
  double damp_duration = 2.0;
  double int_start = 4.0;
  double int_duration = 2.0;
  double force_clamp = 0.05;  // N

  void validate() const;
};

/// Velocity damping followed by proportional-integral position control
/// towards the operating point nearest the estimate when the second stage
/// starts. The target is latched so that later estimates cannot make it jump.
class TwoStageController {
 public:
  TwoStageController(const LockConfig& cfg, double lambda, double dt);

  dynamics::Force operator()(double t, const dynamics::StateEstimate& est);

  bool target_latched() const { return latched_; }
  const std::array<double, 2>& target() const { return target_; }
  const std::array<double, 2>& integral() const { return integral_; }
  void reset();

 private:
  LockConfig cfg_;
  double lambda_;
  double dt_;
  bool latched_ = false;
  std::array<double, 2> target_{};
  std::array<double, 2> integral_{};
};

/// Operating point (Z-grid translate of the origin) nearest to a position.
std::array<double, 2> nearest_operating_point(const std::array<double, 2>& position, double lambda);

/// Linear map from two RF channels to (PRCL, MICH) displacement around the
/// operating point.
struct SensingMatrix {
  std::array<std::size_t, 2> channels{};
  std::array<double, 2> offset{};                     // channel values at the operating point
  std::array<std::array<double, 2>, 2> jacobian{};    // d channel_i / d dof_j
  std::array<std::array<double, 2>, 2> inverse{};

  std::array<double, 2> error(const optics::OpticalSignals& s) const;
};

/// Central differences of all RF channels at (0, 0); picks the channel pair
/// with the best-conditioned 2x2 response.
SensingMatrix measure_sensing_matrix(const optics::OpticalConfig& ocfg, double step = 1e-12);

struct ClassicalConfig {
  double trigger_fraction = 0.5;
  double release_fraction = 0.2;
  double prop_gain = 2.0e6;   // N per m of reconstructed error
  double deriv_gain = 1.4e3;  // N per m/s of reconstructed error
  double force_clamp = 1.0;   // N

  void validate() const;
};

/// Trigger-based linear feedback on RF error signals. Engages once pop_dc
/// exceeds trigger_fraction * peak_dc and releases below release_fraction *
/// peak_dc.
class ClassicalController {
 public:
  ClassicalController(const ClassicalConfig& cfg, const SensingMatrix& sensing, double peak_dc,
                      double dt);

  dynamics::Force operator()(const optics::OpticalSignals& s);

  bool engaged() const { return engaged_; }
  std::size_t engagements() const { return engagements_; }
  void reset();

 private:
  ClassicalConfig cfg_;
  SensingMatrix sensing_;
  double peak_dc_;
  double dt_;
  bool engaged_ = false;
  bool have_prev_ = false;
  std::size_t engagements_ = 0;
  std::array<double, 2> prev_error_{};
};

}  // namespace prmi::control
