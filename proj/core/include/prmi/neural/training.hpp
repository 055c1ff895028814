#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "prmi/dataset.hpp"
#include "prmi/neural/model_spec.hpp"
#include "prmi/neural/network.hpp"

namespace prmi::neural {

enum class Target { kPosition, kVelocity };

/// Gaussian negative log-likelihood plus alpha-weighted squared error,
/// summed over both dofs:
///   sum_d [ln s + 0.5 ln(2 pi) + (y - m)^2 / (2 s^2)] + alpha sum_d (y - m)^2
double loss(const std::array<double, 2>& y, const GaussianEstimate& est, double alpha);

struct LossGradient {
  double value = 0.0;
  std::array<double, 2> d_mu{};
  std::array<double, 2> d_sigma{};
};

LossGradient loss_with_gradient(const std::array<double, 2>& y, const GaussianEstimate& est,
                                double alpha);

struct TrainConfig {
  int max_epochs = 3000;
  int patience = 100;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int warmup_epochs = 20;
  int decay_epochs = 500;
  double initial_lr = 1e-6;
  double base_lr = 1e-4;
  double min_lr = 1e-7;
  int batch_size = 64;
  /// Gradients of a batch are accumulated over slices of this many samples;
  /// the result equals the full-batch gradient.
  int micro_batch = 64;
  double alpha = 10.0;
  std::uint64_t seed = 7;
  /// Batches per epoch; 0 means one full pass over the training split.
  std::size_t steps_per_epoch = 0;
  /// Size of the fixed validation subset drawn from the test split; 0 = all.
  std::size_t val_samples = 0;
  /// Global L2 norm the batch gradient is scaled down to; 0 disables.
  double clip_norm = 0.0;

  void validate() const;
};

/// Piecewise linear: initial -> base over warmup_epochs, base -> min over
/// decay_epochs, then min.
double lr_schedule(int epoch, const TrainConfig& cfg);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  explicit AdamState(std::size_t n) : m(n, T(0)), v(n, T(0)) {}
  std::vector<T> m;
  std::vector<T> v;
  std::uint64_t step = 0;
};

/// Adam with bias correction.
template <typename T>
void adam_step(std::span<T> weights, std::span<const T> grads, double lr, AdamState<T>& state,
               const AdamConfig& cfg);

/// Scales `grad` so that its L2 norm is at most `max_norm` (0 = no-op) and
/// returns the norm before scaling.
template <typename T>
double clip_gradient_norm(std::span<T> grad, double max_norm);

/// Batched forward/backward through time over complete windows. Activations
/// of the last forward call are cached for backward.
template <typename T>
class BatchNetwork {
 public:
  explicit BatchNetwork(const ModelSpec& spec);
  ~BatchNetwork();
  BatchNetwork(BatchNetwork&&) noexcept;
  BatchNetwork& operator=(BatchNetwork&&) noexcept;

  /// `windows` are row-major steps x input_width, all of equal length.
  /// With `training` set, dropout masks are drawn from `dropout_seed`.
  void forward(std::span<const T> params, const std::vector<std::span<const float>>& windows,
               bool training, std::uint64_t dropout_seed);

  const Matrix<T>& mu() const;     // head_width x batch
  const Matrix<T>& sigma() const;  // head_width x batch

  /// Adds to `grad` the gradient of sum_b (d_mu_b . mu_b + d_sigma_b . sigma_b).
  void backward(std::span<const T> params, const Matrix<T>& d_mu, const Matrix<T>& d_sigma,
                std::span<T> grad);

 private:
  struct Impl;
  Impl* impl_;
};

struct Batch {
  std::vector<std::span<const float>> windows;
  std::vector<std::array<float, 2>> targets;
};

template <typename T>
struct GradientResult {
  double loss = 0.0;  // mean over the batch
  std::vector<T> grad;
};

/// Mean batch loss and its exact gradient; dropout masks are a pure function
/// of `dropout_seed`.
template <typename T>
GradientResult<T> compute_gradients(BatchNetwork<T>& net, std::span<const T> params,
                                    const Batch& batch, double alpha, bool dropout,
                                    std::uint64_t dropout_seed, std::size_t micro_batch = 64);

Batch make_batch(const dataset::DatasetSplit& split, std::span<const std::size_t> indices,
                 Target target);

struct EvalResult {
  double loss = 0.0;
  std::array<double, 2> rmse{};        // normalized units
  std::array<double, 2> mean_sigma{};  // normalized units
  std::size_t samples = 0;
};

/// Inference-mode metrics over the first `max_samples` records (0 = all).
EvalResult evaluate(const ModelWeights& weights, const dataset::DatasetSplit& split, Target target,
                    double alpha, std::size_t max_samples = 0, std::size_t batch = 64);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  ModelWeights weights;  // best validation epoch
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  int epochs_run = 0;
  bool early_stopped = false;
};

using ProgressFn = std::function<void(const EpochRecord&, const ModelWeights& best)>;

/// Shuffled mini-batch Adam training with validation on the test split,
/// early stopping after `patience` epochs without improvement and restoration
/// of the best weights. Throws DivergenceError on a non-finite loss.
TrainResult train(const ModelSpec& spec, const dataset::Dataset& data, Target target,
                  const TrainConfig& cfg, const ProgressFn& progress = {},
                  const ModelWeights* initial = nullptr);

/// Columns: epoch, lr, train_loss, val_loss.
void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history);

}  // namespace prmi::neural
