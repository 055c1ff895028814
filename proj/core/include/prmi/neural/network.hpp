#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "prmi/neural/model_spec.hpp"

namespace prmi::neural {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

/// Per-dof mean and standard deviation in normalized units.
struct GaussianEstimate {
  std::array<double, 2> mu{};
  std::array<double, 2> sigma{};
};

/// Complete float32 parameterization of a network. `values` follows
/// ParameterLayout(spec).
struct ModelWeights {
  ModelSpec spec;
  std::vector<float> values;

  /// Glorot-uniform kernels, orthogonal recurrent kernels, zero biases.
  static ModelWeights initialize(const ModelSpec& spec, std::uint64_t seed);
  static ModelWeights zeros(const ModelSpec& spec);

  std::size_t parameter_count() const { return values.size(); }
};

template <typename T>
struct GruParams {
  Matrix<T> kernel;            // 3h x in, rows r | z | n
  Matrix<T> recurrent_kernel;  // 3h x h
  Vector<T> input_bias;        // 3h
  Vector<T> recurrent_bias;    // 3h

  int units() const { return static_cast<int>(recurrent_kernel.cols()); }
};

/// Reset-after GRU cell:
///   r = sigmoid(W_r x + b_wr + U_r h + b_ur)
///   z = sigmoid(W_z x + b_wz + U_z h + b_uz)
///   n = tanh(W_n x + b_wn + r * (U_n h + b_un))
///   h' = (1 - z) * n + z * h
template <typename T>
Vector<T> gru_cell_forward(const GruParams<T>& p, const Vector<T>& x, const Vector<T>& h);

/// Copies GRU layer `index` out of a weight set.
GruParams<double> gru_params(const ModelWeights& w, std::size_t index);

inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

/// Hidden state of every GRU layer plus scratch space, so that a step never
/// allocates.
struct StreamState {
  std::vector<Eigen::VectorXf> hidden;
  GaussianEstimate last{};
  std::size_t steps = 0;

  // scratch
  std::vector<Eigen::VectorXf> next_hidden;
  std::vector<Eigen::VectorXf> input_proj;
  std::vector<Eigen::VectorXf> recurrent_proj;
  std::vector<Eigen::VectorXf> activations;
  Eigen::VectorXf input;
  Eigen::Vector2f head_mu;
  Eigen::Vector2f head_pre;
};

/// Single-threaded per-sample inference. Dropout is disabled; the dense stack
/// and heads run on every step.
class StreamingModel {
 public:
  explicit StreamingModel(const ModelWeights& weights);

  const ModelSpec& spec() const { return spec_; }
  StreamState make_state() const;
  void reset(StreamState& state) const;

  /// `sample` holds input_width normalized signals.
  const GaussianEstimate& step(StreamState& state, std::span<const float> sample) const;

 private:
  struct Gru {
    Eigen::MatrixXf kernel;
    Eigen::MatrixXf recurrent_kernel;
    Eigen::VectorXf input_bias;
    Eigen::VectorXf recurrent_bias;
  };
  struct Dense {
    Eigen::MatrixXf kernel;
    Eigen::VectorXf bias;
    float slope = 0.0f;
  };

  ModelSpec spec_;
  std::vector<Gru> grus_;
  std::vector<Dense> denses_;
  Dense mean_;
  Dense std_;
};

/// Runs the GRUs over the whole window from a zero hidden state and returns
/// the estimate at the last row. Uses the streaming code path.
GaussianEstimate forward_window(const ModelWeights& weights, std::span<const float> window);

}  // namespace prmi::neural
