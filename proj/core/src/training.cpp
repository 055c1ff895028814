#include "prmi/neural/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#if defined(__SSE__)
#include <xmmintrin.h>
#endif

#include "prmi/csv.hpp"
#include "prmi/errors.hpp"

namespace prmi::neural {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

template <typename T>
using MapM = Eigen::Map<const Matrix<T>>;
template <typename T>
using MapV = Eigen::Map<const Vector<T>>;
template <typename T>
using MutMapM = Eigen::Map<Matrix<T>>;
template <typename T>
using MutMapV = Eigen::Map<Vector<T>>;

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& x) {
  using T = typename Derived::Scalar;
  return (T(1) + (-x).exp()).inverse();
}

template <typename T>
void draw_mask(Matrix<T>& mask, Eigen::Index rows, Eigen::Index cols, double rate,
               std::mt19937_64& rng) {
  mask.resize(rows, cols);
  const T keep = T(1.0 / (1.0 - rate));
  std::bernoulli_distribution drop(rate);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) mask(i, j) = drop(rng) ? T(0) : keep;
  }
}

/// Gradients that vanish back in time end up subnormal, which is orders of
/// magnitude slower on x86; flush them to zero while the scope is active.
class FlushDenormals {
 public:
#if defined(__SSE__)
  FlushDenormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040u); }
  ~FlushDenormals() { _mm_setcsr(saved_); }

 private:
  unsigned saved_;
#endif
};

}  // namespace

double loss(const std::array<double, 2>& y, const GaussianEstimate& est, double alpha) {
  return loss_with_gradient(y, est, alpha).value;
}

LossGradient loss_with_gradient(const std::array<double, 2>& y, const GaussianEstimate& est,
                                double alpha) {
  LossGradient g;
  for (std::size_t d = 0; d < 2; ++d) {
    const double s = est.sigma[d];
    const double e = y[d] - est.mu[d];
    g.value += std::log(s) + kHalfLog2Pi + e * e / (2.0 * s * s) + alpha * e * e;
    g.d_mu[d] = -e / (s * s) - 2.0 * alpha * e;
    g.d_sigma[d] = 1.0 / s - e * e / (s * s * s);
  }
  return g;
}

void TrainConfig::validate() const {
  if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
  if (patience < 0) throw ConfigError("train: patience must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("train: Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("train: epsilon must be > 0");
  if (warmup_epochs < 0 || decay_epochs < 0) throw ConfigError("train: schedule lengths must be >= 0");
  if (!(initial_lr > 0.0 && base_lr > 0.0 && min_lr > 0.0)) {
    throw ConfigError("train: learning rates must be > 0");
  }
  if (batch_size < 1 || micro_batch < 1) throw ConfigError("train: batch sizes must be >= 1");
  if (!(alpha >= 0.0)) throw ConfigError("train: alpha must be >= 0");
  if (!(clip_norm >= 0.0)) throw ConfigError("train: clip_norm must be >= 0");
}

double lr_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 0) epoch = 0;
  if (epoch < cfg.warmup_epochs) {
    return cfg.initial_lr + (cfg.base_lr - cfg.initial_lr) * epoch / cfg.warmup_epochs;
  }
  const int e = epoch - cfg.warmup_epochs;
  if (e < cfg.decay_epochs) {
    return cfg.base_lr + (cfg.min_lr - cfg.base_lr) * e / cfg.decay_epochs;
  }
  return cfg.min_lr;
}

template <typename T>
void adam_step(std::span<T> weights, std::span<const T> grads, double lr, AdamState<T>& state,
               const AdamConfig& cfg) {
  if (weights.size() != grads.size() || state.m.size() != weights.size()) {
    throw ConfigError("adam: size mismatch");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const T b1 = T(cfg.beta1), b2 = T(cfg.beta2);
  const T step = T(lr / c1);
  const T inv_c2 = T(1.0 / c2);
  const T eps = T(cfg.epsilon);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const T g = grads[i];
    state.m[i] = b1 * state.m[i] + (T(1) - b1) * g;
    state.v[i] = b2 * state.v[i] + (T(1) - b2) * g * g;
    weights[i] -= step * state.m[i] / (std::sqrt(state.v[i] * inv_c2) + eps);
  }
}

template <typename T>
double clip_gradient_norm(std::span<T> grad, double max_norm) {
  double sq = 0.0;
  for (const T g : grad) sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const auto scale = static_cast<T>(max_norm / norm);
    for (T& g : grad) g *= scale;
  }
  return norm;
}

template double clip_gradient_norm(std::span<float>, double);
template double clip_gradient_norm(std::span<double>, double);

template void adam_step(std::span<float>, std::span<const float>, double, AdamState<float>&,
                        const AdamConfig&);
template void adam_step(std::span<double>, std::span<const double>, double, AdamState<double>&,
                        const AdamConfig&);

// ---------------------------------------------------------------------------

template <typename T>
struct BatchNetwork<T>::Impl {
  struct GruCache {
    GruSlots slots;
    double dropout = 0.0;
    Matrix<T> ax;    // 3h x WB input projections; reused for their gradient
    Matrix<T> gates; // 3h x WB: r, z, n
    Matrix<T> au_n;  // h x WB recurrent n-projection; reused for its gradient
    Matrix<T> h;     // h x (W+1)B, first block is the zero initial state
    Matrix<T> mask;  // dropout on the layer output
    Matrix<T> out;   // masked output sequence (lower layers with dropout)
  };
  struct DenseCache {
    DenseSlots slots;
    double dropout = 0.0;
    T slope = T(0);
    Matrix<T> pre;
    Matrix<T> mask;
  };

  explicit Impl(const ModelSpec& s) : spec(s), layout(s) {
    spec.validate();
    const auto g = spec.gru_layers();
    for (std::size_t i = 0; i < g.size(); ++i) {
      grus.push_back({layout.grus()[i], g[i].dropout, {}, {}, {}, {}, {}, {}});
    }
    const auto d = spec.dense_layers();
    for (std::size_t i = 0; i < d.size(); ++i) {
      denses.push_back({layout.denses()[i], d[i].dropout, T(d[i].leaky_slope), {}, {}});
    }
  }

  ModelSpec spec;
  ParameterLayout layout;
  std::vector<GruCache> grus;
  std::vector<DenseCache> denses;
  Eigen::Index batch = 0;
  Eigen::Index steps = 0;
  bool training = false;

  Matrix<T> x;                 // in x WB, column t*B + b
  std::vector<Matrix<T>> acts; // inputs of each dense layer and of the heads
  Matrix<T> mu, s_pre, sigma;
  Matrix<T> au, d_au, dh, d_seq, d_seq_next;
  Vector<T> ones, col_sum;

  void forward(std::span<const T> p, const std::vector<std::span<const float>>& windows,
               bool train_mode, std::uint64_t seed) {
    const FlushDenormals ftz;
    if (windows.empty()) throw ConfigError("batch: no windows");
    if (p.size() != layout.total()) throw ShapeMismatchError("batch: parameter count mismatch");
    const Eigen::Index in = spec.input_width;
    batch = static_cast<Eigen::Index>(windows.size());
    if (windows[0].size() % static_cast<std::size_t>(in) != 0 || windows[0].empty()) {
      throw ShapeMismatchError("batch: window size is not a multiple of the input width");
    }
    steps = static_cast<Eigen::Index>(windows[0].size()) / in;
    training = train_mode;
    const Eigen::Index B = batch, W = steps;
    x.resize(in, W * B);
    for (Eigen::Index b = 0; b < B; ++b) {
      const auto& w = windows[static_cast<std::size_t>(b)];
      if (static_cast<Eigen::Index>(w.size()) != W * in) {
        throw ShapeMismatchError("batch: windows differ in length");
      }
      for (Eigen::Index t = 0; t < W; ++t) {
        for (Eigen::Index c = 0; c < in; ++c) x(c, t * B + b) = T(w[t * in + c]);
      }
    }
    std::mt19937_64 rng(seed);

    for (std::size_t l = 0; l < grus.size(); ++l) {
      GruCache& g = grus[l];
      const Eigen::Index h = g.slots.units;
      const Eigen::Index gi = g.slots.inputs;
      const MapM<T> K(p.data() + g.slots.kernel, 3 * h, gi);
      const MapM<T> U(p.data() + g.slots.recurrent_kernel, 3 * h, h);
      const MapV<T> bw(p.data() + g.slots.input_bias, 3 * h);
      const MapV<T> bu(p.data() + g.slots.recurrent_bias, 3 * h);
      const bool top = l + 1 == grus.size();
      const Matrix<T>& input = l == 0 ? x : (grus[l - 1].dropout > 0.0 && training
                                                 ? grus[l - 1].out
                                                 : grus[l - 1].h);
      const auto in_seq = l == 0 || (grus[l - 1].dropout > 0.0 && training)
                              ? input.leftCols(W * B)
                              : input.rightCols(W * B);
      g.ax.resize(3 * h, W * B);
      g.ax.noalias() = K * in_seq;
      g.ax.colwise() += bw;
      g.gates.resize(3 * h, W * B);
      g.au_n.resize(h, W * B);
      g.h.resize(h, (W + 1) * B);
      g.h.leftCols(B).setZero();
      au.resize(3 * h, B);
      for (Eigen::Index t = 0; t < W; ++t) {
        const auto hprev = g.h.middleCols(t * B, B);
        au.noalias() = U * hprev;
        au.colwise() += bu;
        const auto axb = g.ax.middleCols(t * B, B);
        auto gt = g.gates.middleCols(t * B, B);
        gt.topRows(h).array() = sigmoid(axb.topRows(h).array() + au.topRows(h).array());
        gt.middleRows(h, h).array() =
            sigmoid(axb.middleRows(h, h).array() + au.middleRows(h, h).array());
        g.au_n.middleCols(t * B, B) = au.bottomRows(h);
        gt.bottomRows(h).array() =
            (axb.bottomRows(h).array() + gt.topRows(h).array() * au.bottomRows(h).array()).tanh();
        g.h.middleCols((t + 1) * B, B).array() =
            gt.bottomRows(h).array() +
            gt.middleRows(h, h).array() * (hprev.array() - gt.bottomRows(h).array());
      }
      if (training && g.dropout > 0.0) {
        if (top) {
          draw_mask(g.mask, h, B, g.dropout, rng);
          g.out = g.h.rightCols(B).cwiseProduct(g.mask);
        } else {
          draw_mask(g.mask, h, W * B, g.dropout, rng);
          g.out = g.h.rightCols(W * B).cwiseProduct(g.mask);
        }
      } else if (top) {
        g.out = g.h.rightCols(B);
      }
    }

    acts.resize(denses.size() + 1);
    acts[0] = grus.back().out;
    for (std::size_t i = 0; i < denses.size(); ++i) {
      DenseCache& d = denses[i];
      const MapM<T> K(p.data() + d.slots.kernel, d.slots.units, d.slots.inputs);
      const MapV<T> bias(p.data() + d.slots.bias, d.slots.units);
      d.pre.noalias() = K * acts[i];
      d.pre.colwise() += bias;
      acts[i + 1] = d.pre.array().max(d.slope * d.pre.array());
      if (training && d.dropout > 0.0) {
        draw_mask(d.mask, d.slots.units, B, d.dropout, rng);
        acts[i + 1].array() *= d.mask.array();
      }
    }
    const auto& a = acts.back();
    const auto& m = layout.mean_head();
    const auto& s = layout.std_head();
    mu.noalias() = MapM<T>(p.data() + m.kernel, m.units, m.inputs) * a;
    mu.colwise() += MapV<T>(p.data() + m.bias, m.units);
    s_pre.noalias() = MapM<T>(p.data() + s.kernel, s.units, s.inputs) * a;
    s_pre.colwise() += MapV<T>(p.data() + s.bias, s.units);
    sigma.resizeLike(s_pre);
    for (Eigen::Index j = 0; j < s_pre.cols(); ++j) {
      for (Eigen::Index i = 0; i < s_pre.rows(); ++i) {
        sigma(i, j) = T(softplus(static_cast<double>(s_pre(i, j))));
      }
    }
  }

  void backward(std::span<const T> p, const Matrix<T>& d_mu, const Matrix<T>& d_sigma,
                std::span<T> grad) {
    const FlushDenormals ftz;
    if (grad.size() != layout.total()) throw ShapeMismatchError("batch: gradient size mismatch");
    const Eigen::Index B = batch, W = steps;
    if (d_mu.rows() != mu.rows() || d_mu.cols() != B || d_sigma.rows() != mu.rows() ||
        d_sigma.cols() != B) {
      throw ShapeMismatchError("batch: head gradient shape mismatch");
    }
    const auto& m = layout.mean_head();
    const auto& s = layout.std_head();
    const Matrix<T> d_spre = (d_sigma.array() * sigmoid(s_pre.array())).matrix();
    const auto& a = acts.back();
    MutMapM<T>(grad.data() + m.kernel, m.units, m.inputs).noalias() += d_mu * a.transpose();
    MutMapV<T>(grad.data() + m.bias, m.units) += d_mu.rowwise().sum();
    MutMapM<T>(grad.data() + s.kernel, s.units, s.inputs).noalias() += d_spre * a.transpose();
    MutMapV<T>(grad.data() + s.bias, s.units) += d_spre.rowwise().sum();
    Matrix<T> da = MapM<T>(p.data() + m.kernel, m.units, m.inputs).transpose() * d_mu;
    da.noalias() += MapM<T>(p.data() + s.kernel, s.units, s.inputs).transpose() * d_spre;

    for (std::size_t i = denses.size(); i-- > 0;) {
      DenseCache& d = denses[i];
      if (training && d.dropout > 0.0) da.array() *= d.mask.array();
      da.array() *= (d.pre.array() > T(0)).select(Matrix<T>::Ones(d.pre.rows(), d.pre.cols()).array(),
                                                  d.slope);
      MutMapM<T>(grad.data() + d.slots.kernel, d.slots.units, d.slots.inputs).noalias() +=
          da * acts[i].transpose();
      MutMapV<T>(grad.data() + d.slots.bias, d.slots.units) += da.rowwise().sum();
      Matrix<T> prev = MapM<T>(p.data() + d.slots.kernel, d.slots.units, d.slots.inputs).transpose() * da;
      da.swap(prev);
    }

    // da is now the gradient w.r.t. the top GRU's (masked) last hidden state.
    for (std::size_t l = grus.size(); l-- > 0;) {
      GruCache& g = grus[l];
      const Eigen::Index h = g.slots.units;
      const Eigen::Index gi = g.slots.inputs;
      const bool top = l + 1 == grus.size();
      const MapM<T> K(p.data() + g.slots.kernel, 3 * h, gi);
      const MapM<T> U(p.data() + g.slots.recurrent_kernel, 3 * h, h);
      const bool masked = training && g.dropout > 0.0;
      if (top) {
        if (masked) da.array() *= g.mask.array();
      } else if (masked) {
        d_seq.array() *= g.mask.array();
      }
      dh.setZero(h, B);
      d_au.resize(3 * h, B);
      for (Eigen::Index t = W; t-- > 0;) {
        if (top) {
          if (t == W - 1) dh += da;
        } else {
          dh += d_seq.middleCols(t * B, B);
        }
        const auto hprev = g.h.middleCols(t * B, B);
        const auto gt = g.gates.middleCols(t * B, B);
        const auto r = gt.topRows(h).array();
        const auto z = gt.middleRows(h, h).array();
        const auto n = gt.bottomRows(h).array();
        auto dax = g.ax.middleCols(t * B, B);
        auto dau_n = g.au_n.middleCols(t * B, B);
        // dax rows: r, z, n pre-activations (input side).
        dax.bottomRows(h).array() = dh.array() * (T(1) - z) * (T(1) - n * n);
        dax.topRows(h).array() = dax.bottomRows(h).array() * dau_n.array() * r * (T(1) - r);
        dax.middleRows(h, h).array() = dh.array() * (hprev.array() - n) * z * (T(1) - z);
        dau_n.array() = dax.bottomRows(h).array() * r;
        d_au.topRows(2 * h) = dax.topRows(2 * h);
        d_au.bottomRows(h) = dau_n;
        dh.array() *= z;
        dh.noalias() += U.transpose() * d_au;
      }
      const auto hprev_all = g.h.leftCols(W * B);
      MutMapM<T> gU(grad.data() + g.slots.recurrent_kernel, 3 * h, h);
      gU.topRows(2 * h).noalias() += g.ax.topRows(2 * h) * hprev_all.transpose();
      gU.bottomRows(h).noalias() += g.au_n * hprev_all.transpose();
      // Row sums as GEMV; a rowwise reduction over a column-major matrix is
      // strided.
      ones.setOnes(W * B);
      MutMapV<T> gbu(grad.data() + g.slots.recurrent_bias, 3 * h);
      MutMapV<T> gbw(grad.data() + g.slots.input_bias, 3 * h);
      col_sum.noalias() = g.ax * ones;
      gbw += col_sum;
      gbu.head(2 * h) += col_sum.head(2 * h);
      gbu.tail(h).noalias() += g.au_n * ones;
      MutMapM<T> gK(grad.data() + g.slots.kernel, 3 * h, gi);
      if (l == 0) {
        gK.noalias() += g.ax * x.transpose();
      } else {
        const GruCache& below = grus[l - 1];
        const bool below_masked = training && below.dropout > 0.0;
        if (below_masked) {
          gK.noalias() += g.ax * below.out.transpose();
        } else {
          gK.noalias() += g.ax * below.h.rightCols(W * B).transpose();
        }
        d_seq_next.noalias() = K.transpose() * g.ax;
        d_seq.swap(d_seq_next);
      }
    }
  }
};

template <typename T>
BatchNetwork<T>::BatchNetwork(const ModelSpec& spec) : impl_(new Impl(spec)) {}

template <typename T>
BatchNetwork<T>::~BatchNetwork() {
  delete impl_;
}

template <typename T>
BatchNetwork<T>::BatchNetwork(BatchNetwork&& o) noexcept : impl_(o.impl_) {
  o.impl_ = nullptr;
}

template <typename T>
BatchNetwork<T>& BatchNetwork<T>::operator=(BatchNetwork&& o) noexcept {
  std::swap(impl_, o.impl_);
  return *this;
}

template <typename T>
void BatchNetwork<T>::forward(std::span<const T> params,
                              const std::vector<std::span<const float>>& windows, bool training,
                              std::uint64_t dropout_seed) {
  impl_->forward(params, windows, training, dropout_seed);
}

template <typename T>
const Matrix<T>& BatchNetwork<T>::mu() const {
  return impl_->mu;
}

template <typename T>
const Matrix<T>& BatchNetwork<T>::sigma() const {
  return impl_->sigma;
}

template <typename T>
void BatchNetwork<T>::backward(std::span<const T> params, const Matrix<T>& d_mu,
                               const Matrix<T>& d_sigma, std::span<T> grad) {
  impl_->backward(params, d_mu, d_sigma, grad);
}

template class BatchNetwork<float>;
template class BatchNetwork<double>;

// ---------------------------------------------------------------------------

template <typename T>
GradientResult<T> compute_gradients(BatchNetwork<T>& net, std::span<const T> params,
                                    const Batch& batch, double alpha, bool dropout,
                                    std::uint64_t dropout_seed, std::size_t micro_batch) {
  if (batch.windows.size() != batch.targets.size() || batch.windows.empty()) {
    throw ConfigError("gradients: empty batch or target count mismatch");
  }
  micro_batch = std::max<std::size_t>(micro_batch, 1);
  GradientResult<T> out;
  out.grad.assign(params.size(), T(0));
  const std::size_t n = batch.windows.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<std::span<const float>> slice;
  Matrix<T> d_mu, d_sigma;
  for (std::size_t start = 0, k = 0; start < n; start += micro_batch, ++k) {
    const std::size_t end = std::min(n, start + micro_batch);
    slice.assign(batch.windows.begin() + start, batch.windows.begin() + end);
    net.forward(params, slice, dropout, dropout_seed + 0x9e3779b97f4a7c15ULL * k);
    const auto& mu = net.mu();
    const auto& sigma = net.sigma();
    d_mu.resize(2, static_cast<Eigen::Index>(end - start));
    d_sigma.resizeLike(d_mu);
    for (std::size_t b = start; b < end; ++b) {
      const auto j = static_cast<Eigen::Index>(b - start);
      GaussianEstimate est;
      for (int d = 0; d < 2; ++d) {
        est.mu[d] = static_cast<double>(mu(d, j));
        est.sigma[d] = static_cast<double>(sigma(d, j));
      }
      const auto& y = batch.targets[b];
      const auto g = loss_with_gradient({static_cast<double>(y[0]), static_cast<double>(y[1])}, est,
                                        alpha);
      out.loss += g.value * inv_n;
      for (int d = 0; d < 2; ++d) {
        d_mu(d, j) = T(g.d_mu[d] * inv_n);
        d_sigma(d, j) = T(g.d_sigma[d] * inv_n);
      }
    }
    net.backward(params, d_mu, d_sigma, out.grad);
  }
  return out;
}

template GradientResult<float> compute_gradients(BatchNetwork<float>&, std::span<const float>,
                                                 const Batch&, double, bool, std::uint64_t,
                                                 std::size_t);
template GradientResult<double> compute_gradients(BatchNetwork<double>&, std::span<const double>,
                                                  const Batch&, double, bool, std::uint64_t,
                                                  std::size_t);

Batch make_batch(const dataset::DatasetSplit& split, std::span<const std::size_t> indices,
                 Target target) {
  Batch b;
  b.windows.reserve(indices.size());
  b.targets.reserve(indices.size());
  for (std::size_t i : indices) {
    const auto s = split.sample(i);
    b.windows.push_back(s.window);
    b.targets.push_back(target == Target::kPosition ? s.pos_target : s.vel_target);
  }
  return b;
}

EvalResult evaluate(const ModelWeights& weights, const dataset::DatasetSplit& split, Target target,
                    double alpha, std::size_t max_samples, std::size_t batch) {
  const std::size_t n = max_samples == 0 ? split.size() : std::min(max_samples, split.size());
  if (n == 0) throw ConfigError("evaluate: empty split");
  if (weights.spec.head_width != 2) throw ShapeMismatchError("evaluate: head width must be 2");
  BatchNetwork<float> net(weights.spec);
  const std::span<const float> params(weights.values);
  EvalResult r;
  std::array<double, 2> sq{};
  std::vector<std::size_t> idx;
  batch = std::max<std::size_t>(batch, 1);
  for (std::size_t start = 0; start < n; start += batch) {
    const std::size_t end = std::min(n, start + batch);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Batch b = make_batch(split, idx, target);
    net.forward(params, b.windows, false, 0);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto j = static_cast<Eigen::Index>(k);
      GaussianEstimate est;
      for (int d = 0; d < 2; ++d) {
        est.mu[d] = net.mu()(d, j);
        est.sigma[d] = net.sigma()(d, j);
        const double e = b.targets[k][d] - est.mu[d];
        sq[d] += e * e;
        r.mean_sigma[d] += est.sigma[d];
      }
      r.loss += loss({b.targets[k][0], b.targets[k][1]}, est, alpha);
    }
  }
  r.samples = n;
  r.loss /= static_cast<double>(n);
  for (int d = 0; d < 2; ++d) {
    r.rmse[d] = std::sqrt(sq[d] / static_cast<double>(n));
    r.mean_sigma[d] /= static_cast<double>(n);
  }
  return r;
}

TrainResult train(const ModelSpec& spec, const dataset::Dataset& data, Target target,
                  const TrainConfig& cfg, const ProgressFn& progress, const ModelWeights* initial) {
  cfg.validate();
  spec.validate();
  if (data.train.empty() || data.test.empty()) throw ConfigError("train: empty dataset split");
  if (spec.head_width != 2) throw ShapeMismatchError("train: head width must be 2");

  ModelWeights w = initial ? *initial : ModelWeights::initialize(spec, cfg.seed);
  if (!(w.spec == spec) || w.values.size() != parameter_count(spec)) {
    throw ShapeMismatchError("train: initial weights do not match the model spec");
  }
  TrainResult result;
  result.weights = w;
  double best = std::numeric_limits<double>::infinity();
  int wait = 0;

  BatchNetwork<float> net(spec);
  AdamState<float> adam(w.values.size());
  const AdamConfig adam_cfg{cfg.beta1, cfg.beta2, cfg.epsilon};
  std::mt19937_64 rng(cfg.seed ^ 0x5bd1e995ULL);

  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t full_steps = (order.size() + bs - 1) / bs;
  const std::size_t steps = cfg.steps_per_epoch == 0 ? full_steps : cfg.steps_per_epoch;
  std::size_t cursor = order.size();  // forces a shuffle on first use

  // Fixed, evenly spread validation subset.
  dataset::DatasetSplit val(data.test.window());
  const std::size_t n_val =
      cfg.val_samples == 0 ? data.test.size() : std::min(cfg.val_samples, data.test.size());
  val.mutable_stream() = data.test.stream();
  for (std::size_t k = 0; k < n_val; ++k) {
    val.mutable_records().push_back(data.test.records()[k * data.test.size() / n_val]);
  }

  std::vector<std::size_t> idx;
  std::uint64_t dropout_seed = cfg.seed * 7919 + 1;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = lr_schedule(epoch, cfg);
    double train_loss = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      idx.clear();
      while (idx.size() < bs) {
        if (cursor >= order.size()) {
          std::shuffle(order.begin(), order.end(), rng);
          cursor = 0;
        }
        const std::size_t take = std::min(bs - idx.size(), order.size() - cursor);
        idx.insert(idx.end(), order.begin() + cursor, order.begin() + cursor + take);
        cursor += take;
        if (order.size() < bs) break;
      }
      const Batch b = make_batch(data.train, idx, target);
      auto g = compute_gradients<float>(net, w.values, b, cfg.alpha, true, dropout_seed++,
                                        static_cast<std::size_t>(cfg.micro_batch));
      if (!std::isfinite(g.loss)) {
        throw DivergenceError("train: non-finite loss at epoch " + std::to_string(epoch));
      }
      train_loss += g.loss;
      clip_gradient_norm<float>(g.grad, cfg.clip_norm);
      adam_step<float>(w.values, g.grad, lr, adam, adam_cfg);
    }
    train_loss /= static_cast<double>(steps);
    const double val_loss = evaluate(w, val, target, cfg.alpha).loss;
    if (!std::isfinite(val_loss)) {
      throw DivergenceError("train: non-finite validation loss at epoch " + std::to_string(epoch));
    }
    const EpochRecord rec{epoch, lr, train_loss, val_loss};
    result.history.push_back(rec);
    result.epochs_run = epoch + 1;
    if (val_loss < best) {
      best = val_loss;
      result.best_epoch = epoch;
      result.weights = w;
      wait = 0;
    } else {
      ++wait;
    }
    if (progress) progress(rec, result.weights);
    if (wait >= std::max(cfg.patience, 1)) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history) {
  CsvWriter csv(path);
  csv.header({"epoch", "lr", "train_loss", "val_loss"});
  for (const auto& r : history) {
    const std::array<double, 4> v{static_cast<double>(r.epoch), r.lr, r.train_loss, r.val_loss};
    csv.row(v);
  }
}

}  // namespace prmi::neural
