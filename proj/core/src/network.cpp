#include "prmi/neural/network.hpp"

#include <random>

#include <Eigen/QR>

#include "prmi/errors.hpp"

namespace prmi::neural {

namespace {

Eigen::MatrixXf slot_matrix(const std::vector<float>& v, std::size_t offset, int rows, int cols) {
  return Eigen::Map<const Eigen::MatrixXf>(v.data() + offset, rows, cols);
}

Eigen::VectorXf slot_vector(const std::vector<float>& v, std::size_t offset, int rows) {
  return Eigen::Map<const Eigen::VectorXf>(v.data() + offset, rows);
}

void glorot_uniform(std::vector<float>& v, const TensorSlot& s, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / (s.rows + s.cols));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (std::size_t i = 0; i < s.size(); ++i) v[s.offset + i] = static_cast<float>(u(rng));
}

void orthogonal(std::vector<float>& v, const TensorSlot& s, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd a(s.rows, s.cols);
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, j) = g(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(s.rows, s.cols);
  // Sign fix so the distribution is uniform over orthogonal matrices.
  const Eigen::VectorXd d = qr.matrixQR().diagonal();
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    if (d(j) < 0) q.col(j) *= -1.0;
  }
  Eigen::Map<Eigen::MatrixXf>(v.data() + s.offset, s.rows, s.cols) = q.cast<float>();
}

}  // namespace

ModelWeights ModelWeights::zeros(const ModelSpec& spec) {
  return {spec, std::vector<float>(neural::parameter_count(spec), 0.0f)};
}

ModelWeights ModelWeights::initialize(const ModelSpec& spec, std::uint64_t seed) {
  ModelWeights w = zeros(spec);
  const ParameterLayout layout(spec);
  std::mt19937_64 rng(seed);
  for (const auto& s : layout.slots()) {
    if (s.cols == 1) continue;  // biases stay zero
    if (s.name.ends_with("recurrent_kernel")) {
      orthogonal(w.values, s, rng);
    } else {
      glorot_uniform(w.values, s, rng);
    }
  }
  return w;
}

template <typename T>
Vector<T> gru_cell_forward(const GruParams<T>& p, const Vector<T>& x, const Vector<T>& h) {
  const Eigen::Index n = p.units();
  const Vector<T> ax = p.kernel * x + p.input_bias;
  const Vector<T> au = p.recurrent_kernel * h + p.recurrent_bias;
  const auto sigmoid = [](auto v) { return (T(1) + (-v).exp()).inverse(); };
  const auto r = sigmoid(ax.head(n).array() + au.head(n).array()).eval();
  const auto z = sigmoid(ax.segment(n, n).array() + au.segment(n, n).array()).eval();
  const auto c = (ax.tail(n).array() + r * au.tail(n).array()).tanh().eval();
  return ((T(1) - z) * c + z * h.array()).matrix();
}

template Vector<float> gru_cell_forward(const GruParams<float>&, const Vector<float>&, const Vector<float>&);
template Vector<double> gru_cell_forward(const GruParams<double>&, const Vector<double>&, const Vector<double>&);

GruParams<double> gru_params(const ModelWeights& w, std::size_t index) {
  const ParameterLayout layout(w.spec);
  const GruSlots& g = layout.grus().at(index);
  const int h3 = 3 * g.units;
  return {slot_matrix(w.values, g.kernel, h3, g.inputs).cast<double>(),
          slot_matrix(w.values, g.recurrent_kernel, h3, g.units).cast<double>(),
          slot_vector(w.values, g.input_bias, h3).cast<double>(),
          slot_vector(w.values, g.recurrent_bias, h3).cast<double>()};
}

StreamingModel::StreamingModel(const ModelWeights& weights) : spec_(weights.spec) {
  spec_.validate();
  if (spec_.head_width != 2) throw ConfigError("streaming: head width must be 2");
  const ParameterLayout layout(spec_);
  if (weights.values.size() != layout.total()) {
    throw ShapeMismatchError("streaming: weight count does not match spec");
  }
  const auto& v = weights.values;
  for (const auto& g : layout.grus()) {
    const int h3 = 3 * g.units;
    grus_.push_back({slot_matrix(v, g.kernel, h3, g.inputs), slot_matrix(v, g.recurrent_kernel, h3, g.units),
                     slot_vector(v, g.input_bias, h3), slot_vector(v, g.recurrent_bias, h3)});
  }
  const auto dense_specs = spec_.dense_layers();
  for (std::size_t i = 0; i < layout.denses().size(); ++i) {
    const auto& d = layout.denses()[i];
    denses_.push_back({slot_matrix(v, d.kernel, d.units, d.inputs), slot_vector(v, d.bias, d.units),
                       static_cast<float>(dense_specs[i].leaky_slope)});
  }
  const auto& m = layout.mean_head();
  const auto& s = layout.std_head();
  mean_ = {slot_matrix(v, m.kernel, m.units, m.inputs), slot_vector(v, m.bias, m.units), 0.0f};
  std_ = {slot_matrix(v, s.kernel, s.units, s.inputs), slot_vector(v, s.bias, s.units), 0.0f};
}

StreamState StreamingModel::make_state() const {
  StreamState st;
  for (const auto& g : grus_) {
    const auto h = g.recurrent_kernel.cols();
    st.hidden.push_back(Eigen::VectorXf::Zero(h));
    st.next_hidden.push_back(Eigen::VectorXf::Zero(h));
    st.input_proj.push_back(Eigen::VectorXf::Zero(3 * h));
    st.recurrent_proj.push_back(Eigen::VectorXf::Zero(3 * h));
  }
  for (const auto& d : denses_) st.activations.push_back(Eigen::VectorXf::Zero(d.bias.size()));
  st.input = Eigen::VectorXf::Zero(spec_.input_width);
  reset(st);
  return st;
}

void StreamingModel::reset(StreamState& st) const {
  for (auto& h : st.hidden) h.setZero();
  st.last = {};
  st.steps = 0;
}

const GaussianEstimate& StreamingModel::step(StreamState& st, std::span<const float> sample) const {
  if (sample.size() != static_cast<std::size_t>(spec_.input_width)) {
    throw ShapeMismatchError("streaming: sample width does not match the model input");
  }
  st.input = Eigen::Map<const Eigen::VectorXf>(sample.data(), spec_.input_width);
  const Eigen::VectorXf* x = &st.input;
  for (std::size_t l = 0; l < grus_.size(); ++l) {
    const Gru& g = grus_[l];
    const Eigen::Index n = g.recurrent_kernel.cols();
    Eigen::VectorXf& ax = st.input_proj[l];
    Eigen::VectorXf& au = st.recurrent_proj[l];
    Eigen::VectorXf& h = st.hidden[l];
    Eigen::VectorXf& out = st.next_hidden[l];
    ax.noalias() = g.kernel * *x;
    ax += g.input_bias;
    au.noalias() = g.recurrent_kernel * h;
    au += g.recurrent_bias;
    auto r = ax.head(n).array();
    auto z = ax.segment(n, n).array();
    r = (1.0f + (-(r + au.head(n).array())).exp()).inverse();
    z = (1.0f + (-(z + au.segment(n, n).array())).exp()).inverse();
    auto c = ax.tail(n).array();
    c = (c + r * au.tail(n).array()).tanh();
    out.array() = c + z * (h.array() - c);
    h.swap(out);
    x = &h;
  }
  for (std::size_t i = 0; i < denses_.size(); ++i) {
    const Dense& d = denses_[i];
    Eigen::VectorXf& a = st.activations[i];
    a.noalias() = d.kernel * *x;
    a += d.bias;
    a = a.array().max(d.slope * a.array());
    x = &a;
  }
  st.head_mu.noalias() = mean_.kernel * *x;
  st.head_mu += mean_.bias;
  st.head_pre.noalias() = std_.kernel * *x;
  st.head_pre += std_.bias;
  for (int k = 0; k < 2; ++k) {
    st.last.mu[k] = st.head_mu[k];
    st.last.sigma[k] = softplus(static_cast<double>(st.head_pre[k]));
  }
  ++st.steps;
  return st.last;
}

GaussianEstimate forward_window(const ModelWeights& weights, std::span<const float> window) {
  const StreamingModel model(weights);
  StreamState st = model.make_state();
  const auto width = static_cast<std::size_t>(weights.spec.input_width);
  if (window.size() % width != 0 || window.empty()) {
    throw ShapeMismatchError("forward_window: window size is not a multiple of the input width");
  }
  for (std::size_t row = 0; row < window.size() / width; ++row) {
    model.step(st, window.subspan(row * width, width));
  }
  return st.last;
}

}  // namespace prmi::neural
