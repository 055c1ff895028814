#include "prmi/neural/model_spec.hpp"

#include "prmi/errors.hpp"

namespace prmi::neural {

namespace {

LayerSpec gru(int units, double dropout = 0.0) { return {LayerKind::kGru, units, dropout, 0.0}; }
LayerSpec dense(int units) { return {LayerKind::kDense, units, 0.3, 0.3}; }

}  // namespace

ModelSpec ModelSpec::position_default() {
  return {"position", 10, 2, {gru(15), gru(128, 0.3), dense(64), dense(32), dense(16)}};
}

ModelSpec ModelSpec::velocity_default() {
  return {"velocity", 10, 2, {gru(20), gru(128, 0.3), dense(110), dense(32), dense(17)}};
}

void ModelSpec::validate() const {
  if (input_width <= 0 || head_width <= 0) throw ConfigError("model: widths must be positive");
  bool seen_dense = false;
  int grus = 0;
  for (const auto& l : layers) {
    if (l.units <= 0) throw ConfigError("model: layer units must be positive");
    if (!(l.dropout >= 0.0 && l.dropout < 1.0)) throw ConfigError("model: dropout must lie in [0,1)");
    if (l.kind == LayerKind::kGru) {
      if (seen_dense) throw ConfigError("model: GRU layers must precede dense layers");
      ++grus;
    } else {
      seen_dense = true;
    }
  }
  if (grus == 0) throw ConfigError("model: at least one GRU layer is required");
}

std::vector<LayerSpec> ModelSpec::gru_layers() const {
  std::vector<LayerSpec> out;
  for (const auto& l : layers) {
    if (l.kind == LayerKind::kGru) out.push_back(l);
  }
  return out;
}

std::vector<LayerSpec> ModelSpec::dense_layers() const {
  std::vector<LayerSpec> out;
  for (const auto& l : layers) {
    if (l.kind == LayerKind::kDense) out.push_back(l);
  }
  return out;
}

ParameterLayout::ParameterLayout(const ModelSpec& spec) {
  spec.validate();
  int width = spec.input_width;
  int gi = 0;
  int di = 0;
  for (const auto& l : spec.layers) {
    const int h = l.units;
    if (l.kind == LayerKind::kGru) {
      const std::string p = "gru" + std::to_string(gi++) + "/";
      GruSlots g;
      g.inputs = width;
      g.units = h;
      g.kernel = add(p + "kernel", 3 * h, width);
      g.recurrent_kernel = add(p + "recurrent_kernel", 3 * h, h);
      g.input_bias = add(p + "input_bias", 3 * h, 1);
      g.recurrent_bias = add(p + "recurrent_bias", 3 * h, 1);
      grus_.push_back(g);
    } else {
      const std::string p = "dense" + std::to_string(di++) + "/";
      DenseSlots d;
      d.inputs = width;
      d.units = h;
      d.kernel = add(p + "kernel", h, width);
      d.bias = add(p + "bias", h, 1);
      denses_.push_back(d);
    }
    width = h;
  }
  mean_ = {width, spec.head_width, add("mean/kernel", spec.head_width, width), add("mean/bias", spec.head_width, 1)};
  std_ = {width, spec.head_width, add("std/kernel", spec.head_width, width), add("std/bias", spec.head_width, 1)};
}

std::size_t ParameterLayout::add(const std::string& name, int rows, int cols) {
  TensorSlot s{name, rows, cols, total_};
  total_ += s.size();
  slots_.push_back(std::move(s));
  return slots_.back().offset;
}

std::size_t parameter_count(const ModelSpec& spec) { return ParameterLayout(spec).total(); }

std::size_t gru_parameter_count(int inputs, int units) {
  const auto in = static_cast<std::size_t>(inputs);
  const auto h = static_cast<std::size_t>(units);
  return 3 * (in * h + h * h + 2 * h);
}

}  // namespace prmi::neural
