#include "prmi/neural/weights_io.hpp"

#include <algorithm>

#include "binary_io.hpp"
#include "prmi/errors.hpp"

namespace prmi::neural {

namespace {

constexpr char kMagic[4] = {'P', 'R', 'M', 'W'};

void put_spec(detail::ByteWriter& w, const ModelSpec& s) {
  w.put_string(s.name);
  w.put<std::int32_t>(s.input_width);
  w.put<std::int32_t>(s.head_width);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.layers.size()));
  for (const auto& l : s.layers) {
    w.put<std::int32_t>(l.kind == LayerKind::kGru ? 0 : 1);
    w.put<std::int32_t>(l.units);
    w.put<double>(l.dropout);
    w.put<double>(l.leaky_slope);
  }
}

ModelSpec get_spec(detail::ByteReader& rd) {
  ModelSpec s;
  s.name = rd.get_string();
  s.input_width = rd.get<std::int32_t>();
  s.head_width = rd.get<std::int32_t>();
  const auto n = rd.get<std::uint32_t>();
  if (n > 1024) throw IntegrityError("weights: implausible layer count");
  for (std::uint32_t i = 0; i < n; ++i) {
    LayerSpec l;
    const auto kind = rd.get<std::int32_t>();
    if (kind != 0 && kind != 1) throw IntegrityError("weights: unknown layer kind");
    l.kind = kind == 0 ? LayerKind::kGru : LayerKind::kDense;
    l.units = rd.get<std::int32_t>();
    l.dropout = rd.get<double>();
    l.leaky_slope = rd.get<double>();
    s.layers.push_back(l);
  }
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw IntegrityError(std::string("weights: invalid stored spec: ") + e.what());
  }
  return s;
}

}  // namespace

void save_weights(const std::string& path, const ModelWeights& weights) {
  const ParameterLayout layout(weights.spec);
  if (weights.values.size() != layout.total()) {
    throw ShapeMismatchError("weights: value count does not match spec");
  }
  detail::ByteWriter w;
  w.put_span<char>(std::span<const char>(kMagic, 4));
  w.put<std::uint32_t>(kWeightsFormatVersion);
  put_spec(w, weights.spec);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(layout.slots().size()));
  for (const auto& s : layout.slots()) {
    w.put_string(s.name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.rows));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.cols));
    w.put_span<float>(std::span<const float>(weights.values).subspan(s.offset, s.size()));
  }
  detail::append_crc(w.bytes());
  detail::write_file(path, w.bytes());
}

ModelWeights load_weights(const std::string& path) {
  const std::vector<std::byte> bytes = detail::read_file(path);
  detail::ByteReader head(bytes);
  char magic[4];
  head.get_into<char>(magic);
  if (!std::equal(magic, magic + 4, kMagic)) throw FormatError("weights: bad magic in " + path);
  const auto version = head.get<std::uint32_t>();
  if (version != kWeightsFormatVersion) {
    throw VersionMismatchError("weights: version " + std::to_string(version) + ", expected " +
                               std::to_string(kWeightsFormatVersion));
  }
  // Size check before the checksum so truncation is reported as such.
  const ModelSpec stored = get_spec(head);
  std::size_t expected = head.position() + sizeof(std::uint32_t) + sizeof(std::uint32_t);
  const ParameterLayout stored_layout(stored);
  for (const auto& s : stored_layout.slots()) {
    expected += sizeof(std::uint32_t) + s.name.size() + 2 * sizeof(std::uint32_t) + s.size() * sizeof(float);
  }
  if (bytes.size() < expected) throw TruncatedFileError("weights: " + path + " is truncated");
  const auto payload = detail::verify_and_strip_crc(bytes);
  detail::ByteReader rd(payload);
  rd.get_into<char>(magic);
  rd.get<std::uint32_t>();

  ModelWeights w;
  w.spec = get_spec(rd);
  const ParameterLayout layout(w.spec);
  const auto count = rd.get<std::uint32_t>();
  if (count != layout.slots().size()) {
    throw ShapeMismatchError("weights: tensor count " + std::to_string(count) + ", spec needs " +
                             std::to_string(layout.slots().size()));
  }
  w.values.assign(layout.total(), 0.0f);
  for (const auto& s : layout.slots()) {
    const std::string name = rd.get_string();
    const auto rows = rd.get<std::uint32_t>();
    const auto cols = rd.get<std::uint32_t>();
    if (name != s.name || rows != static_cast<std::uint32_t>(s.rows) ||
        cols != static_cast<std::uint32_t>(s.cols)) {
      throw ShapeMismatchError("weights: tensor " + name + " (" + std::to_string(rows) + "x" +
                               std::to_string(cols) + ") does not match " + s.name + " (" +
                               std::to_string(s.rows) + "x" + std::to_string(s.cols) + ")");
    }
    rd.get_into<float>(std::span<float>(w.values).subspan(s.offset, s.size()));
  }
  if (rd.remaining() != 0) throw IntegrityError("weights: trailing bytes after tensors");
  return w;
}

ModelWeights load_weights(const std::string& path, const ModelSpec& expected) {
  ModelWeights w = load_weights(path);
  if (!(w.spec == expected)) {
    throw ShapeMismatchError("weights: " + path + " holds model '" + w.spec.name +
                             "' whose architecture differs from '" + expected.name + "'");
  }
  return w;
}

}  // namespace prmi::neural
