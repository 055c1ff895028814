#include "prmi/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "prmi/errors.hpp"
#include "prmi/wrapping.hpp"

namespace prmi::dataset {

namespace {

constexpr char kMagic[4] = {'P', 'R', 'M', 'I'};

std::string meta_path(const std::string& path) { return path + ".meta.json"; }

nlohmann::json meta_to_json(const DatasetMeta& m) {
  return {{"n_train", m.n_train},
          {"n_test", m.n_test},
          {"train_seeds", m.train_seeds},
          {"test_seeds", m.test_seeds},
          {"config_hash", m.config_hash},
          {"free_duration", m.free_duration},
          {"closed_loop_duration", m.closed_loop_duration},
          {"stride", m.stride},
          {"window", m.window},
          {"format_version", kFormatVersion}};
}

DatasetMeta meta_from_json(const nlohmann::json& j) {
  DatasetMeta m;
  m.n_train = j.at("n_train").get<std::size_t>();
  m.n_test = j.at("n_test").get<std::size_t>();
  m.train_seeds = j.at("train_seeds").get<std::vector<std::uint64_t>>();
  m.test_seeds = j.at("test_seeds").get<std::vector<std::uint64_t>>();
  m.config_hash = j.at("config_hash").get<std::string>();
  m.free_duration = j.at("free_duration").get<double>();
  m.closed_loop_duration = j.at("closed_loop_duration").get<double>();
  m.stride = j.at("stride").get<std::size_t>();
  m.window = j.at("window").get<std::size_t>();
  return m;
}

std::size_t split_payload_bytes(std::uint64_t n, std::uint64_t rows) {
  return rows * kChannels * sizeof(float) + n * (sizeof(std::uint64_t) + 4 * sizeof(float) +
                                                 2 * sizeof(std::int32_t));
}

void write_split(detail::ByteWriter& w, const DatasetSplit& s) {
  w.put_span<float>(s.stream());
  for (const auto& r : s.records()) w.put(r.end_row);
  for (const auto& r : s.records()) w.put_span<float>(r.pos_target);
  for (const auto& r : s.records()) w.put_span<float>(r.vel_target);
  for (const auto& r : s.records()) w.put_span<std::int32_t>(r.shifts);
}

DatasetSplit read_split(detail::ByteReader& rd, std::size_t window, std::uint64_t n,
                        std::uint64_t rows) {
  DatasetSplit s(window);
  auto& stream = s.mutable_stream();
  stream.resize(rows * kChannels);
  rd.get_into<float>(stream);
  auto& recs = s.mutable_records();
  recs.resize(n);
  for (auto& r : recs) r.end_row = rd.get<std::uint64_t>();
  for (auto& r : recs) rd.get_into<float>(r.pos_target);
  for (auto& r : recs) rd.get_into<float>(r.vel_target);
  for (auto& r : recs) rd.get_into<std::int32_t>(r.shifts);
  for (const auto& r : recs) {
    if (r.end_row + 1 < window || r.end_row >= rows) {
      throw IntegrityError("sample window lies outside the stored stream");
    }
  }
  return s;
}

}  // namespace

void NormalizationConstants::validate() const {
  for (double m : signal_max_abs) {
    if (!(std::isfinite(m) && m > 0.0)) throw ConfigError("normalization: channel scale must be > 0");
  }
  if (!(pos_scale > 0.0) || !(vel_scale > 0.0)) throw ConfigError("normalization: scales must be > 0");
}

void NormalizationConstants::normalize(const optics::OpticalSignals& s,
                                       std::span<float, kChannels> out) const {
  const auto a = s.to_array();
  for (std::size_t c = 0; c < kChannels; ++c) {
    out[c] = static_cast<float>(a[c] / signal_max_abs[c]);
  }
}

NormalizationConstants compute_normalization(const std::vector<optics::OpticalSignals>& run,
                                             double lambda, std::size_t min_samples) {
  if (run.size() < std::max<std::size_t>(min_samples, 1)) {
    throw ConfigError("normalization: run has " + std::to_string(run.size()) +
                      " samples, need at least " + std::to_string(min_samples));
  }
  NormalizationConstants n;
  n.signal_max_abs.fill(0.0);
  for (const auto& s : run) {
    const auto a = s.to_array();
    for (std::size_t c = 0; c < kChannels; ++c) {
      n.signal_max_abs[c] = std::max(n.signal_max_abs[c], std::abs(a[c]));
    }
  }
  for (std::size_t c = 0; c < kChannels; ++c) {
    if (n.signal_max_abs[c] == 0.0) {
      throw ConfigError("normalization: channel " + std::string(optics::kSignalNames[c]) +
                        " is identically zero");
    }
  }
  n.pos_scale = lambda / 4.0;
  n.vel_scale = 2.0 * lambda;
  return n;
}

Sample DatasetSplit::sample(std::size_t i) const {
  const SampleRecord& r = records_.at(i);
  const std::size_t first = r.end_row + 1 - window_;
  return {std::span<const float>(stream_).subspan(first * kChannels, window_ * kChannels),
          r.pos_target, r.vel_target, r.shifts};
}

void DatasetSplit::append(const DatasetSplit& other) {
  if (other.window_ != window_) throw IntegrityError("cannot merge splits with different windows");
  const std::uint64_t base = rows();
  stream_.insert(stream_.end(), other.stream_.begin(), other.stream_.end());
  records_.reserve(records_.size() + other.records_.size());
  for (SampleRecord r : other.records_) {
    r.end_row += base;
    records_.push_back(r);
  }
}

DatasetSplit build_samples(const dynamics::Trajectory& traj,
                           const std::vector<optics::OpticalSignals>& signals,
                           const NormalizationConstants& norms, double lambda, std::size_t stride,
                           std::size_t window) {
  if (stride == 0) throw ConfigError("dataset: stride must be >= 1");
  if (window == 0) throw ConfigError("dataset: window must be >= 1");
  if (signals.size() != traj.size()) throw IntegrityError("dataset: trajectory/signal length mismatch");
  if (traj.size() < window + 1) {
    throw ConfigError("dataset: trajectory needs at least window+1 samples");
  }
  norms.validate();
  DatasetSplit split(window);
  auto& stream = split.mutable_stream();
  stream.resize(traj.size() * kChannels);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    norms.normalize(signals[i], std::span<float, kChannels>(stream.data() + i * kChannels, kChannels));
  }
  auto& recs = split.mutable_records();
  for (std::size_t t = window - 1; t + 1 < traj.size(); t += stride) {
    const auto& s = traj.states[t];
    const auto& next = traj.states[t + 1];
    const auto w = wrapping::wrap(s.dl_prcl, s.dl_mich, lambda);
    SampleRecord r;
    r.end_row = t;
    r.pos_target = {static_cast<float>(w.wrapped.dl_prcl / norms.pos_scale),
                    static_cast<float>(w.wrapped.dl_mich / norms.pos_scale)};
    r.vel_target = {
        static_cast<float>((next.dl_prcl - s.dl_prcl) * traj.sample_rate / norms.vel_scale),
        static_cast<float>((next.dl_mich - s.dl_mich) * traj.sample_rate / norms.vel_scale)};
    r.shifts = {w.n1, w.n2};
    recs.push_back(r);
  }
  return split;
}

void save(const std::string& path, const Dataset& ds) {
  if (ds.train.window() != ds.test.window()) throw IntegrityError("dataset: split windows differ");
  detail::ByteWriter w;
  w.put_span<char>(std::span<const char>(kMagic, 4));
  w.put<std::uint32_t>(kFormatVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ds.train.window()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(kChannels));
  w.put<std::uint64_t>(ds.train.size());
  w.put<std::uint64_t>(ds.test.size());
  w.put<std::uint64_t>(ds.train.rows());
  w.put<std::uint64_t>(ds.test.rows());
  w.put_span<double>(ds.norms.signal_max_abs);
  w.put(ds.norms.pos_scale);
  w.put(ds.norms.vel_scale);
  write_split(w, ds.train);
  write_split(w, ds.test);
  detail::append_crc(w.bytes());
  detail::write_file(path, w.bytes());

  DatasetMeta meta = ds.meta;
  meta.n_train = ds.train.size();
  meta.n_test = ds.test.size();
  meta.window = ds.train.window();
  std::ofstream m(meta_path(path));
  if (!m) throw FormatError("cannot write " + meta_path(path));
  m << meta_to_json(meta).dump(2) << '\n';
}

Dataset load(const std::string& path) {
  const std::vector<std::byte> bytes = detail::read_file(path);
  detail::ByteReader rd(bytes);
  char magic[4];
  rd.get_into<char>(magic);
  if (!std::equal(magic, magic + 4, kMagic)) throw FormatError("dataset: bad magic in " + path);
  const auto version = rd.get<std::uint32_t>();
  if (version != kFormatVersion) {
    throw VersionMismatchError("dataset: version " + std::to_string(version) + ", expected " +
                               std::to_string(kFormatVersion));
  }
  const auto window = rd.get<std::uint32_t>();
  const auto channels = rd.get<std::uint32_t>();
  if (channels != kChannels) throw IntegrityError("dataset: channel count mismatch");
  const auto n_train = rd.get<std::uint64_t>();
  const auto n_test = rd.get<std::uint64_t>();
  const auto train_rows = rd.get<std::uint64_t>();
  const auto test_rows = rd.get<std::uint64_t>();
  constexpr std::size_t norm_bytes = (kChannels + 2) * sizeof(double);
  const std::size_t expected = rd.position() + norm_bytes + split_payload_bytes(n_train, train_rows) +
                               split_payload_bytes(n_test, test_rows) + sizeof(std::uint32_t);
  if (bytes.size() < expected) throw TruncatedFileError("dataset: file shorter than its header declares");
  if (bytes.size() > expected) throw IntegrityError("dataset: trailing bytes after payload");
  detail::verify_and_strip_crc(bytes);

  Dataset ds;
  rd.get_into<double>(ds.norms.signal_max_abs);
  ds.norms.pos_scale = rd.get<double>();
  ds.norms.vel_scale = rd.get<double>();
  ds.train = read_split(rd, window, n_train, train_rows);
  ds.test = read_split(rd, window, n_test, test_rows);

  if (std::filesystem::exists(meta_path(path))) {
    std::ifstream m(meta_path(path));
    nlohmann::json j;
    try {
      m >> j;
      ds.meta = meta_from_json(j);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("dataset meta: ") + e.what());
    }
    if (ds.meta.n_train != n_train || ds.meta.n_test != n_test) {
      throw IntegrityError("dataset: meta counts do not match payload");
    }
  } else {
    ds.meta.n_train = n_train;
    ds.meta.n_test = n_test;
  }
  ds.meta.window = window;
  return ds;
}

void save_norms(const std::string& path, const NormalizationConstants& norms) {
  nlohmann::json ch = nlohmann::json::object();
  for (std::size_t c = 0; c < kChannels; ++c) {
    ch[std::string(optics::kSignalNames[c])] = norms.signal_max_abs[c];
  }
  const nlohmann::json j = {
      {"signal_max_abs", ch}, {"pos_scale", norms.pos_scale}, {"vel_scale", norms.vel_scale}};
  std::ofstream f(path);
  if (!f) throw FormatError("cannot write " + path);
  f << j.dump(2) << '\n';
}

NormalizationConstants load_norms(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw FormatError("cannot open " + path);
  NormalizationConstants n;
  try {
    nlohmann::json j;
    f >> j;
    const auto& ch = j.at("signal_max_abs");
    if (ch.size() != kChannels) throw IntegrityError("norms: expected ten channels in " + path);
    for (std::size_t c = 0; c < kChannels; ++c) {
      n.signal_max_abs[c] = ch.at(std::string(optics::kSignalNames[c])).get<double>();
    }
    n.pos_scale = j.at("pos_scale").get<double>();
    n.vel_scale = j.at("vel_scale").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("norms " + path + ": " + e.what());
  }
  try {
    n.validate();
  } catch (const ConfigError& e) {
    throw IntegrityError(std::string("norms: ") + e.what());
  }
  return n;
}

}  // namespace prmi::dataset
