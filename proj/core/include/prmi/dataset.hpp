#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "prmi/dynamics.hpp"
#include "prmi/optics.hpp"

namespace prmi::dataset {

inline constexpr std::size_t kChannels = optics::kNumSignals;
inline constexpr std::size_t kDefaultWindow = 1024;

/// Scales fixed once on a long simulation and reused verbatim for training,
/// testing and inference.
struct NormalizationConstants {
  std::array<double, kChannels> signal_max_abs{};
  double pos_scale = 0.0;  // lambda / 4
  double vel_scale = 0.0;  // 2 lambda, m/s

  void validate() const;
  void normalize(const optics::OpticalSignals& s, std::span<float, kChannels> out) const;
};

/// Per-channel max |signal|; pos_scale = lambda/4, vel_scale = 2 lambda.
/// Throws ConfigError when the run is shorter than min_samples or a channel
/// is identically zero.
NormalizationConstants compute_normalization(const std::vector<optics::OpticalSignals>& run,
                                             double lambda, std::size_t min_samples = 0);

struct SampleRecord {
  std::uint64_t end_row = 0;  // last row of the window in the split's stream
  std::array<float, 2> pos_target{};
  std::array<float, 2> vel_target{};
  std::array<std::int32_t, 2> shifts{};  // Z half-wavelength shifts removed by wrap
};

/// A view of one supervised example: window rows are time, columns channels.
struct Sample {
  std::span<const float> window;  // window_length x kChannels, row-major
  std::array<float, 2> pos_target{};
  std::array<float, 2> vel_target{};
  std::array<std::int32_t, 2> shifts{};
};

/// Normalized signal streams of one or more trajectories plus the sample
/// index into them. Windows never cross trajectory boundaries.
class DatasetSplit {
 public:
  DatasetSplit() = default;
  explicit DatasetSplit(std::size_t window) : window_(window) {}

  std::size_t window() const { return window_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  std::size_t rows() const { return stream_.size() / kChannels; }

  Sample sample(std::size_t i) const;
  const std::vector<SampleRecord>& records() const { return records_; }
  const std::vector<float>& stream() const { return stream_; }

  /// Concatenates another split's stream and re-bases its records.
  void append(const DatasetSplit& other);

  std::vector<float>& mutable_stream() { return stream_; }
  std::vector<SampleRecord>& mutable_records() { return records_; }

 private:
  std::size_t window_ = kDefaultWindow;
  std::vector<float> stream_;
  std::vector<SampleRecord> records_;
};

/// Windows ending at t = window-1, window-1+stride, ... up to size-2. Targets
/// are the wrapped position at t and the forward difference (x[t+1]-x[t])*fs,
/// both scaled by the normalization constants.
DatasetSplit build_samples(const dynamics::Trajectory& traj,
                           const std::vector<optics::OpticalSignals>& signals,
                           const NormalizationConstants& norms, double lambda, std::size_t stride,
                           std::size_t window = kDefaultWindow);

struct DatasetMeta {
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::vector<std::uint64_t> train_seeds;
  std::vector<std::uint64_t> test_seeds;
  std::string config_hash;
  double free_duration = 0.0;
  double closed_loop_duration = 0.0;
  std::size_t stride = 0;
  std::size_t window = kDefaultWindow;
};

struct Dataset {
  NormalizationConstants norms;
  DatasetSplit train;
  DatasetSplit test;
  DatasetMeta meta;
};

/// Binary layout (little-endian): "PRMI", u32 version, u32 window,
/// u32 channels, u64 n_train, u64 n_test, u64 train_rows, u64 test_rows,
/// 12 x f64 normalization constants, then per split the float32 stream,
/// u64 end rows, float32 targets (pos, vel), int32 shifts; trailing CRC32.
/// Metadata goes to `<path>.meta.json`.
void save(const std::string& path, const Dataset& ds);
Dataset load(const std::string& path);

inline constexpr std::uint32_t kFormatVersion = 1;

/// JSON with signal_max_abs keyed by channel name, pos_scale and vel_scale.
void save_norms(const std::string& path, const NormalizationConstants& norms);
NormalizationConstants load_norms(const std::string& path);

}  // namespace prmi::dataset
