#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "prmi/control.hpp"
#include "prmi/dynamics.hpp"
#include "prmi/fusion.hpp"
#include "prmi/lock.hpp"
#include "prmi/neural/training.hpp"
#include "prmi/optics.hpp"
#include "prmi/pipeline.hpp"

namespace prmi {

/// Every tunable of every stage. Files are JSON objects whose sections and
/// keys mirror the member names; unknown keys are rejected and missing keys
/// keep their defaults.
struct RunConfig {
  optics::OpticalConfig optics;
  dynamics::MechConfig mech;
  pipeline::DatasetGenConfig dataset;
  neural::TrainConfig train_position;
  neural::TrainConfig train_velocity;
  fusion::FilterConfig filter;
  control::LockConfig lock;
  control::ClassicalConfig classical;
  control::LockCriteria criteria;

  RunConfig();

  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);

/// Throws ConfigError on unknown sections or keys and on wrong value types.
RunConfig config_from_json(const nlohmann::json& j);
/// Applies the keys present in `j` on top of `base`.
void merge_config(RunConfig& base, const nlohmann::json& j);

RunConfig load_config(const std::string& path);
void save_config(const std::string& path, const RunConfig& cfg);

/// Applies "section.key=value" where value is parsed as JSON, falling back to
/// a plain string.
void apply_override(RunConfig& cfg, const std::string& assignment);

/// CRC32 of the canonical JSON dump, as 8 hex digits.
std::string config_hash(const RunConfig& cfg);

}  // namespace prmi
