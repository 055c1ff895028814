#include "prmi/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <span>

#include "prmi/checksum.hpp"
#include "prmi/errors.hpp"

namespace prmi {

namespace {

using nlohmann::json;

template <typename F>
void fields(optics::OpticalConfig& c, F&& f) {
  f("lambda", c.lambda);
  f("f_mod", c.f_mod);
  f("c", c.c);
  f("l_mich_macro", c.l_mich_macro);
  f("l_prc_macro", c.l_prc_macro);
  f("r_x", c.r_x);
  f("r_y", c.r_y);
  f("r_bs", c.r_bs);
  f("t_bs", c.t_bs);
  f("r_pr", c.r_pr);
  f("t_pr", c.t_pr);
  f("mod_depth", c.mod_depth);
  f("demod_phase_45", c.demod_phase_45);
  f("demod_phase_90", c.demod_phase_90);
}

template <typename F>
void fields(dynamics::MechConfig& c, F&& f) {
  f("f0", c.f0);
  f("q", c.q);
  f("mass_eff", c.mass_eff);
  f("drive_rms", c.drive_rms);
  f("sample_rate", c.sample_rate);
  f("seed", c.seed);
  f("warmup", c.warmup);
}

template <typename F>
void fields(pipeline::DatasetGenConfig& c, F&& f) {
  f("duration", c.duration);
  f("segment", c.segment);
  f("test_fraction", c.test_fraction);
  f("closed_loop_fraction", c.closed_loop_fraction);
  f("episode", c.episode);
  f("estimate_noise_pos", c.estimate_noise_pos);
  f("estimate_noise_vel", c.estimate_noise_vel);
  f("stride", c.stride);
  f("window", c.window);
  f("normalization_duration", c.normalization_duration);
  f("seed", c.seed);
}

template <typename F>
void fields(neural::TrainConfig& c, F&& f) {
  f("max_epochs", c.max_epochs);
  f("patience", c.patience);
  f("beta1", c.beta1);
  f("beta2", c.beta2);
  f("epsilon", c.epsilon);
  f("warmup_epochs", c.warmup_epochs);
  f("decay_epochs", c.decay_epochs);
  f("initial_lr", c.initial_lr);
  f("base_lr", c.base_lr);
  f("min_lr", c.min_lr);
  f("batch_size", c.batch_size);
  f("micro_batch", c.micro_batch);
  f("alpha", c.alpha);
  f("seed", c.seed);
  f("steps_per_epoch", c.steps_per_epoch);
  f("val_samples", c.val_samples);
  f("clip_norm", c.clip_norm);
}

template <typename F>
void fields(fusion::FilterConfig& c, F&& f) {
  f("dt", c.dt);
  f("m_half", c.m_half);
  f("vel_sigma_inflation", c.vel_sigma_inflation);
  f("covariance_update", c.covariance_update);
  f("lambda", c.lambda);
}

template <typename F>
void fields(control::LockConfig& c, F&& f) {
  f("damp_gain", c.damp_gain);
  f("prop_gain", c.prop_gain);
  f("int_gain", c.int_gain);
  f("damp_start", c.damp_start);
  f("damp_duration", c.damp_duration);
  f("int_start", c.int_start);
  f("int_duration", c.int_duration);
  f("force_clamp", c.force_clamp);
}

template <typename F>
void fields(control::ClassicalConfig& c, F&& f) {
  f("trigger_fraction", c.trigger_fraction);
  f("release_fraction", c.release_fraction);
  f("prop_gain", c.prop_gain);
  f("deriv_gain", c.deriv_gain);
  f("force_clamp", c.force_clamp);
}

template <typename F>
void fields(control::LockCriteria& c, F&& f) {
  f("final_window", c.final_window);
  f("power_fraction", c.power_fraction);
  f("min_duty", c.min_duty);
}

template <typename F>
void sections(RunConfig& c, F&& f) {
  f("optics", c.optics);
  f("mech", c.mech);
  f("dataset", c.dataset);
  f("train_position", c.train_position);
  f("train_velocity", c.train_velocity);
  f("filter", c.filter);
  f("lock", c.lock);
  f("classical", c.classical);
  f("criteria", c.criteria);
}

json value_to_json(const fusion::CovarianceUpdate& v) {
  return v == fusion::CovarianceUpdate::kPaperLiteral ? "paper_literal" : "textbook";
}

template <typename T>
json value_to_json(const T& v) {
  return v;
}

void value_from_json(const json& j, fusion::CovarianceUpdate& v, const std::string& where) {
  if (!j.is_string()) throw ConfigError(where + ": expected a string");
  const auto s = j.get<std::string>();
  if (s == "paper_literal") {
    v = fusion::CovarianceUpdate::kPaperLiteral;
  } else if (s == "textbook") {
    v = fusion::CovarianceUpdate::kTextbook;
  } else {
    throw ConfigError(where + ": expected paper_literal or textbook, got '" + s + "'");
  }
}

template <typename T>
void value_from_json(const json& j, T& v, const std::string& where) {
  if constexpr (std::is_floating_point_v<T>) {
    if (!j.is_number()) throw ConfigError(where + ": expected a number");
    v = j.get<T>();
  } else if constexpr (std::is_unsigned_v<T>) {
    if (!j.is_number_unsigned()) {
      throw ConfigError(where + ": expected a non-negative integer");
    }
    v = j.get<T>();
  } else {
    if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
    v = j.get<T>();
  }
}

template <typename S>
json section_to_json(S& s) {
  json out = json::object();
  fields(s, [&](const char* key, auto& v) { out[key] = value_to_json(v); });
  return out;
}

template <typename S>
void section_from_json(const json& j, S& s, const std::string& name) {
  if (!j.is_object()) throw ConfigError(name + ": expected an object");
  std::set<std::string> known;
  fields(s, [&](const char* key, auto&) { known.insert(key); });
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw ConfigError("unknown config key '" + name + "." + it.key() + "'");
  }
  fields(s, [&](const char* key, auto& v) {
    if (j.contains(key)) value_from_json(j.at(key), v, name + "." + key);
  });
}

}  // namespace

RunConfig::RunConfig() {
  train_velocity.batch_size = 500;
}

void RunConfig::validate() const {
  optics.validate();
  mech.validate();
  dataset.validate();
  train_position.validate();
  train_velocity.validate();
  filter.validate();
  lock.validate();
  classical.validate();
  criteria.validate();
  if (std::abs(filter.lambda - optics.lambda) > 1e-18) {
    throw ConfigError("filter.lambda must equal optics.lambda");
  }
  if (std::abs(filter.dt * mech.sample_rate - 1.0) > 1e-12) {
    throw ConfigError("filter.dt must equal 1 / mech.sample_rate");
  }
}

nlohmann::json to_json(const RunConfig& cfg) {
  RunConfig c = cfg;
  json out = json::object();
  sections(c, [&](const char* name, auto& s) { out[name] = section_to_json(s); });
  return out;
}

void merge_config(RunConfig& base, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  std::set<std::string> known;
  sections(base, [&](const char* name, auto&) { known.insert(name); });
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw ConfigError("unknown config section '" + it.key() + "'");
  }
  sections(base, [&](const char* name, auto& s) {
    if (j.contains(name)) section_from_json(j.at(name), s, name);
  });
}

RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  merge_config(c, j);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw FormatError("cannot open config " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return config_from_json(j);
}

void save_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream f(path);
  if (!f) throw FormatError("cannot write " + path);
  f << to_json(cfg).dump(2) << '\n';
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw ConfigError("override '" + assignment + "' must look like section.key=value");
  }
  const std::string section = assignment.substr(0, dot);
  const std::string key = assignment.substr(dot + 1, eq - dot - 1);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  merge_config(cfg, json{{section, {{key, value}}}});
}

std::string config_hash(const RunConfig& cfg) {
  const std::string s = to_json(cfg).dump();
  const auto crc = crc32(std::as_bytes(std::span<const char>(s.data(), s.size())));
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", crc);
  return buf;
}

}  // namespace prmi
