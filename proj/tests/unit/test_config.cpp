#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "prmi/config.hpp"
#include "prmi/errors.hpp"

namespace prmi {
namespace {

namespace fs = std::filesystem;

TEST(Config, DefaultsValidate) { EXPECT_NO_THROW(RunConfig{}.validate()); }

TEST(Config, JsonRoundTrip) {
  RunConfig c;
  c.optics.mod_depth = 0.25;
  c.mech.seed = 99;
  c.dataset.stride = 32;
  c.train_velocity.batch_size = 123;
  c.filter.covariance_update = fusion::CovarianceUpdate::kTextbook;
  c.lock.prop_gain = 3e4;
  const auto r = config_from_json(to_json(c));
  EXPECT_EQ(to_json(r), to_json(c));
  EXPECT_EQ(r.filter.covariance_update, fusion::CovarianceUpdate::kTextbook);
  EXPECT_EQ(config_hash(r), config_hash(c));
}

TEST(Config, PartialFileKeepsDefaults) {
  const auto c = config_from_json(nlohmann::json::parse(R"({"lock": {"damp_gain": 10}})"));
  EXPECT_EQ(c.lock.damp_gain, 10.0);
  EXPECT_EQ(c.lock.prop_gain, control::LockConfig{}.prop_gain);
  EXPECT_EQ(c.optics.lambda, 1.064e-6);
}

TEST(Config, RejectsUnknownSectionsAndKeys) {
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"optix": {}})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"optics": {"lamda": 1}})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"([1, 2])")), ConfigError);
}

TEST(Config, RejectsWrongTypes) {
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"optics": {"lambda": "big"}})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"mech": {"seed": -3}})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"train_position": {"batch_size": 2.5}})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"filter": {"covariance_update": "fancy"}})")), ConfigError);
}

TEST(Config, CrossSectionConsistency) {
  RunConfig c;
  c.filter.lambda = 1.55e-6;
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.mech.sample_rate = 4096;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, Overrides) {
  RunConfig c;
  apply_override(c, "lock.prop_gain=2.5e5");
  apply_override(c, "filter.covariance_update=textbook");
  apply_override(c, "dataset.seed=77");
  EXPECT_EQ(c.lock.prop_gain, 2.5e5);
  EXPECT_EQ(c.filter.covariance_update, fusion::CovarianceUpdate::kTextbook);
  EXPECT_EQ(c.dataset.seed, 77u);
  EXPECT_THROW(apply_override(c, "lock.prop_gain"), ConfigError);
  EXPECT_THROW(apply_override(c, "prop_gain=3"), ConfigError);
  EXPECT_THROW(apply_override(c, "lock.nothing=3"), ConfigError);
  EXPECT_THROW(apply_override(c, "lock.prop_gain=abc"), ConfigError);
}

TEST(Config, HashChangesWithContent) {
  RunConfig a, b;
  b.mech.q = 11;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 8u);
}

TEST(Config, FileRoundTripAndErrors) {
  const auto p = (fs::temp_directory_path() / ("prmi_cfg_" + std::to_string(::getpid()) + ".json")).string();
  RunConfig c;
  c.classical.deriv_gain = 77;
  save_config(p, c);
  EXPECT_EQ(load_config(p).classical.deriv_gain, 77.0);
  std::ofstream(p) << "{ not json";
  EXPECT_THROW(load_config(p), ConfigError);
  fs::remove(p);
  EXPECT_THROW(load_config(p), FormatError);
}

}  // namespace
}  // namespace prmi
