#include <gtest/gtest.h>

#include <sstream>

#include "looming/run_config.hpp"

using namespace looming;

TEST(RunConfig, Defaults) {
  const RunConfig cfg = make_config({}, {});
  EXPECT_EQ(cfg.grid, GridSpec{});
  EXPECT_DOUBLE_EQ(cfg.dt, 0.1);
  EXPECT_DOUBLE_EQ(cfg.thresholds.low, 0.2);
  EXPECT_DOUBLE_EQ(cfg.thresholds.medium, 0.5);
  EXPECT_DOUBLE_EQ(cfg.thresholds.high, 1.0);
  EXPECT_EQ(cfg.edge, 1u);
  EXPECT_FALSE(cfg.velocity);
}

TEST(RunConfig, ParsesEveryKey) {
  std::istringstream in(
      "# pipeline\n"
      "grid = 1000x32\n"
      "phi-span=-20,4\n"
      "dt=0.05   # faster sensor\n"
      "thresholds=0.1,0.3,0.9\n"
      "clamp=5\n"
      "fill=2\n"
      "decimate=2,1\n"
      "scale=0.5\n"
      "noise=0.01\n"
      "seed=42\n"
      "edge=0\n"
      "velocity=4,0.5,0\n");
  const RunConfig cfg = make_config(parse_config(in), {});
  EXPECT_EQ(cfg.grid.width, 1000u);
  EXPECT_EQ(cfg.grid.height, 32u);
  EXPECT_NEAR(cfg.grid.phi_min, deg_to_rad(-20), 1e-15);
  EXPECT_DOUBLE_EQ(cfg.dt, 0.05);
  EXPECT_DOUBLE_EQ(cfg.thresholds.high, 0.9);
  EXPECT_DOUBLE_EQ(cfg.clamp, 5);
  EXPECT_EQ(cfg.fill, 2u);
  EXPECT_EQ(cfg.decimate_theta, 2u);
  EXPECT_DOUBLE_EQ(cfg.scale.saturation, 0.5);
  EXPECT_DOUBLE_EQ(cfg.noise, 0.01);
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.edge, 0u);
  ASSERT_TRUE(cfg.velocity);
  EXPECT_DOUBLE_EQ(cfg.velocity->y, 0.5);
  EXPECT_DOUBLE_EQ(cfg.loom_options().clamp, 5);
}

TEST(RunConfig, FlagsOverrideFile) {
  const RunConfig cfg = make_config({{"dt", "0.2"}, {"clamp", "7"}}, {{"dt", "0.05"}});
  EXPECT_DOUBLE_EQ(cfg.dt, 0.05);
  EXPECT_DOUBLE_EQ(cfg.clamp, 7);
}

TEST(RunConfig, RejectsBadValues) {
  EXPECT_THROW(make_config({{"dt", "0"}}, {}), InvalidInput);
  EXPECT_THROW(make_config({{"dt", "abc"}}, {}), InvalidInput);
  EXPECT_THROW(make_config({{"thresholds", "0.5,0.2,1"}}, {}), InvalidInput);
  EXPECT_THROW(make_config({{"thresholds", "0.1,0.2"}}, {}), InvalidInput);
  EXPECT_THROW(make_config({{"grid", "1x64"}}, {}), InvalidInput);
  EXPECT_THROW(make_config({{"decimate", "3,1"}}, {}), InvalidInput);
  EXPECT_THROW(make_config({{"phi-span", "2,-24"}}, {}), InvalidInput);
  EXPECT_THROW(make_config({{"scale", "-1"}}, {}), InvalidInput);
  EXPECT_THROW(make_config({{"noise", "-0.1"}}, {}), InvalidInput);
  EXPECT_THROW(make_config({{"velocity", "1,inf,0"}}, {}), InvalidInput);
  EXPECT_THROW(make_config({{"colour", "red"}}, {}), InvalidInput);
}

TEST(RunConfig, MissingEqualsReportsLine) {
  std::istringstream in("dt=0.1\n\nclamp 5\n");
  try {
    parse_config(in);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.location(), 3u);
  }
}

TEST(RunConfig, EveryKeyIsAccepted) {
  const std::map<std::string, std::string> sample = {
      {"grid", "100x8"},   {"phi-span", "-10,2"}, {"dt", "0.1"},  {"thresholds", "1,2,3"},
      {"clamp", "3"},      {"fill", "1"},         {"decimate", "1,1"}, {"scale", "1"},
      {"noise", "0"},      {"seed", "1"},         {"edge", "2"},  {"velocity", "1,0,0"}};
  for (const auto& key : config_keys()) {
    RunConfig cfg;
    ASSERT_TRUE(sample.count(key)) << key;
    EXPECT_NO_THROW(apply_setting(cfg, key, sample.at(key))) << key;
  }
}
