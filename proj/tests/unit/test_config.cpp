#include <filesystem>

#include <gtest/gtest.h>

#include "atr/config/config.hpp"

using namespace atr;
using namespace atr::config;

#ifndef ATR_SOURCE_DIR
#error "ATR_SOURCE_DIR must point at the repository root"
#endif

namespace {

const std::filesystem::path kConfigs = std::filesystem::path(ATR_SOURCE_DIR) / "configs";

void expect_same(const RunConfig& a, const RunConfig& b) {
  EXPECT_EQ(to_yaml(a), to_yaml(b));
}

}  // namespace

TEST(Parse, EmptyGivesDefaults) {
  expect_same(parse(""), RunConfig{});
  expect_same(parse("{}"), RunConfig{});
}

TEST(Parse, DocumentedDefaultsFileMatchesBuiltIns) {
  expect_same(load(kConfigs / "default.yaml"), RunConfig{});
}

TEST(Parse, ShippedConfigsLoad) {
  for (const auto& e : std::filesystem::directory_iterator(kConfigs)) {
    if (e.path().extension() != ".yaml") continue;
    EXPECT_NO_THROW(load(e.path())) << e.path();
  }
  const RunConfig s = load(kConfigs / "smoke.yaml");
  EXPECT_EQ(s.env.robot, "a1");
  EXPECT_EQ(s.env.kind, transporter::Kind::kType1);
  EXPECT_EQ(s.train.num_envs, 64);
  EXPECT_EQ(s.net.profile, "small");
}

TEST(Parse, ReadsNestedKeys) {
  const RunConfig c = parse(R"(
robot: {preset: go1}
transporter: {kind: type2}
env: {batch: 8, seed: 42}
dr: {mode: test}
rewards: {f_tol: 80}
ppo: {learning_rate: 1.0e-3, positive_reward: false}
estimators: {roa_lambda: 0.5}
curriculum: {v_init: 0.4}
)");
  EXPECT_EQ(c.env.robot, "go1");
  EXPECT_EQ(c.env.kind, transporter::Kind::kType2);
  EXPECT_EQ(c.train.num_envs, 8);
  EXPECT_EQ(c.env.seed, 42u);
  EXPECT_EQ(c.env.dr, env::DrMode::kTest);
  EXPECT_EQ(c.env.weights.f_tol, 80.0);
  EXPECT_EQ(c.train.learning_rate, 1e-3);
  EXPECT_FALSE(c.train.positive_reward);
  EXPECT_EQ(c.train.roa_lambda, 0.5);
  EXPECT_EQ(c.train.cmd_v_init, 0.4);
}

TEST(Parse, RejectsUnknownKeys) {
  EXPECT_THROW(parse("robots: {preset: a1}"), std::invalid_argument);
  EXPECT_THROW(parse("env: {batchsize: 3}"), std::invalid_argument);
  EXPECT_THROW(parse("ppo: {lr: 3}"), std::invalid_argument);
}

TEST(Parse, RejectsInvalidValues) {
  EXPECT_THROW(parse("robot: {preset: cheetah}"), std::invalid_argument);
  EXPECT_THROW(parse("transporter: {kind: type3}"), std::invalid_argument);
  EXPECT_THROW(parse("dr: {mode: sometimes}"), std::invalid_argument);
  EXPECT_THROW(parse("rewards: {k: [1, 2, 3]}"), std::invalid_argument);
  EXPECT_THROW(parse("ppo: {gamma: 1.5}"), std::invalid_argument);
  EXPECT_THROW(parse("env: [1, 2]"), std::invalid_argument);
  EXPECT_THROW(parse("env: {batch: : :}"), std::invalid_argument);
}

TEST(Emit, RoundTripsExactly) {
  RunConfig c;
  c.env.seed = 123456789;
  c.train.learning_rate = 0.1 + 0.2;
  c.env.weights.k[14] = 1.234567890123e-7;
  c.net.temporal = "flat";
  const RunConfig back = parse(to_yaml(c));
  EXPECT_EQ(back.train.learning_rate, c.train.learning_rate);
  EXPECT_EQ(back.env.weights.k, c.env.weights.k);
  expect_same(back, c);
}

TEST(Validate, HistoryMustAgree) {
  RunConfig c;
  c.net.history = 5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}
