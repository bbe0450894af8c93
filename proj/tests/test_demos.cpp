#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "pipeforge/config.hpp"
#include "pipeforge/demos.hpp"
#include "pipeforge/errors.hpp"

using namespace pipeforge;

namespace {

Demonstration record(ObsMode group, Condition condition, std::uint64_t seed) {
  const Config cfg = Config::desk();
  PipeEnv env(cfg.sim, group);
  return record_demo(env, cfg.expert, group, condition, seed, demo_config_hash(cfg));
}

std::string schema_error(const std::string& text) {
  try {
    parse_demo(text);
  } catch (const SchemaViolation& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Expert, FarOnAxisPointsTowardWaypoint) {
  const Config cfg = Config::desk();
  PipeEnv env(cfg.sim);
  env.reset(Condition::kFixed, 0);
  std::mt19937_64 rng(0);
  const Vec3 waypoint = env.entry_point() - env.outer_axis() * cfg.expert.approach_standoff;
  // Slightly off axis so the approach phase is active.
  env.set_handler(env.state().handler_pos + Vec3{-0.2, 0.03, 0.0});
  const Vec3 a = scripted_expert_action(env, cfg.expert, rng);
  EXPECT_GT(a.dot(waypoint - env.tip()), 0.0);
  for (double c : {a.x, a.y, a.z}) EXPECT_LE(std::abs(c), cfg.sim.action_clamp);
}

TEST(Expert, BacksOffAgainstFrictionInContact) {
  Config cfg = Config::desk();
  cfg.expert.jitter_fraction = 0.0;
  PipeEnv env(cfg.sim);
  env.reset(Condition::kFixed, 0);
  env.set_handler(env.state().handler_pos + Vec3{0.55, 0.0, 0.0});
  for (int i = 0; i < 40; ++i) env.step({3, 5, 0});
  const ForceState& fs = env.state().force_state;
  ASSERT_GT(fs.f_normal.norm(), cfg.expert.reactive_threshold);
  ASSERT_GT(fs.f_friction.norm(), 0.1);
  ExpertConfig passive = cfg.expert;
  passive.reactive_gain = 0.0;
  std::mt19937_64 r1(0), r2(0);
  const Vec3 reactive = scripted_expert_action(env, cfg.expert, r1);
  const Vec3 plain = scripted_expert_action(env, passive, r2);
  EXPECT_GT((reactive - plain).dot(-fs.f_friction), 0.0);
}

TEST(Expert, GateOnFixedCondition) {
  const Config cfg = Config::desk();
  PipeEnv env(cfg.sim);
  int wins = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Demonstration d = record_demo(env, cfg.expert, ObsMode::kForce, Condition::kFixed, s, "");
    wins += d.succeeded() ? 1 : 0;
    EXPECT_LE(d.transitions.size(), 2000u);
  }
  EXPECT_GE(wins, 19);
}

TEST(Record, FixedSeedOneSucceedsWithConsistentObservations) {
  const Demonstration d = record(ObsMode::kForce, Condition::kFixed, 1);
  ASSERT_FALSE(d.transitions.empty());
  EXPECT_TRUE(d.succeeded());
  EXPECT_TRUE(d.transitions.back().done);
  for (const auto& t : d.transitions) EXPECT_EQ(t.obs.size(), 8u);
  const Demonstration v = record(ObsMode::kVisual, Condition::kFixed, 1);
  for (const auto& t : v.transitions) EXPECT_EQ(t.obs.size(), 258u);
  EXPECT_EQ(d.meta.source, DemoSource::kScripted);
}

TEST(Record, SameSeedGivesByteIdenticalFile) {
  EXPECT_EQ(serialize_demo(record(ObsMode::kForce, Condition::kInnerRandom, 4)),
            serialize_demo(record(ObsMode::kForce, Condition::kInnerRandom, 4)));
}

TEST(Serialize, RoundTripIsExact) {
  for (const ObsMode g : {ObsMode::kForce, ObsMode::kVisual}) {
    const Demonstration d = record(g, Condition::kInnerRandom, 2);
    const std::string text = serialize_demo(d);
    EXPECT_EQ(parse_demo(text), d);
    EXPECT_EQ(serialize_demo(parse_demo(text)), text);
  }
}

TEST(Serialize, FileRoundTrip) {
  const Demonstration d = record(ObsMode::kForce, Condition::kFixed, 3);
  const auto path = std::filesystem::temp_directory_path() / "pipeforge_demo_roundtrip.jsonl";
  save_demo(d, path.string());
  EXPECT_EQ(load_demo(path.string()), d);
  std::filesystem::remove(path);
  EXPECT_THROW(load_demo(path.string()), std::runtime_error);
}

TEST(Serialize, HeaderFormat) {
  const Demonstration d = record(ObsMode::kForce, Condition::kFixed, 3);
  const std::string text = serialize_demo(d);
  const std::string header = text.substr(0, text.find('\n'));
  EXPECT_EQ(header, "{\"schema_version\":1,\"group\":\"force\",\"condition\":\"fixed\",\"seed\":3,"
                    "\"source\":\"scripted\",\"config_hash\":\"" +
                        d.meta.config_hash + "\"}");
}

TEST(Serialize, SchemaViolations) {
  const Demonstration d = record(ObsMode::kForce, Condition::kFixed, 1);
  std::string text = serialize_demo(d);

  // Truncated mid-record.
  EXPECT_FALSE(schema_error(text.substr(0, text.size() - 20)).empty());
  EXPECT_FALSE(schema_error("").empty());

  // A 7-element force observation on the first transition (line 2).
  Demonstration bad = d;
  bad.transitions[0].obs.pop_back();
  const std::string msg = schema_error(serialize_demo(bad));
  EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;

  EXPECT_FALSE(schema_error("{\"schema_version\":2}\n").empty());
  EXPECT_FALSE(schema_error("not json\n").empty());
}

TEST(Validate, ScriptedDemoPasses) {
  const Config cfg = Config::desk();
  const Demonstration d = record(ObsMode::kVisual, Condition::kFixed, 1);
  const ValidationReport r = validate_demo(d, cfg.sim, demo_config_hash(cfg));
  EXPECT_TRUE(r.ok) << (r.reasons.empty() ? "" : r.reasons.front());
}

TEST(Validate, ClampViolation) {
  const Config cfg = Config::desk();
  Demonstration d = record(ObsMode::kForce, Condition::kFixed, 1);
  d.transitions[3].action.y = 11.0;
  const ValidationReport r = validate_demo(d, cfg.sim);
  EXPECT_FALSE(r.ok);
  ASSERT_FALSE(r.reasons.empty());
  EXPECT_NE(r.reasons.front().find("clamp"), std::string::npos);
}

TEST(Validate, OneHotViolation) {
  const Config cfg = Config::desk();
  Demonstration d = record(ObsMode::kVisual, Condition::kFixed, 1);
  d.transitions[0].obs[0] = 1.0;
  d.transitions[0].obs[1] = 1.0;
  d.transitions[0].obs[2] = 0.0;
  const ValidationReport r = validate_demo(d, cfg.sim);
  EXPECT_FALSE(r.ok);
}

TEST(Validate, StepOrderTerminalAndHash) {
  const Config cfg = Config::desk();
  const Demonstration good = record(ObsMode::kForce, Condition::kFixed, 1);
  Demonstration d = good;
  std::swap(d.transitions[1].step, d.transitions[2].step);
  EXPECT_FALSE(validate_demo(d, cfg.sim).ok);
  d = good;
  d.transitions.pop_back();
  EXPECT_FALSE(validate_demo(d, cfg.sim).ok);
  EXPECT_FALSE(validate_demo(good, cfg.sim, "0000000000000000").ok);
  d = good;
  d.transitions.clear();
  EXPECT_FALSE(validate_demo(d, cfg.sim).ok);
}
