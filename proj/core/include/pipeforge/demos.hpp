#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pipeforge/config.hpp"
#include "pipeforge/env.hpp"

namespace pipeforge {

enum class DemoSource { kScripted, kTeleop };

struct Transition {
  long step = 0;
  Observation obs;
  Vec3 action;
  double reward = 0.0;
  bool done = false;

  bool operator==(const Transition&) const = default;
};

struct DemoMetadata {
  ObsMode group = ObsMode::kForce;  // force or visual
  Condition condition = Condition::kFixed;
  std::uint64_t seed = 0;
  DemoSource source = DemoSource::kScripted;
  std::string config_hash;

  bool operator==(const DemoMetadata&) const = default;
};

struct Demonstration {
  DemoMetadata meta;
  std::vector<Transition> transitions;

  /// Last transition closes the episode with the success bonus.
  bool succeeded() const;
  bool operator==(const Demonstration&) const = default;
};

/// Hash recorded into demo headers and checked by training: the environment section only.
std::string demo_config_hash(const Config& config);

/// Force-reactive phase controller with privileged access to the scene layout.
/// Phases: approach a standoff waypoint on the bore axis, align, insert, and back off
/// along -F_friction whenever the normal force exceeds the threshold.
Vec3 scripted_expert_action(const PipeEnv& env, const ExpertConfig& expert,
                            std::mt19937_64& rng);

/// Rolls the expert out from reset(condition, seed) until the episode ends.
Demonstration record_demo(PipeEnv& env, const ExpertConfig& expert, ObsMode group,
                          Condition condition, std::uint64_t seed,
                          const std::string& config_hash);

/// JSON lines: a header object, then one object per transition.
std::string serialize_demo(const Demonstration& demo);
Demonstration parse_demo(const std::string& text);
void save_demo(const Demonstration& demo, const std::string& path);
Demonstration load_demo(const std::string& path);

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> reasons;
};

ValidationReport validate_demo(const Demonstration& demo, const SimConfig& sim,
                               const std::string& expected_config_hash = {});

}  // namespace pipeforge
