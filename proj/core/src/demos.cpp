#include "pipeforge/demos.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "pipeforge/errors.hpp"

namespace pipeforge {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string_view to_string(DemoSource s) { return s == DemoSource::kScripted ? "scripted" : "teleop"; }

Vec3 clamp_action(const Vec3& a, double clamp) {
  return {std::clamp(a.x, -clamp, clamp), std::clamp(a.y, -clamp, clamp),
          std::clamp(a.z, -clamp, clamp)};
}

}  // namespace

bool Demonstration::succeeded() const {
  // The success step carries the +1 bonus; every other step is at most 0.
  return !transitions.empty() && transitions.back().done && transitions.back().reward > 0.5;
}

std::string demo_config_hash(const Config& config) { return hash_hex(config.env_hash()); }

Vec3 scripted_expert_action(const PipeEnv& env, const ExpertConfig& expert,
                            std::mt19937_64& rng) {
  const SimConfig& sim = env.config();
  const EnvState& s = env.state();
  const Vec3 axis = env.outer_axis();
  const Vec3 entry = env.entry_point();
  const Vec3 tip = env.tip();

  const Vec3 rel = tip - entry;
  const double axial = rel.dot(axis);
  const Vec3 lateral = rel - axis * axial;

  Vec3 v_des;
  if (axial < 0.0 && lateral.norm() > expert.align_tolerance) {
    const Vec3 waypoint = entry - axis * expert.approach_standoff;
    v_des = (waypoint - tip) * expert.position_gain;
    if (const double speed = v_des.norm(); speed > expert.approach_speed) {
      v_des *= expert.approach_speed / speed;
    }
  } else {
    v_des = axis * expert.insert_speed - lateral * expert.position_gain;
  }
  Vec3 action = (v_des - s.velocity) * expert.velocity_gain + v_des * sim.viscous_damping;

  const ForceState& fs = s.force_state;
  if (fs.f_normal.norm() > expert.reactive_threshold) {
    action -= fs.f_friction * expert.reactive_gain;
  }
  action = clamp_action(action, sim.action_clamp);

  std::normal_distribution<double> jitter(0.0, expert.jitter_fraction * sim.action_clamp);
  action += Vec3{jitter(rng), jitter(rng), jitter(rng)};
  return clamp_action(action, sim.action_clamp);
}

Demonstration record_demo(PipeEnv& env, const ExpertConfig& expert, ObsMode group,
                          Condition condition, std::uint64_t seed,
                          const std::string& config_hash) {
  if (group == ObsMode::kBaseline) throw InvalidArgument("demo group must be force or visual");
  Demonstration demo;
  demo.meta = {group, condition, seed, DemoSource::kScripted, config_hash};
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  env.reset(condition, seed);
  for (long step = 0;; ++step) {
    Observation obs = group == ObsMode::kForce ? env.observe_force() : env.observe_visual();
    const Vec3 action = scripted_expert_action(env, expert, rng);
    const StepResult r = env.step(action);
    demo.transitions.push_back({step, std::move(obs), action, r.reward, r.done});
    if (r.done) break;
  }
  return demo;
}

std::string serialize_demo(const Demonstration& demo) {
  std::string out;
  ordered_json header;
  header["schema_version"] = 1;
  header["group"] = std::string(to_string(demo.meta.group));
  header["condition"] = std::string(to_string(demo.meta.condition));
  header["seed"] = demo.meta.seed;
  header["source"] = std::string(to_string(demo.meta.source));
  header["config_hash"] = demo.meta.config_hash;
  out += header.dump();
  out += '\n';
  for (const auto& t : demo.transitions) {
    ordered_json line;
    line["step"] = t.step;
    line["obs"] = t.obs;
    line["action"] = {t.action.x, t.action.y, t.action.z};
    line["reward"] = t.reward;
    line["done"] = t.done;
    out += line.dump();
    out += '\n';
  }
  return out;
}

Demonstration parse_demo(const std::string& text) {
  Demonstration demo;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::size_t expected_obs = 0;
  bool ended_with_newline = text.empty() || text.back() == '\n';

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) throw SchemaViolation("empty line", line_no);
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw SchemaViolation(std::string("malformed JSON: ") + e.what(), line_no);
    }
    try {
      if (line_no == 1) {
        if (j.at("schema_version").get<int>() != 1) {
          throw SchemaViolation("unsupported schema_version", line_no);
        }
        const auto group = j.at("group").get<std::string>();
        if (group != "force" && group != "visual") {
          throw SchemaViolation("group must be force or visual", line_no);
        }
        demo.meta.group = parse_obs_mode(group);
        demo.meta.condition = parse_condition(j.at("condition").get<std::string>());
        demo.meta.seed = j.at("seed").get<std::uint64_t>();
        const auto source = j.at("source").get<std::string>();
        if (source != "scripted" && source != "teleop") {
          throw SchemaViolation("source must be scripted or teleop", line_no);
        }
        demo.meta.source = source == "scripted" ? DemoSource::kScripted : DemoSource::kTeleop;
        demo.meta.config_hash = j.at("config_hash").get<std::string>();
        expected_obs = obs_dim(demo.meta.group);
        continue;
      }
      Transition t;
      t.step = j.at("step").get<long>();
      t.obs = j.at("obs").get<std::vector<double>>();
      if (t.obs.size() != expected_obs) {
        throw SchemaViolation("observation has " + std::to_string(t.obs.size()) +
                                  " elements, expected " + std::to_string(expected_obs),
                              line_no);
      }
      const auto action = j.at("action").get<std::vector<double>>();
      if (action.size() != 3) throw SchemaViolation("action must have 3 elements", line_no);
      t.action = {action[0], action[1], action[2]};
      t.reward = j.at("reward").get<double>();
      t.done = j.at("done").get<bool>();
      demo.transitions.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      throw SchemaViolation(std::string("missing or mistyped field: ") + e.what(), line_no);
    } catch (const ConfigError& e) {
      throw SchemaViolation(e.what(), line_no);
    }
  }
  if (line_no == 0) throw SchemaViolation("empty demonstration file", 0);
  if (!ended_with_newline) throw SchemaViolation("truncated final line", line_no);
  if (demo.transitions.empty()) throw SchemaViolation("no transitions", line_no);
  return demo;
}

void save_demo(const Demonstration& demo, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write demonstration '" + path + "'");
  out << serialize_demo(demo);
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

Demonstration load_demo(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read demonstration '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_demo(ss.str());
}

ValidationReport validate_demo(const Demonstration& demo, const SimConfig& sim,
                               const std::string& expected_config_hash) {
  ValidationReport report;
  auto fail = [&](std::string reason) {
    report.ok = false;
    report.reasons.push_back(std::move(reason));
  };
  if (demo.meta.group == ObsMode::kBaseline) fail("group must be force or visual");
  if (!expected_config_hash.empty() && demo.meta.config_hash != expected_config_hash) {
    fail("config hash mismatch: " + demo.meta.config_hash + " vs " + expected_config_hash);
  }
  if (demo.transitions.empty()) {
    fail("no transitions");
    return report;
  }
  const std::size_t dim = obs_dim(demo.meta.group);
  for (std::size_t i = 0; i < demo.transitions.size(); ++i) {
    const auto& t = demo.transitions[i];
    const std::string where = "transition " + std::to_string(i) + ": ";
    if (t.step != static_cast<long>(i)) fail(where + "non-monotone step index");
    if (t.obs.size() != dim) {
      fail(where + "dimension violation");
      continue;
    }
    for (double a : {t.action.x, t.action.y, t.action.z}) {
      if (!std::isfinite(a) || std::abs(a) > sim.action_clamp) {
        fail(where + "clamp violation");
        break;
      }
    }
    if (demo.meta.group == ObsMode::kVisual) {
      for (std::size_t r = 0; r < 64; ++r) {
        const double sum = t.obs[4 * r] + t.obs[4 * r + 1] + t.obs[4 * r + 2];
        const double dist = t.obs[4 * r + 3];
        bool binary = true;
        for (int k = 0; k < 3; ++k) {
          const double v = t.obs[4 * r + k];
          binary = binary && (v == 0.0 || v == 1.0);
        }
        if (!binary || sum != 1.0) {
          fail(where + "encoding violation");
          break;
        }
        if (!(dist > 0.0) || dist > sim.visual_max_range) {
          fail(where + "hit distance out of range");
          break;
        }
      }
    }
    if (t.done && i + 1 != demo.transitions.size()) fail(where + "done before the last transition");
  }
  if (!demo.succeeded()) fail("final transition is not a successful terminal step");
  return report;
}

}  // namespace pipeforge
