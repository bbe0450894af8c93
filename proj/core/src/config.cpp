#include "pipeforge/config.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "pipeforge/errors.hpp"

namespace pipeforge {

std::string_view to_string(ObsMode mode) {
  switch (mode) {
    case ObsMode::kForce: return "force";
    case ObsMode::kVisual: return "visual";
    case ObsMode::kBaseline: return "baseline";
  }
  return "force";
}

ObsMode parse_obs_mode(std::string_view text) {
  if (text == "force") return ObsMode::kForce;
  if (text == "visual") return ObsMode::kVisual;
  if (text == "baseline") return ObsMode::kBaseline;
  throw ConfigError("unknown observation mode '" + std::string(text) + "'");
}

std::size_t obs_dim(ObsMode mode) {
  switch (mode) {
    case ObsMode::kForce: return 8;
    case ObsMode::kVisual: return 258;
    case ObsMode::kBaseline: return 2;
  }
  return 8;
}

std::string_view to_string(Condition condition) {
  switch (condition) {
    case Condition::kFixed: return "fixed";
    case Condition::kInnerRandom: return "1";
    case Condition::kTargetRandom: return "2";
  }
  return "fixed";
}

Condition parse_condition(std::string_view text) {
  if (text == "fixed") return Condition::kFixed;
  if (text == "1" || text == "cond1") return Condition::kInnerRandom;
  if (text == "2" || text == "cond2") return Condition::kTargetRandom;
  throw ConfigError("unknown condition '" + std::string(text) + "'");
}

namespace {

// Shortest text that parses back to the same double.
std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

double parse_double(std::string_view key, std::string_view text) {
  const std::string s(text);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    throw ConfigError("config key '" + std::string(key) + "': not a number: '" + s + "'");
  }
  return v;
}

long long parse_int(std::string_view key, std::string_view text) {
  const std::string s(text);
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    throw ConfigError("config key '" + std::string(key) + "': not an integer: '" + s + "'");
  }
  return v;
}

struct Field {
  std::string name;
  bool env;
  std::function<std::string()> get;
  std::function<void(std::string_view)> set;
};

template <typename T>
Field number_field(std::string name, bool env, T& ref) {
  Field f{name, env, nullptr, nullptr};
  if constexpr (std::is_floating_point_v<T>) {
    f.get = [&ref] { return format_double(ref); };
    f.set = [&ref, name](std::string_view v) { ref = parse_double(name, v); };
  } else {
    f.get = [&ref] { return std::to_string(ref); };
    f.set = [&ref, name](std::string_view v) { ref = static_cast<T>(parse_int(name, v)); };
  }
  return f;
}

std::vector<Field> fields(Config& c) {
  auto& s = c.sim;
  auto& k = c.sim.contact;
  auto& t = c.train;
  auto& e = c.expert;
  std::vector<Field> out = {
      number_field("sim.dt", true, s.dt),
      number_field("sim.handler_mass", true, s.handler_mass),
      number_field("sim.viscous_damping", true, s.viscous_damping),
      number_field("sim.action_clamp", true, s.action_clamp),
      number_field("sim.max_speed", true, s.max_speed),
      number_field("sim.max_step", true, s.max_step),
      number_field("sim.inner_radius", true, s.inner_radius),
      number_field("sim.inner_length", true, s.inner_length),
      number_field("sim.outer_inner_radius", true, s.outer_inner_radius),
      number_field("sim.outer_outer_radius", true, s.outer_outer_radius),
      number_field("sim.outer_length", true, s.outer_length),
      number_field("sim.target_depth", true, s.target_depth),
      number_field("sim.radial_segments", true, s.radial_segments),
      number_field("sim.axial_segments", true, s.axial_segments),
      number_field("sim.visual_rays", true, s.visual_rays),
      number_field("sim.visual_max_range", true, s.visual_max_range),
      number_field("sim.visual_cone_half_angle", true, s.visual_cone_half_angle),
      number_field("contact.proximity_tol", true, k.proximity_tol),
      number_field("contact.n_ray", true, k.n_ray),
      number_field("contact.fan_half_angle", true, k.fan_half_angle),
      number_field("contact.ray_backoff", true, k.ray_backoff),
      number_field("contact.mov_eps", true, k.mov_eps),
      number_field("contact.inertia", true, k.gains.inertia),
      number_field("contact.damping", true, k.gains.damping),
      number_field("contact.stiffness", true, k.gains.stiffness),
      number_field("contact.gravity_comp_x", true, k.gains.gravity_comp.x),
      number_field("contact.gravity_comp_y", true, k.gains.gravity_comp.y),
      number_field("contact.gravity_comp_z", true, k.gains.gravity_comp.z),
      number_field("train.batch_size", false, t.batch_size),
      number_field("train.buffer_size", false, t.buffer_size),
      number_field("train.learning_rate", false, t.learning_rate),
      number_field("train.epochs", false, t.epochs),
      number_field("train.gae_lambda", false, t.gae_lambda),
      number_field("train.gamma", false, t.gamma),
      number_field("train.extrinsic_strength", false, t.extrinsic_strength),
      number_field("train.gail_strength", false, t.gail_strength),
      number_field("train.gail_gamma", false, t.gail_gamma),
      number_field("train.bc_strength", false, t.bc_strength),
      number_field("train.bc_steps", false, t.bc_steps),
      number_field("train.bc_step_cost", false, t.bc_step_cost),
      number_field("train.total_steps", false, t.total_steps),
      number_field("train.summary_every", false, t.summary_every),
      number_field("train.checkpoints_kept", false, t.checkpoints_kept),
      number_field("train.ppo_clip", false, t.ppo_clip),
      number_field("train.entropy_coef", false, t.entropy_coef),
      number_field("train.value_coef", false, t.value_coef),
      number_field("train.policy_hidden", false, t.policy_hidden),
      number_field("train.policy_layers", false, t.policy_layers),
      number_field("train.disc_hidden", false, t.disc_hidden),
      number_field("train.disc_layers", false, t.disc_layers),
      number_field("train.log_std_init", false, t.log_std_init),
      number_field("train.obs_clip", false, t.obs_clip),
      number_field("train.seed", false, t.seed),
      number_field("expert.jitter_fraction", false, e.jitter_fraction),
      number_field("expert.reactive_threshold", false, e.reactive_threshold),
      number_field("expert.reactive_gain", false, e.reactive_gain),
      number_field("expert.align_tolerance", false, e.align_tolerance),
      number_field("expert.approach_standoff", false, e.approach_standoff),
      number_field("expert.approach_speed", false, e.approach_speed),
      number_field("expert.insert_speed", false, e.insert_speed),
      number_field("expert.position_gain", false, e.position_gain),
      number_field("expert.velocity_gain", false, e.velocity_gain),
      number_field("demos.count", false, c.demo_count),
  };
  out.push_back({"contact.reflection", true,
                 [&k] {
                   return std::string(k.reflection == ReflectionMode::kVerbatim ? "verbatim"
                                                                               : "standard");
                 },
                 [&k](std::string_view v) {
                   if (v == "verbatim") {
                     k.reflection = ReflectionMode::kVerbatim;
                   } else if (v == "standard") {
                     k.reflection = ReflectionMode::kStandard;
                   } else {
                     throw ConfigError("config key 'contact.reflection': expected verbatim or "
                                       "standard, got '" +
                                       std::string(v) + "'");
                   }
                 }});
  out.push_back({"train.condition", false, [&t] { return std::string(to_string(t.condition)); },
                 [&t](std::string_view v) { t.condition = parse_condition(v); }});
  return out;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string render(const Config& c, bool env_only) {
  Config copy = c;
  std::string out;
  for (const auto& f : fields(copy)) {
    if (env_only && !f.env) continue;
    out += f.name + " = " + f.get() + "\n";
  }
  return out;
}

}  // namespace

Config Config::desk() {
  Config c;
  c.train.total_steps = 200000;
  c.sim.max_step = 2000;
  return c;
}

std::string Config::to_text() const { return render(*this, false); }

Config Config::from_text(std::string_view text) {
  Config c = desk();
  auto table = fields(c);
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    bool found = false;
    for (auto& f : table) {
      if (f.name == key) {
        f.set(value);
        found = true;
        break;
      }
    }
    if (!found) throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
  c.validate();
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

std::uint64_t Config::env_hash() const { return fnv1a64(render(*this, true)); }
std::uint64_t Config::full_hash() const { return fnv1a64(render(*this, false)); }

void Config::validate() const {
  auto positive = [](const char* key, double v) {
    if (!(v > 0.0)) throw ConfigError(std::string("config key '") + key + "' must be positive");
  };
  positive("sim.dt", sim.dt);
  positive("sim.handler_mass", sim.handler_mass);
  positive("sim.viscous_damping", sim.viscous_damping);
  positive("sim.action_clamp", sim.action_clamp);
  positive("sim.max_speed", sim.max_speed);
  positive("sim.max_step", sim.max_step);
  positive("sim.inner_radius", sim.inner_radius);
  positive("sim.inner_length", sim.inner_length);
  positive("sim.outer_length", sim.outer_length);
  positive("sim.target_depth", sim.target_depth);
  positive("sim.visual_max_range", sim.visual_max_range);
  positive("sim.visual_cone_half_angle", sim.visual_cone_half_angle);
  positive("contact.proximity_tol", sim.contact.proximity_tol);
  positive("contact.fan_half_angle", sim.contact.fan_half_angle);
  if (!(sim.inner_radius < sim.outer_inner_radius)) {
    throw ConfigError("config key 'sim.outer_inner_radius' must exceed sim.inner_radius");
  }
  if (!(sim.outer_inner_radius < sim.outer_outer_radius)) {
    throw ConfigError("config key 'sim.outer_outer_radius' must exceed sim.outer_inner_radius");
  }
  if (!(sim.target_depth < sim.outer_length)) {
    throw ConfigError("config key 'sim.target_depth' must be below sim.outer_length");
  }
  if (sim.visual_rays != 64) throw ConfigError("config key 'sim.visual_rays' must be 64");
  if (sim.contact.n_ray < 4) throw ConfigError("config key 'contact.n_ray' must be >= 4");
  if (sim.radial_segments < 3) throw ConfigError("config key 'sim.radial_segments' must be >= 3");
  if (sim.axial_segments < 1) throw ConfigError("config key 'sim.axial_segments' must be >= 1");
  if (sim.contact.gains.inertia < 0.0 || sim.contact.gains.damping < 0.0 ||
      sim.contact.gains.stiffness < 0.0) {
    throw ConfigError("config key 'contact.stiffness': impedance gains must be non-negative");
  }
  positive("train.batch_size", train.batch_size);
  positive("train.buffer_size", train.buffer_size);
  positive("train.epochs", train.epochs);
  positive("train.total_steps", static_cast<double>(train.total_steps));
  positive("train.summary_every", static_cast<double>(train.summary_every));
  positive("train.checkpoints_kept", train.checkpoints_kept);
  positive("train.bc_step_cost", train.bc_step_cost);
  positive("train.policy_hidden", train.policy_hidden);
  positive("train.disc_hidden", train.disc_hidden);
  positive("train.policy_layers", train.policy_layers);
  positive("train.disc_layers", train.disc_layers);
  if (train.bc_steps < 0 || train.bc_steps > train.total_steps) {
    throw ConfigError("config key 'train.bc_steps' must lie in [0, train.total_steps]");
  }
  if (train.batch_size > train.buffer_size) {
    throw ConfigError("config key 'train.batch_size' must not exceed train.buffer_size");
  }
  positive("demos.count", demo_count);
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace pipeforge
