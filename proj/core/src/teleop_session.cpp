#include <filesystem>
#include <nlohmann/json.hpp>

#include "pipeforge/errors.hpp"
#include "pipeforge/teleop.hpp"

namespace pipeforge {

namespace {

using json = nlohmann::ordered_json;

json vec(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

std::string error_frame(std::string_view detail) {
  return json{{"type", "error"}, {"detail", detail}}.dump();
}

Vec3 parse_vec(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ProtocolError("pos must be an array of 3 numbers");
  const Vec3 v{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  if (!v.is_finite()) throw ProtocolError("pos must be finite");
  return v;
}

}  // namespace

TeleopSession::TeleopSession(Config config, TeleopOptions options)
    : config_(std::move(config)),
      options_(std::move(options)),
      env_(config_.sim, ObsMode::kForce),
      config_hash_(demo_config_hash(config_)) {
  reset(Condition::kFixed, 0);
}

void TeleopSession::reset(Condition condition, std::uint64_t seed) {
  env_.reset(condition, seed);
  condition_ = condition;
  seed_ = seed;
  target_ = env_.state().handler_pos;
  recording_ = false;
  force_.transitions.clear();
  visual_.transitions.clear();
}

Vec3 TeleopSession::drive_force() const {
  const auto& s = env_.state();
  return options_.kp * (target_ - s.handler_pos) - options_.kd * s.velocity;
}

std::vector<std::string> TeleopSession::handle_message(std::string_view text) {
  json msg;
  try {
    msg = json::parse(text);
  } catch (const json::exception&) {
    return {error_frame("malformed JSON")};
  }
  try {
    if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
      throw ProtocolError("message needs a string 'type'");
    }
    const auto type = msg["type"].get<std::string>();
    if (type == "set_target") {
      target_ = parse_vec(msg.at("pos"));
      return {};
    }
    if (type == "reset") {
      const Condition cond = parse_condition(msg.value("condition", std::string("fixed")));
      const auto seed = msg.value("seed", std::uint64_t{0});
      reset(cond, seed);
      return {state_message()};
    }
    if (type == "record_start") {
      if (env_.state().done) throw ProtocolError("episode has ended; reset first");
      force_.transitions.clear();
      visual_.transitions.clear();
      recording_ = true;
      return {};
    }
    if (type == "record_stop") {
      recording_ = false;
      return {};
    }
    if (type == "save_demo") {
      const ObsMode group = parse_obs_mode(msg.value("group", std::string("force")));
      if (group == ObsMode::kBaseline) throw ProtocolError("group must be force or visual");
      return {json{{"type", "saved"}, {"path", save(group)}}.dump()};
    }
    throw ProtocolError("unknown message type '" + type + "'");
  } catch (const json::exception& e) {
    return {error_frame(std::string("bad field: ") + e.what())};
  } catch (const std::exception& e) {
    return {error_frame(e.what())};
  }
}

std::string TeleopSession::tick() {
  ++ticks_;
  if (env_.state().done) return state_message();
  const Vec3 action = drive_force();
  Observation force_obs;
  Observation visual_obs;
  if (recording_) {
    force_obs = env_.observe_force();
    visual_obs = env_.observe_visual();
  }
  const StepResult r = env_.step(action);
  if (recording_) {
    // Store the action the env actually applied so the file passes the clamp check.
    const double c = config_.sim.action_clamp;
    const Vec3 applied{std::clamp(action.x, -c, c), std::clamp(action.y, -c, c),
                       std::clamp(action.z, -c, c)};
    const long step = static_cast<long>(force_.transitions.size());
    force_.transitions.push_back({step, std::move(force_obs), applied, r.reward, r.done});
    visual_.transitions.push_back({step, std::move(visual_obs), applied, r.reward, r.done});
    if (r.done) recording_ = false;
  }
  return state_message();
}

std::string TeleopSession::state_message() const {
  const auto& s = env_.state();
  const auto& fs = s.force_state;
  const auto& p = s.inner_pose;
  json j;
  j["type"] = "state";
  j["tick"] = ticks_;
  j["handler"] = vec(s.handler_pos);
  j["inner_pose"] = {p.position.x, p.position.y, p.position.z, p.orientation.w,
                     p.orientation.x, p.orientation.y, p.orientation.z};
  const auto& o = s.outer_pose;
  j["outer_pose"] = {o.position.x, o.position.y, o.position.z, o.orientation.w,
                     o.orientation.x, o.orientation.y, o.orientation.z};
  j["depth"] = env_.depth();
  j["distance"] = env_.distance();
  j["f_normal"] = vec(fs.f_normal);
  j["f_friction"] = vec(fs.f_friction);
  j["collided"] = fs.delta_coll;
  j["recording"] = recording_;
  return j.dump();
}

std::string TeleopSession::save(ObsMode group) {
  Demonstration demo = group == ObsMode::kForce ? force_ : visual_;
  if (demo.transitions.empty()) throw ProtocolError("nothing recorded");
  demo.meta = {group, condition_, seed_, DemoSource::kTeleop, config_hash_};
  const ValidationReport report = validate_demo(demo, config_.sim, config_hash_);
  if (!report.ok) {
    std::string detail = "recording does not validate:";
    for (const auto& r : report.reasons) detail += " " + r + ";";
    throw ProtocolError(detail);
  }
  std::filesystem::create_directories(options_.record_dir);
  std::filesystem::path path;
  do {
    path = std::filesystem::path(options_.record_dir) /
           ("teleop_" + std::string(to_string(group)) + "_" + std::to_string(++saved_count_) +
            ".jsonl");
  } while (std::filesystem::exists(path));
  save_demo(demo, path.string());
  return path.string();
}

}  // namespace pipeforge
