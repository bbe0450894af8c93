#include "pipeforge/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>

#include "pipeforge/errors.hpp"

namespace pipeforge {

namespace {

constexpr int kVisualRings = 8;
constexpr int kVisualAzimuths = 8;
constexpr int kPadId = 1;
constexpr int kOuterId = 0;

// Canonical layout: outer pipe centered at the origin, tip 0.7 m back along -x.
constexpr double kCanonicalTipDistance = 0.7;

Vec3 disc_sample(std::mt19937_64& rng, double radius) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double r = radius * std::sqrt(unit(rng));
  const double phi = 2.0 * std::numbers::pi * unit(rng);
  return {0.0, r * std::cos(phi), r * std::sin(phi)};
}

}  // namespace

double compute_reward(double prev_normal, double prev_friction, double cur_normal,
                      double cur_friction, bool success, int max_step) {
  const double unit = 1.0 / max_step;
  double shaping = -unit;
  if (cur_normal < prev_normal && cur_friction < prev_friction) {
    shaping = unit;
  } else if (cur_normal == prev_normal && cur_friction == prev_friction) {
    shaping = 0.0;
  }
  return shaping - unit + (success ? 1.0 : 0.0);
}

PipeEnv::PipeEnv(SimConfig config, ObsMode mode) : config_(std::move(config)), mode_(mode) {
  const auto& c = config_;
  scene_.inner = std::make_shared<const CollisionShape>(
      make_cylinder_mesh(c.inner_radius, c.inner_length, c.radial_segments, c.axial_segments));
  scene_.outer = std::make_shared<const CollisionShape>(make_pipe_mesh(
      c.outer_inner_radius, c.outer_outer_radius, c.outer_length, c.radial_segments,
      c.axial_segments));
  scene_.outer_id = kOuterId;
  pad_ = std::make_shared<const CollisionShape>(
      make_disc_mesh(c.outer_inner_radius, c.radial_segments));
  place_outer({0.0, 0.0, 0.0});
}

void PipeEnv::place_outer(const Vec3& center) {
  state_.target_center = center;
  state_.outer_pose = Pose::translation(center);
  scene_.outer_pose = state_.outer_pose;
  const Vec3 pad_center =
      center + outer_axis() * (-config_.outer_length / 2.0 + config_.target_depth);
  visual_scene_ = {SceneObject{scene_.outer, state_.outer_pose, kOuterId},
                   SceneObject{pad_, Pose::translation(pad_center), kPadId}};
}

Observation PipeEnv::reset(Condition condition, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Vec3 target{0.0, 0.0, 0.0};
  Vec3 tip_start{-kCanonicalTipDistance, 0.0, 0.0};
  switch (condition) {
    case Condition::kFixed:
      break;
    case Condition::kInnerRandom: {
      std::uniform_real_distribution<double> along(0.6, 0.8);
      const double dx = along(rng);
      tip_start = target - Vec3{dx, 0.0, 0.0} + disc_sample(rng, 0.15);
      break;
    }
    case Condition::kTargetRandom: {
      std::uniform_real_distribution<double> along(0.4, 1.0);
      const double dx = along(rng);
      target = tip_start + Vec3{dx, 0.0, 0.0} + disc_sample(rng, 0.2);
      break;
    }
  }
  state_ = EnvState{};
  place_outer(target);
  const Vec3 handler = tip_start - Vec3{config_.inner_length / 2.0, 0.0, 0.0};
  state_.handler_pos = handler;
  state_.prev_pos = handler;
  state_.inner_pose = Pose::translation(handler);
  ready_ = true;
  return observe();
}

void PipeEnv::set_handler(const Vec3& pos) {
  state_.handler_pos = pos;
  state_.prev_pos = pos;
  state_.velocity = {};
  state_.prev_velocity = {};
  state_.inner_pose = Pose::translation(pos);
  state_.force_state = {};
  state_.pending_impulse = {};
  ready_ = true;
}

Vec3 PipeEnv::first_contact_on_segment(const Vec3& from, const Vec3& to) const {
  const double tol = config_.contact.proximity_tol;
  double lo = 0.0;
  double hi = 1.0;
  for (int i = 0; i < 12; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (scene_contacts(scene_, from + (to - from) * mid, tol).empty()) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return from + (to - from) * hi;
}

StepResult PipeEnv::step(const Vec3& action) {
  if (!ready_) throw ProtocolError("step before reset");
  if (state_.done) throw ProtocolError("step after episode end");
  const auto& c = config_;
  const auto& gains = c.contact.gains;
  const double clamp = c.action_clamp;
  const Vec3 a{std::clamp(action.x, -clamp, clamp), std::clamp(action.y, -clamp, clamp),
               std::clamp(action.z, -clamp, clamp)};

  const Vec3 x = state_.handler_pos;
  const Vec3 v = state_.velocity;
  const ForceState& fs = state_.force_state;
  const bool resisting = fs.delta_coll == 1 && fs.delta_mov == 1 && fs.anchor.has_value();

  Vec3 resistance = gains.gravity_comp;
  if (resisting) {
    resistance = impedance_force(x - *fs.anchor, v, (v - state_.prev_velocity) / c.dt, gains,
                                 fs.delta_mov, fs.delta_coll);
  }
  const Vec3 net = a - c.viscous_damping * v - resistance + state_.pending_impulse;

  Vec3 v_new = v + net * (c.dt / c.handler_mass);
  if (const double speed = v_new.norm(); speed > c.max_speed) v_new *= c.max_speed / speed;
  Vec3 x_new = x + v_new * c.dt;

  const double tol = c.contact.proximity_tol;
  std::optional<ContactSet> contacts;
  if (fs.delta_coll == 1 && fs.anchor && gains.stiffness > 0.0) {
    // Hold the handler inside the spring's equilibrium ball around the anchor. A handler
    // already outside it may retreat but not go deeper, so the snap back never reads as
    // a release of the resistance.
    const double radius = std::max(a.norm(), 1e-9) / gains.stiffness;
    const double reach = std::max(radius, (x - *fs.anchor).norm());
    const Vec3 offset = x_new - *fs.anchor;
    if (offset.norm() > reach) x_new = *fs.anchor + offset * (reach / offset.norm());
  } else if (fs.delta_coll == 0) {
    contacts = scene_contacts(scene_, x_new, tol);
    if (!contacts->empty()) {
      x_new = first_contact_on_segment(x, x_new);
      contacts.reset();
    }
  }
  if (!contacts) contacts = scene_contacts(scene_, x_new, tol);
  v_new = (x_new - x) / c.dt;

  state_.prev_velocity = v;
  state_.prev_pos = x;
  state_.handler_pos = x_new;
  state_.velocity = v_new;
  state_.inner_pose = Pose::translation(x_new);
  state_.force_state =
      contact_pipeline(x, x_new, c.dt, c.handler_mass, scene_, c.contact, fs, a, *contacts);
  state_.pending_impulse =
      state_.force_state.first_contact ? state_.force_state.f_pre : Vec3{};
  ++state_.step_count;

  const double fn = state_.force_state.f_normal.norm();
  const double ff = state_.force_state.f_friction.norm();
  const bool success = success_check();
  StepResult result;
  result.reward = compute_reward(state_.prev_normal_norm, state_.prev_friction_norm, fn, ff,
                                 success, c.max_step);
  state_.prev_normal_norm = fn;
  state_.prev_friction_norm = ff;
  state_.success = success;
  state_.done = success || state_.step_count >= c.max_step;

  result.done = state_.done;
  result.success = success;
  result.info = {fn, ff, depth(), distance(), state_.step_count};
  result.observation = observe();
  return result;
}

Vec3 PipeEnv::tip() const {
  return state_.inner_pose.apply({config_.inner_length / 2.0, 0.0, 0.0});
}

Vec3 PipeEnv::outer_axis() const { return state_.outer_pose.rotate({1.0, 0.0, 0.0}); }

Vec3 PipeEnv::entry_point() const {
  return state_.outer_pose.apply({-config_.outer_length / 2.0, 0.0, 0.0});
}

double PipeEnv::depth() const { return std::max(0.0, (tip() - entry_point()).dot(outer_axis())); }

double PipeEnv::distance() const { return (tip() - state_.target_center).norm(); }

double PipeEnv::lateral_offset() const {
  const Vec3 rel = tip() - state_.target_center;
  const Vec3 axis = outer_axis();
  return (rel - axis * rel.dot(axis)).norm();
}

bool PipeEnv::success_check() const {
  return depth() >= config_.target_depth &&
         lateral_offset() + config_.inner_radius <=
             config_.outer_inner_radius + config_.contact.proximity_tol;
}

Observation PipeEnv::observe() const {
  switch (mode_) {
    case ObsMode::kForce: return observe_force();
    case ObsMode::kVisual: return observe_visual();
    case ObsMode::kBaseline: return observe_baseline();
  }
  return observe_force();
}

Observation PipeEnv::observe_force() const {
  const auto& fs = state_.force_state;
  return {fs.f_normal.x,   fs.f_normal.y,   fs.f_normal.z, fs.f_friction.x,
          fs.f_friction.y, fs.f_friction.z, depth(),       distance()};
}

Observation PipeEnv::observe_baseline() const { return {depth(), distance()}; }

std::vector<Vec3> PipeEnv::visual_directions() const {
  const Vec3 axis{1.0, 0.0, 0.0};
  const auto [u, v] = orthonormal_basis(axis);
  std::vector<Vec3> dirs;
  dirs.reserve(kVisualRings * kVisualAzimuths);
  for (int ring = 0; ring < kVisualRings; ++ring) {
    const double polar = config_.visual_cone_half_angle * ring / (kVisualRings - 1);
    for (int k = 0; k < kVisualAzimuths; ++k) {
      const double azimuth = 2.0 * std::numbers::pi * k / kVisualAzimuths;
      const Vec3 d = axis * std::cos(polar) +
                     (u * std::cos(azimuth) + v * std::sin(azimuth)) * std::sin(polar);
      dirs.push_back(d.normalized());
    }
  }
  return dirs;
}

Observation PipeEnv::observe_visual() const {
  Observation obs;
  obs.reserve(258);
  const Vec3 origin = tip();
  for (const Vec3& local : visual_directions()) {
    const Vec3 dir = state_.inner_pose.rotate(local);
    const auto hit = ray_cast(origin, dir, visual_scene_);
    VisualClass cls = VisualClass::kNone;
    double dist = config_.visual_max_range;
    if (hit && hit->distance <= config_.visual_max_range) {
      cls = hit->object_id == kPadId ? VisualClass::kPad : VisualClass::kOuterPipe;
      dist = hit->distance;
    }
    for (int k = 0; k < 3; ++k) obs.push_back(static_cast<int>(cls) == k ? 1.0 : 0.0);
    obs.push_back(dist);
  }
  obs.push_back(depth());
  obs.push_back(distance());
  return obs;
}

}  // namespace pipeforge
