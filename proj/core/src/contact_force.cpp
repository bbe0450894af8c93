#include "pipeforge/contact_force.hpp"

#include <cmath>
#include <vector>

#include "pipeforge/errors.hpp"

namespace pipeforge {

namespace {

void require_unit(const Vec3& n, const char* what) {
  if (std::abs(n.norm() - 1.0) > 1e-9) throw InvalidArgument(what);
}

}  // namespace

Vec3 handler_velocity(const Vec3& x_prev, const Vec3& x_cur, double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  return (x_cur - x_prev) / dt;
}

int delta_coll(const ContactSet& contacts) { return contacts.empty() ? 0 : 1; }

int delta_mov(const Vec3& x_prev, const Vec3& x_cur, const Vec3& x0, double eps) {
  const Vec3 motion = x_cur - x_prev;
  const Vec3 offset = x_prev - x0;
  const double motion_len = motion.norm();
  const double offset_len = offset.norm();
  if (motion_len < eps || offset_len < eps) return 1;
  const double cos_theta = motion.dot(offset) / (motion_len * offset_len);
  return cos_theta >= 0.0 ? 1 : 0;
}

double impulse_magnitude(double mass, const Vec3& v, double dt) {
  if (!(mass > 0.0)) throw InvalidArgument("mass must be positive");
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  return mass * v.norm() / dt;
}

Vec3 impulse_direction(const Vec3& n, const Vec3& v, ReflectionMode mode) {
  require_unit(n, "impulse_direction: normal is not unit");
  const double speed = v.norm();
  if (speed < 1e-9) return n;
  const Vec3 v_hat = v / speed;
  const Vec3 base = mode == ReflectionMode::kVerbatim ? n : v_hat;
  const Vec3 raw = base - 2.0 * v_hat.dot(n) * n;
  const double len = raw.norm();
  if (len < 1e-9) return n;
  return raw / len;
}

Vec3 impulse_vector(double magnitude, const Vec3& direction) {
  if (magnitude < 0.0) throw InvalidArgument("impulse magnitude must be non-negative");
  return magnitude * direction;
}

ForceSplit decompose_contact_force(const Vec3& f_on, const Vec3& n) {
  require_unit(n, "decompose_contact_force: normal is not unit");
  const Vec3 normal = f_on.dot(n) * n;
  return {normal, f_on - normal};
}

Vec3 impedance_force(const Vec3& x_dis, const Vec3& x_dis_vel, const Vec3& x_dis_acc,
                     const ImpedanceGains& gains, int d_mov, int d_coll) {
  if (d_mov * d_coll == 0) return gains.gravity_comp;
  return gains.inertia * x_dis_acc + gains.damping * x_dis_vel + gains.stiffness * x_dis +
         gains.gravity_comp;
}

ContactSet scene_contacts(const ContactScene& scene, const Vec3& handler_pos,
                          double proximity_tol) {
  const Pose inner_pose = Pose::translation(handler_pos);
  return narrow_phase_contacts(*scene.inner, inner_pose, *scene.outer, scene.outer_pose,
                               proximity_tol);
}

Vec3 estimate_surface_normal(const ContactScene& scene, const ContactPoint& contact,
                             const Vec3& handler_pos, const ContactConfig& config) {
  Vec3 axis = contact.pt - handler_pos;
  if (axis.norm() < 1e-9) axis = -contact.n;
  axis = axis.normalized();
  const Vec3 origin = contact.pt - config.ray_backoff * axis;
  const SceneObject outer{scene.outer, scene.outer_pose, scene.outer_id};

  std::vector<Vec3> hits;
  hits.reserve(static_cast<std::size_t>(config.n_ray));
  for (const Vec3& dir : ray_fan(origin, origin + axis, config.n_ray, config.fan_half_angle)) {
    if (auto hit = ray_cast(origin, dir, std::span<const SceneObject>(&outer, 1))) {
      hits.push_back(hit->point);
    }
  }
  try {
    Vec3 n = fit_plane_normal_svd(hits, handler_pos);
    // The fit only fixes the line; keep the side the mesh normal points to.
    if (n.dot(contact.n) < 0.0) n = -n;
    return n;
  } catch (const DegenerateGeometry&) {
    return contact.n;
  }
}

ForceState contact_pipeline(const Vec3& prev_pos, const Vec3& cur_pos, double dt, double mass,
                            const ContactScene& scene, const ContactConfig& config,
                            const ForceState& previous, const Vec3& applied_force) {
  return contact_pipeline(prev_pos, cur_pos, dt, mass, scene, config, previous, applied_force,
                          scene_contacts(scene, cur_pos, config.proximity_tol));
}

ForceState contact_pipeline(const Vec3& prev_pos, const Vec3& cur_pos, double dt, double mass,
                            const ContactScene& scene, const ContactConfig& config,
                            const ForceState& previous, const Vec3& applied_force,
                            const ContactSet& contacts) {
  ForceState state;
  state.delta_coll = delta_coll(contacts);
  state.contact_count = contacts.size();
  if (state.delta_coll == 0) return state;

  const ContactPoint& closest = closest_contact(contacts, cur_pos);
  state.normal = estimate_surface_normal(scene, closest, cur_pos, config);

  if (previous.delta_coll == 0 || !previous.anchor) {
    const Vec3 v = handler_velocity(prev_pos, cur_pos, dt);
    const double magnitude = impulse_magnitude(mass, v, dt);
    state.f_pre = impulse_vector(magnitude, impulse_direction(state.normal, v, config.reflection));
    state.f_on = state.f_pre;
    state.anchor = cur_pos;
    state.first_contact = true;
  } else {
    state.f_on = applied_force;
    state.anchor = previous.anchor;
  }
  const ForceSplit split = decompose_contact_force(state.f_on, state.normal);
  state.f_normal = split.normal;
  state.f_friction = split.friction;
  state.delta_mov = delta_mov(prev_pos, cur_pos, *state.anchor, config.mov_eps);
  return state;
}

}  // namespace pipeforge
