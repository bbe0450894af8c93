#pragma once

#include <memory>
#include <optional>

#include "pipeforge/geometry.hpp"

namespace pipeforge {

/// Gains of the resistance law F = d_mov * d_coll * (M a + B v + K x) + g.
struct ImpedanceGains {
  double inertia = 0.0;      // M_c, kg
  double damping = 50.0;     // B_c, N s/m
  double stiffness = 5000.0; // K_c, N/m
  Vec3 gravity_comp{};       // g_c, N
};

enum class ReflectionMode {
  kVerbatim,  // n - 2 (v.n) n, normalized
  kStandard,  // v - 2 (v.n) n, normalized
};

struct ContactConfig {
  double proximity_tol = 1e-3;
  int n_ray = 16;
  double fan_half_angle = 0.7853981633974483;  // 45 deg
  double ray_backoff = 5e-3;                   // fan origin sits this far behind the contact
  double mov_eps = 1e-6;
  ReflectionMode reflection = ReflectionMode::kVerbatim;
  ImpedanceGains gains;
};

/// Per-frame output of the contact model.
struct ForceState {
  Vec3 f_pre;       // single-frame impulse, nonzero only on the first contact frame
  Vec3 f_normal;
  Vec3 f_friction;
  Vec3 f_on;        // force that was decomposed this frame
  Vec3 normal;      // fitted surface normal, zero without contact
  int delta_coll = 0;
  int delta_mov = 0;
  std::optional<Vec3> anchor;
  std::size_t contact_count = 0;
  bool first_contact = false;
};

/// Static collision scene: the inner pipe follows the handler (its local origin sits at
/// the handler position, orientation fixed), the outer pipe is placed once.
struct ContactScene {
  std::shared_ptr<const CollisionShape> inner;
  std::shared_ptr<const CollisionShape> outer;
  Pose outer_pose;
  int outer_id = 0;
};

Vec3 handler_velocity(const Vec3& x_prev, const Vec3& x_cur, double dt);

int delta_coll(const ContactSet& contacts);

/// Motion indicator: 1 while the handler keeps moving away from the anchor (deeper
/// into the contact) or is stationary, 0 when it moves back toward the anchor.
int delta_mov(const Vec3& x_prev, const Vec3& x_cur, const Vec3& x0, double eps);

double impulse_magnitude(double mass, const Vec3& v, double dt);

Vec3 impulse_direction(const Vec3& n, const Vec3& v,
                       ReflectionMode mode = ReflectionMode::kVerbatim);

Vec3 impulse_vector(double magnitude, const Vec3& direction);

struct ForceSplit {
  Vec3 normal;
  Vec3 friction;
};
ForceSplit decompose_contact_force(const Vec3& f_on, const Vec3& n);

Vec3 impedance_force(const Vec3& x_dis, const Vec3& x_dis_vel, const Vec3& x_dis_acc,
                     const ImpedanceGains& gains, int d_mov, int d_coll);

/// Contacts between the inner pipe placed at `handler_pos` and the outer pipe.
ContactSet scene_contacts(const ContactScene& scene, const Vec3& handler_pos,
                          double proximity_tol);

/// One frame of the contact model. `previous` carries the anchor across frames;
/// `applied_force` is the external drive of this frame (used once contact is sustained).
ForceState contact_pipeline(const Vec3& prev_pos, const Vec3& cur_pos, double dt, double mass,
                            const ContactScene& scene, const ContactConfig& config,
                            const ForceState& previous, const Vec3& applied_force);
/// Same, with the contacts at `cur_pos` already computed.
ForceState contact_pipeline(const Vec3& prev_pos, const Vec3& cur_pos, double dt, double mass,
                            const ContactScene& scene, const ContactConfig& config,
                            const ForceState& previous, const Vec3& applied_force,
                            const ContactSet& contacts);

/// Surface normal near `contact` estimated from a ray fan cast onto the outer pipe.
/// Falls back to the contact's mesh normal when the hits cannot define a plane.
Vec3 estimate_surface_normal(const ContactScene& scene, const ContactPoint& contact,
                             const Vec3& handler_pos, const ContactConfig& config);

}  // namespace pipeforge
