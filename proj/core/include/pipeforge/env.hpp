#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "pipeforge/config.hpp"
#include "pipeforge/contact_force.hpp"

namespace pipeforge {

using Observation = std::vector<double>;

/// Object classes reported by the visual scan.
enum class VisualClass { kOuterPipe = 0, kPad = 1, kNone = 2 };

struct EnvState {
  Vec3 handler_pos;
  Vec3 prev_pos;
  Vec3 velocity;
  Vec3 prev_velocity;
  Pose inner_pose;
  Pose outer_pose;
  Vec3 target_center;
  int step_count = 0;
  ForceState force_state;
  double prev_normal_norm = 0.0;
  double prev_friction_norm = 0.0;
  Vec3 pending_impulse;
  bool done = false;
  bool success = false;
};

struct StepInfo {
  double normal_norm = 0.0;
  double friction_norm = 0.0;
  double depth = 0.0;
  double distance = 0.0;
  int step = 0;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  bool success = false;
  StepInfo info;
};

/// Force-decrease shaping plus the per-step time penalty and the success bonus.
double compute_reward(double prev_normal, double prev_friction, double cur_normal,
                      double cur_friction, bool success, int max_step);

/// Pipe-insertion MDP: a translation-only handler carrying the inner pipe toward the
/// bore of a fixed outer pipe, with contact forces from the impedance contact model.
class PipeEnv {
 public:
  explicit PipeEnv(SimConfig config, ObsMode mode = ObsMode::kForce);

  Observation reset(Condition condition, std::uint64_t seed);
  StepResult step(const Vec3& action);

  const EnvState& state() const { return state_; }
  const SimConfig& config() const { return config_; }
  ObsMode mode() const { return mode_; }
  const ContactScene& scene() const { return scene_; }

  Observation observe() const;
  Observation observe_force() const;
  Observation observe_visual() const;
  Observation observe_baseline() const;

  /// Leading-edge center of the inner pipe.
  Vec3 tip() const;
  Vec3 outer_axis() const;
  /// Center of the outer pipe's open end the inner pipe enters through.
  Vec3 entry_point() const;
  double depth() const;
  double distance() const;
  /// Distance of the tip center from the outer pipe's axis.
  double lateral_offset() const;
  bool success_check() const;

  /// Visual scan directions in the inner pipe's frame (ring-major, 8 x 8).
  std::vector<Vec3> visual_directions() const;

  /// Places the handler directly; used by tests and teleop replay.
  void set_handler(const Vec3& pos);

 private:
  Vec3 first_contact_on_segment(const Vec3& from, const Vec3& to) const;
  void place_outer(const Vec3& center);

  SimConfig config_;
  ObsMode mode_;
  ContactScene scene_;
  std::shared_ptr<const CollisionShape> pad_;
  std::vector<SceneObject> visual_scene_;
  EnvState state_;
  bool ready_ = false;
};

}  // namespace pipeforge
