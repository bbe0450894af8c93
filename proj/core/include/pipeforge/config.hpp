#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "pipeforge/contact_force.hpp"

namespace pipeforge {

enum class ObsMode { kForce, kVisual, kBaseline };

std::string_view to_string(ObsMode mode);
ObsMode parse_obs_mode(std::string_view text);
std::size_t obs_dim(ObsMode mode);

enum class Condition { kFixed, kInnerRandom, kTargetRandom };

std::string_view to_string(Condition condition);
/// Accepts "fixed", "1"/"cond1", "2"/"cond2".
Condition parse_condition(std::string_view text);

/// Environment, geometry and contact parameters. Lengths in m, forces in N.
struct SimConfig {
  double dt = 0.02;
  double handler_mass = 1.0;
  double viscous_damping = 2.0;
  double action_clamp = 10.0;
  double max_speed = 0.5;
  int max_step = 10000;

  double inner_radius = 0.05;
  double inner_length = 0.6;
  double outer_inner_radius = 0.06;
  double outer_outer_radius = 0.07;
  double outer_length = 0.7;
  double target_depth = 0.5;
  int radial_segments = 48;
  int axial_segments = 8;

  int visual_rays = 64;
  double visual_max_range = 2.0;
  double visual_cone_half_angle = 1.0471975511965976;  // 60 deg

  ContactConfig contact;
};

/// Learning hyperparameters. Defaults are the full-scale values; see Config::desk().
struct TrainConfig {
  int batch_size = 128;
  int buffer_size = 2048;
  double learning_rate = 3e-4;
  int epochs = 3;
  double gae_lambda = 0.95;
  double gamma = 0.99;
  double extrinsic_strength = 1.0;
  double gail_strength = 0.01;
  double gail_gamma = 0.99;
  double bc_strength = 1.0;
  long bc_steps = 10000;
  int bc_step_cost = 8;  // env-step equivalents consumed per BC minibatch update
  long total_steps = 5000000;
  long summary_every = 12000;
  int checkpoints_kept = 5;
  double ppo_clip = 0.2;
  double entropy_coef = 0.005;
  double value_coef = 0.5;
  int policy_hidden = 256;
  int policy_layers = 1;
  int disc_hidden = 256;
  int disc_layers = 2;
  double log_std_init = -1.0;
  double obs_clip = 5.0;
  std::uint64_t seed = 1;
  Condition condition = Condition::kInnerRandom;  // episode layout during training
};

struct ExpertConfig {
  double jitter_fraction = 0.01;  // Gaussian sigma as a fraction of action_clamp
  double reactive_threshold = 0.5;
  double reactive_gain = 2.0;
  double align_tolerance = 5e-3;
  double approach_standoff = 0.1;
  double approach_speed = 0.25;
  double insert_speed = 0.15;
  double position_gain = 2.0;
  double velocity_gain = 20.0;
};

struct Config {
  SimConfig sim;
  TrainConfig train;
  ExpertConfig expert;
  int demo_count = 5;

  /// Desk-scale profile: 200k training steps, 2,000-step episodes.
  static Config desk();

  /// Canonical flat `key = value` text; every key is present.
  std::string to_text() const;
  static Config from_text(std::string_view text);
  static Config load(const std::string& path);

  /// FNV-1a over the canonical text of the environment section only.
  std::uint64_t env_hash() const;
  /// FNV-1a over the canonical text of everything.
  std::uint64_t full_hash() const;

  /// Throws ConfigError naming the first invalid key.
  void validate() const;
};

std::uint64_t fnv1a64(std::string_view data);
std::string hash_hex(std::uint64_t hash);

}  // namespace pipeforge
