#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pipeforge/config.hpp"
#include "pipeforge/demos.hpp"
#include "pipeforge/env.hpp"
#include "pipeforge/nn.hpp"

namespace pipeforge {

/// Running per-dimension standardization with clipping. Updated between PPO updates,
/// never inside one, so stored log-probs stay consistent with the update that uses them.
struct ObsNormalizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd m2;
  double count = 0.0;
  double clip = 5.0;
  double min_std = 1e-2;

  static ObsNormalizer identity(int dim, double clip);
  void update(const Eigen::MatrixXd& samples);  // one column per sample
  Eigen::VectorXd std() const;
  Eigen::MatrixXd apply(const Eigen::MatrixXd& samples) const;
  bool operator==(const ObsNormalizer&) const = default;
};

/// Diagonal Gaussian over the action divided by the action clamp.
struct PolicyParams {
  MlpParams mean;
  Eigen::Vector3d log_std = Eigen::Vector3d::Constant(-1.0);
  MlpParams value;
  ObsNormalizer normalizer;

  int obs_dim() const { return mean.input_dim(); }
  bool operator==(const PolicyParams&) const = default;
};

constexpr double kLogStdMin = -5.0;
constexpr double kLogStdMax = 2.0;

PolicyParams make_policy(int obs_dim, const TrainConfig& config, std::mt19937_64& rng);

/// Mean action in policy units (columns match `obs`, which is raw).
Eigen::MatrixXd policy_mean(const PolicyParams& policy, const Eigen::MatrixXd& obs);
Eigen::VectorXd policy_value(const PolicyParams& policy, const Eigen::MatrixXd& obs);
double gaussian_log_prob(const Eigen::Vector3d& mean, const Eigen::Vector3d& log_std,
                         const Eigen::Vector3d& action);
double gaussian_entropy(const Eigen::Vector3d& log_std);

/// Deterministic environment action: mean times the action clamp.
Vec3 act_deterministic(const PolicyParams& policy, const Observation& obs, double action_clamp);

struct DiscriminatorParams {
  MlpParams net;  // (obs + 3) -> hidden... -> 1 logit

  int obs_dim() const { return net.input_dim() - 3; }
  bool operator==(const DiscriminatorParams&) const = default;
};

DiscriminatorParams make_discriminator(int obs_dim, const TrainConfig& config,
                                       std::mt19937_64& rng);

/// Inputs are normalized observations stacked over policy-unit actions.
Eigen::VectorXd discriminator_logits(const DiscriminatorParams& disc, const Eigen::MatrixXd& obs,
                                     const Eigen::MatrixXd& actions);
/// Sigmoid kept strictly inside (0, 1).
double discriminator_probability(double logit);

/// One optimizer per parameter group.
struct PolicyOptimizer {
  Adam mean;
  Adam log_std;
  Adam value;

  explicit PolicyOptimizer(const PolicyParams& policy);
};

/// A scalar objective and its gradient over a flattened parameter vector.
struct LossGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;
};

/// Mean squared error of the policy mean (averaged over samples and action dims) and its
/// gradient in flatten_params(policy.mean). Observations are raw.
LossGrad bc_loss_grad(const PolicyParams& policy, const Eigen::MatrixXd& obs,
                      const Eigen::MatrixXd& actions);

/// Observations are raw; actions are in policy units. Returns the pre-step loss.
double bc_update(PolicyParams& policy, Adam& optimizer, const Eigen::MatrixXd& obs,
                 const Eigen::MatrixXd& actions, double lr, double strength);

struct DiscriminatorStep {
  double loss = 0.0;
  double accuracy = 0.0;
  double mean_expert = 0.0;  // mean D over the expert batch
  double mean_policy = 0.0;
};

struct DiscriminatorEval {
  DiscriminatorStep stats;
  Eigen::VectorXd grad;  // of stats.loss in flatten_params(disc.net)
};

DiscriminatorEval discriminator_loss_grad(const DiscriminatorParams& disc,
                                          const Eigen::MatrixXd& expert_obs,
                                          const Eigen::MatrixXd& expert_actions,
                                          const Eigen::MatrixXd& policy_obs,
                                          const Eigen::MatrixXd& policy_actions);

/// One binary cross-entropy step with expert labeled 1 and policy labeled 0. Observations
/// must already be normalized. The loss is averaged over all samples of both batches.
DiscriminatorStep gail_discriminator_update(DiscriminatorParams& disc, Adam& optimizer,
                                            const Eigen::MatrixXd& expert_obs,
                                            const Eigen::MatrixXd& expert_actions,
                                            const Eigen::MatrixXd& policy_obs,
                                            const Eigen::MatrixXd& policy_actions, double lr);

constexpr double kGailRewardCap = 10.0;

/// strength * min(-log(1 - D), 10).
double gail_reward_from_probability(double d, double strength);
Eigen::VectorXd gail_rewards(const DiscriminatorParams& disc, const Eigen::MatrixXd& obs,
                             const Eigen::MatrixXd& actions, double strength);

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// `last_value` bootstraps the step after the final one when it is not terminal.
GaeResult gae(const std::vector<double>& rewards, const std::vector<double>& values,
              const std::vector<bool>& dones, double gamma, double lambda,
              double last_value = 0.0);

struct RolloutBuffer {
  std::vector<Observation> obs;
  std::vector<Eigen::Vector3d> actions;  // policy units
  std::vector<double> log_probs;
  std::vector<double> values;
  std::vector<double> extrinsic;
  std::vector<double> gail;
  std::vector<bool> dones;
  double last_value = 0.0;

  std::size_t size() const { return obs.size(); }
  void clear();
};

struct SurrogateTerm {
  double value = 0.0;
  double d_ratio = 0.0;
};

/// min(r A, clip(r, 1 - eps, 1 + eps) A) and its derivative in r.
SurrogateTerm ppo_surrogate(double ratio, double advantage, double clip);

/// One PPO minibatch. Observations are already normalized; actions are in policy units.
struct PpoBatch {
  Eigen::MatrixXd obs;
  Eigen::MatrixXd actions;
  Eigen::VectorXd old_log_probs;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
};

/// total = -mean(surrogate) + value_coef * mean((V - R)^2) - entropy_coef * entropy.
struct PpoLossGrad {
  double total = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double clipped = 0.0;  // samples on the clipped branch
  Eigen::VectorXd mean_grad;
  Eigen::VectorXd value_grad;
  Eigen::Vector3d log_std_grad;
};

PpoLossGrad ppo_loss_grad(const PolicyParams& policy, const PpoBatch& batch,
                          const TrainConfig& config);

struct PpoDiagnostics {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

/// Advantage normalization to zero mean and unit std over the whole buffer.
std::vector<double> normalize_advantages(const std::vector<double>& advantages);

PpoDiagnostics ppo_update(PolicyParams& policy, PolicyOptimizer& optimizer,
                          const RolloutBuffer& buffer, const TrainConfig& config, double lr,
                          std::mt19937_64& rng);

/// Linear decay from the base rate to exactly 0 at total_steps.
double learning_rate_at(const TrainConfig& config, long step);

struct MetricRow {
  long step = 0;
  double cum_reward = 0.0;
  double success_rate = 0.0;
  double disc_expert = 0.0;
  double disc_policy = 0.0;
};

std::string metrics_csv(const std::vector<MetricRow>& rows);

struct Checkpoint {
  PolicyParams policy;
  ObsMode obs_mode = ObsMode::kForce;
  long step = 0;
  std::string config_text;  // full resolved config snapshot
  std::string config_hash;  // hash_hex(full_hash) of the snapshot

  bool operator==(const Checkpoint&) const = default;
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
/// Throws ConfigError when the stored hash does not match the stored snapshot.
Checkpoint parse_checkpoint(const std::string& text);
void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

struct TrainOptions {
  std::string out_dir;      // empty: keep everything in memory
  std::string config_text;  // snapshot written into checkpoints
};

struct TrainResult {
  PolicyParams policy;
  std::vector<MetricRow> metrics;
  std::vector<std::string> checkpoints;  // paths still on disk
  long bc_updates = 0;
};

/// BC warm start on the demos, then PPO with GAIL reward. Empty demos run pure PPO on
/// the extrinsic reward. Deterministic given config.seed.
TrainResult train(PipeEnv& env, const std::vector<Demonstration>& demos,
                  const TrainConfig& config, const TrainOptions& options);

}  // namespace pipeforge
