#include "pipeforge/learn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "pipeforge/errors.hpp"

namespace pipeforge {

namespace {

std::vector<int> layer_dims(int in, int hidden, int layers, int out) {
  std::vector<int> dims{in};
  for (int i = 0; i < layers; ++i) dims.push_back(hidden);
  dims.push_back(out);
  return dims;
}

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Eigen::MatrixXd disc_input(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& actions) {
  if (obs.cols() != actions.cols() || actions.rows() != 3) {
    throw InvalidArgument("observation and action batches do not line up");
  }
  Eigen::MatrixXd x(obs.rows() + 3, obs.cols());
  x << obs, actions;
  return x;
}

}  // namespace

ObsNormalizer ObsNormalizer::identity(int dim, double clip) {
  ObsNormalizer n;
  n.mean = Eigen::VectorXd::Zero(dim);
  n.m2 = Eigen::VectorXd::Zero(dim);
  n.clip = clip;
  return n;
}

void ObsNormalizer::update(const Eigen::MatrixXd& samples) {
  if (samples.cols() == 0) return;
  if (samples.rows() != mean.size()) throw InvalidArgument("normalizer dimension mismatch");
  const double nb = static_cast<double>(samples.cols());
  const Eigen::VectorXd mean_b = samples.rowwise().mean();
  const Eigen::VectorXd m2_b =
      (samples.colwise() - mean_b).array().square().rowwise().sum().matrix();
  const double total = count + nb;
  const Eigen::VectorXd delta = mean_b - mean;
  mean += delta * (nb / total);
  m2 += m2_b + delta.cwiseAbs2() * (count * nb / total);
  count = total;
}

Eigen::VectorXd ObsNormalizer::std() const {
  if (count < 2.0) return Eigen::VectorXd::Ones(mean.size());
  return (m2 / count).cwiseSqrt().cwiseMax(min_std);
}

Eigen::MatrixXd ObsNormalizer::apply(const Eigen::MatrixXd& samples) const {
  if (samples.rows() != mean.size()) throw InvalidArgument("normalizer dimension mismatch");
  const Eigen::ArrayXd inv = std().cwiseInverse().array();
  Eigen::MatrixXd out = ((samples.colwise() - mean).array().colwise() * inv).matrix();
  return out.cwiseMax(-clip).cwiseMin(clip);
}

PolicyParams make_policy(int obs_dim, const TrainConfig& config, std::mt19937_64& rng) {
  PolicyParams p;
  p.mean = make_mlp(layer_dims(obs_dim, config.policy_hidden, config.policy_layers, 3), rng, 0.01);
  p.value = make_mlp(layer_dims(obs_dim, config.policy_hidden, config.policy_layers, 1), rng);
  p.log_std = Eigen::Vector3d::Constant(std::clamp(config.log_std_init, kLogStdMin, kLogStdMax));
  p.normalizer = ObsNormalizer::identity(obs_dim, config.obs_clip);
  return p;
}

Eigen::MatrixXd policy_mean(const PolicyParams& policy, const Eigen::MatrixXd& obs) {
  return mlp_forward_batch(policy.mean, policy.normalizer.apply(obs));
}

Eigen::VectorXd policy_value(const PolicyParams& policy, const Eigen::MatrixXd& obs) {
  return mlp_forward_batch(policy.value, policy.normalizer.apply(obs)).row(0).transpose();
}

double gaussian_log_prob(const Eigen::Vector3d& mean, const Eigen::Vector3d& log_std,
                         const Eigen::Vector3d& action) {
  const Eigen::Array3d z = (action - mean).array() / log_std.array().exp();
  return (-0.5 * z.square() - log_std.array() - 0.5 * std::log(2.0 * std::numbers::pi)).sum();
}

double gaussian_entropy(const Eigen::Vector3d& log_std) {
  return (log_std.array() + 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e)).sum();
}

Vec3 act_deterministic(const PolicyParams& policy, const Observation& obs, double action_clamp) {
  const Eigen::Map<const Eigen::VectorXd> x(obs.data(), static_cast<Eigen::Index>(obs.size()));
  const Eigen::VectorXd m = policy_mean(policy, x);
  return Vec3{m(0), m(1), m(2)} * action_clamp;
}

DiscriminatorParams make_discriminator(int obs_dim, const TrainConfig& config,
                                       std::mt19937_64& rng) {
  return {make_mlp(layer_dims(obs_dim + 3, config.disc_hidden, config.disc_layers, 1), rng)};
}

Eigen::VectorXd discriminator_logits(const DiscriminatorParams& disc, const Eigen::MatrixXd& obs,
                                     const Eigen::MatrixXd& actions) {
  return mlp_forward_batch(disc.net, disc_input(obs, actions)).row(0).transpose();
}

double discriminator_probability(double logit) {
  constexpr double kEps = 1e-12;
  return std::clamp(sigmoid(logit), kEps, 1.0 - kEps);
}

PolicyOptimizer::PolicyOptimizer(const PolicyParams& policy)
    : mean(policy.mean.parameter_count()), log_std(3), value(policy.value.parameter_count()) {}

LossGrad bc_loss_grad(const PolicyParams& policy, const Eigen::MatrixXd& obs,
                      const Eigen::MatrixXd& actions) {
  if (obs.cols() == 0) throw InvalidArgument("empty behavioral-cloning batch");
  if (obs.rows() != policy.obs_dim()) {
    throw InvalidArgument("batch observation variant does not match the policy");
  }
  if (actions.rows() != 3 || actions.cols() != obs.cols()) {
    throw InvalidArgument("action batch does not match observations");
  }
  MlpTape tape;
  const Eigen::MatrixXd mean = mlp_forward_batch(policy.mean, policy.normalizer.apply(obs), &tape);
  const Eigen::MatrixXd diff = mean - actions;
  const double n = static_cast<double>(diff.size());
  return {diff.squaredNorm() / n, flatten_grads(mlp_backward(policy.mean, tape, diff * (2.0 / n)))};
}

double bc_update(PolicyParams& policy, Adam& optimizer, const Eigen::MatrixXd& obs,
                 const Eigen::MatrixXd& actions, double lr, double strength) {
  const LossGrad lg = bc_loss_grad(policy, obs, actions);
  if (strength == 0.0 || lr == 0.0) return lg.loss;
  Eigen::VectorXd flat = flatten_params(policy.mean);
  optimizer.step(flat, lg.grad * strength, lr);
  assign_params(policy.mean, flat);
  return lg.loss;
}

DiscriminatorEval discriminator_loss_grad(const DiscriminatorParams& disc,
                                          const Eigen::MatrixXd& expert_obs,
                                          const Eigen::MatrixXd& expert_actions,
                                          const Eigen::MatrixXd& policy_obs,
                                          const Eigen::MatrixXd& policy_actions) {
  if (expert_obs.cols() == 0 || policy_obs.cols() == 0) {
    throw InvalidArgument("discriminator batches must be nonempty");
  }
  if (expert_obs.rows() != disc.obs_dim() || policy_obs.rows() != disc.obs_dim()) {
    throw InvalidArgument("batch observation variant does not match the discriminator");
  }
  const Eigen::Index ne = expert_obs.cols();
  const Eigen::Index np = policy_obs.cols();
  Eigen::MatrixXd x(disc.net.input_dim(), ne + np);
  x << disc_input(expert_obs, expert_actions), disc_input(policy_obs, policy_actions);

  MlpTape tape;
  const Eigen::RowVectorXd z = mlp_forward_batch(disc.net, x, &tape).row(0);
  const double n = static_cast<double>(ne + np);
  Eigen::MatrixXd dz(1, ne + np);
  DiscriminatorEval out;
  DiscriminatorStep& st = out.stats;
  double correct = 0.0;
  for (Eigen::Index i = 0; i < ne + np; ++i) {
    const bool expert = i < ne;
    const double d = sigmoid(z(i));
    st.loss += expert ? softplus(-z(i)) : softplus(z(i));
    dz(0, i) = (expert ? d - 1.0 : d) / n;
    if (expert) {
      st.mean_expert += d;
      correct += d > 0.5 ? 1.0 : 0.0;
    } else {
      st.mean_policy += d;
      correct += d < 0.5 ? 1.0 : 0.0;
    }
  }
  st.loss /= n;
  st.accuracy = correct / n;
  st.mean_expert /= static_cast<double>(ne);
  st.mean_policy /= static_cast<double>(np);
  out.grad = flatten_grads(mlp_backward(disc.net, tape, dz));
  return out;
}

DiscriminatorStep gail_discriminator_update(DiscriminatorParams& disc, Adam& optimizer,
                                            const Eigen::MatrixXd& expert_obs,
                                            const Eigen::MatrixXd& expert_actions,
                                            const Eigen::MatrixXd& policy_obs,
                                            const Eigen::MatrixXd& policy_actions, double lr) {
  const DiscriminatorEval e =
      discriminator_loss_grad(disc, expert_obs, expert_actions, policy_obs, policy_actions);
  if (lr == 0.0) return e.stats;
  Eigen::VectorXd flat = flatten_params(disc.net);
  optimizer.step(flat, e.grad, lr);
  assign_params(disc.net, flat);
  return e.stats;
}

double gail_reward_from_probability(double d, double strength) {
  if (d <= 0.0) return 0.0;
  if (d >= 1.0) return strength * kGailRewardCap;
  return strength * std::min(-std::log1p(-d), kGailRewardCap);
}

Eigen::VectorXd gail_rewards(const DiscriminatorParams& disc, const Eigen::MatrixXd& obs,
                             const Eigen::MatrixXd& actions, double strength) {
  const Eigen::VectorXd z = discriminator_logits(disc, obs, actions);
  Eigen::VectorXd r(z.size());
  // -log(1 - sigmoid(z)) is softplus(z); stays exact where D rounds to 1.
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    r(i) = strength * std::min(softplus(z(i)), kGailRewardCap);
  }
  return r;
}

GaeResult gae(const std::vector<double>& rewards, const std::vector<double>& values,
              const std::vector<bool>& dones, double gamma, double lambda, double last_value) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) {
    throw InvalidArgument("rewards, values and dones must have equal length");
  }
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double running = 0.0;
  double next_value = last_value;
  for (std::size_t i = n; i-- > 0;) {
    const double live = dones[i] ? 0.0 : 1.0;
    const double delta = rewards[i] + gamma * next_value * live - values[i];
    running = delta + gamma * lambda * live * running;
    out.advantages[i] = running;
    out.returns[i] = running + values[i];
    next_value = values[i];
  }
  return out;
}

void RolloutBuffer::clear() {
  obs.clear();
  actions.clear();
  log_probs.clear();
  values.clear();
  extrinsic.clear();
  gail.clear();
  dones.clear();
  last_value = 0.0;
}

SurrogateTerm ppo_surrogate(double ratio, double advantage, double clip) {
  const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
  const double unclipped_value = ratio * advantage;
  const double clipped_value = clipped * advantage;
  if (unclipped_value <= clipped_value) return {unclipped_value, advantage};
  return {clipped_value, 0.0};
}

std::vector<double> normalize_advantages(const std::vector<double>& advantages) {
  if (advantages.empty()) return {};
  const double n = static_cast<double>(advantages.size());
  const double mean = std::accumulate(advantages.begin(), advantages.end(), 0.0) / n;
  double var = 0.0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  const double std = std::sqrt(var / n);
  std::vector<double> out(advantages.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (advantages[i] - mean) / (std + 1e-8);
  return out;
}

PpoLossGrad ppo_loss_grad(const PolicyParams& policy, const PpoBatch& batch,
                          const TrainConfig& config) {
  const Eigen::Index b = batch.obs.cols();
  if (b == 0 || batch.actions.cols() != b || batch.old_log_probs.size() != b ||
      batch.advantages.size() != b || batch.returns.size() != b) {
    throw InvalidArgument("inconsistent PPO minibatch");
  }
  MlpTape mean_tape;
  MlpTape value_tape;
  const Eigen::MatrixXd mu = mlp_forward_batch(policy.mean, batch.obs, &mean_tape);
  const Eigen::MatrixXd v = mlp_forward_batch(policy.value, batch.obs, &value_tape);
  const Eigen::Array3d sigma = policy.log_std.array().exp();

  PpoLossGrad out;
  Eigen::MatrixXd d_mu(3, b);
  Eigen::MatrixXd d_v(1, b);
  out.log_std_grad = Eigen::Vector3d::Constant(-config.entropy_coef);
  const double inv_b = 1.0 / static_cast<double>(b);
  for (Eigen::Index k = 0; k < b; ++k) {
    const Eigen::Vector3d a = batch.actions.col(k);
    const double adv = batch.advantages(k);
    const double ratio =
        std::exp(gaussian_log_prob(mu.col(k), policy.log_std, a) - batch.old_log_probs(k));
    const SurrogateTerm s = ppo_surrogate(ratio, adv, config.ppo_clip);
    out.policy_loss -= s.value * inv_b;
    if (s.d_ratio == 0.0 && adv != 0.0) out.clipped += 1.0;
    // d(log p)/d(mu) = z / sigma and d(log p)/d(log sigma) = z^2 - 1.
    const double d_logp = -s.d_ratio * ratio * inv_b;
    const Eigen::Array3d z = (a - mu.col(k)).array() / sigma;
    d_mu.col(k) = (d_logp * z / sigma).matrix();
    out.log_std_grad += (d_logp * (z.square() - 1.0)).matrix();

    const double err = v(0, k) - batch.returns(k);
    out.value_loss += err * err * inv_b;
    d_v(0, k) = config.value_coef * 2.0 * err * inv_b;
  }
  out.total = out.policy_loss + config.value_coef * out.value_loss -
              config.entropy_coef * gaussian_entropy(policy.log_std);
  out.mean_grad = flatten_grads(mlp_backward(policy.mean, mean_tape, d_mu));
  out.value_grad = flatten_grads(mlp_backward(policy.value, value_tape, d_v));
  return out;
}

PpoDiagnostics ppo_update(PolicyParams& policy, PolicyOptimizer& optimizer,
                          const RolloutBuffer& buffer, const TrainConfig& config, double lr,
                          std::mt19937_64& rng) {
  const std::size_t n = buffer.size();
  if (n == 0 || n < static_cast<std::size_t>(config.buffer_size)) {
    throw ProtocolError("PPO update on an underfull buffer");
  }
  std::vector<double> rewards(n);
  for (std::size_t i = 0; i < n; ++i) {
    rewards[i] = config.extrinsic_strength * buffer.extrinsic[i] + buffer.gail[i];
  }
  const GaeResult g =
      gae(rewards, buffer.values, buffer.dones, config.gamma, config.gae_lambda, buffer.last_value);
  const std::vector<double> adv = normalize_advantages(g.advantages);

  const int dim = policy.obs_dim();
  Eigen::MatrixXd all_obs(dim, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (buffer.obs[i].size() != static_cast<std::size_t>(dim)) {
      throw InvalidArgument("buffer observation variant does not match the policy");
    }
    all_obs.col(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::VectorXd>(buffer.obs[i].data(), dim);
  }
  const Eigen::MatrixXd normed = policy.normalizer.apply(all_obs);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  PpoDiagnostics diag;
  long minibatches = 0;
  double clipped = 0.0;
  double samples = 0.0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      const auto b = static_cast<Eigen::Index>(end - start);
      PpoBatch mb;
      mb.obs.resize(dim, b);
      mb.actions.resize(3, b);
      mb.old_log_probs.resize(b);
      mb.advantages.resize(b);
      mb.returns.resize(b);
      for (Eigen::Index k = 0; k < b; ++k) {
        const std::size_t i = order[start + static_cast<std::size_t>(k)];
        mb.obs.col(k) = normed.col(static_cast<Eigen::Index>(i));
        mb.actions.col(k) = buffer.actions[i];
        mb.old_log_probs(k) = buffer.log_probs[i];
        mb.advantages(k) = adv[i];
        mb.returns(k) = g.returns[i];
      }
      const PpoLossGrad lg = ppo_loss_grad(policy, mb, config);
      clipped += lg.clipped;
      samples += static_cast<double>(b);

      Eigen::VectorXd flat_mean = flatten_params(policy.mean);
      optimizer.mean.step(flat_mean, lg.mean_grad, lr);
      assign_params(policy.mean, flat_mean);
      Eigen::VectorXd flat_value = flatten_params(policy.value);
      optimizer.value.step(flat_value, lg.value_grad, lr);
      assign_params(policy.value, flat_value);
      Eigen::VectorXd log_std = policy.log_std;
      optimizer.log_std.step(log_std, lg.log_std_grad, lr);
      policy.log_std = log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);

      diag.policy_loss += lg.policy_loss;
      diag.value_loss += lg.value_loss;
      ++minibatches;
    }
  }
  diag.policy_loss /= static_cast<double>(minibatches);
  diag.value_loss /= static_cast<double>(minibatches);
  diag.entropy = gaussian_entropy(policy.log_std);
  diag.clip_fraction = clipped / samples;
  return diag;
}

double learning_rate_at(const TrainConfig& config, long step) {
  if (step >= config.total_steps) return 0.0;
  const double frac = static_cast<double>(step) / static_cast<double>(config.total_steps);
  return config.learning_rate * (1.0 - std::max(0.0, frac));
}

}  // namespace pipeforge
