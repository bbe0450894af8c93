#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>

#include "pipeforge/errors.hpp"
#include "pipeforge/learn.hpp"

namespace pipeforge {

namespace {

struct ExpertData {
  Eigen::MatrixXd obs;
  Eigen::MatrixXd actions;  // policy units
};

ExpertData stack_demos(const std::vector<Demonstration>& demos, int dim, double clamp) {
  std::size_t n = 0;
  for (const auto& d : demos) n += d.transitions.size();
  ExpertData e;
  e.obs.resize(dim, static_cast<Eigen::Index>(n));
  e.actions.resize(3, static_cast<Eigen::Index>(n));
  Eigen::Index k = 0;
  for (const auto& d : demos) {
    for (const auto& t : d.transitions) {
      if (t.obs.size() != static_cast<std::size_t>(dim)) {
        throw ConfigError("demo observation length does not match the observation mode");
      }
      e.obs.col(k) = Eigen::Map<const Eigen::VectorXd>(t.obs.data(), dim);
      e.actions.col(k) = Eigen::Vector3d(t.action.x, t.action.y, t.action.z) / clamp;
      ++k;
    }
  }
  return e;
}

void sample_columns(const ExpertData& src, int count, std::mt19937_64& rng, Eigen::MatrixXd& obs,
                    Eigen::MatrixXd& actions) {
  std::uniform_int_distribution<Eigen::Index> pick(0, src.obs.cols() - 1);
  obs.resize(src.obs.rows(), count);
  actions.resize(3, count);
  for (int i = 0; i < count; ++i) {
    const Eigen::Index j = pick(rng);
    obs.col(i) = src.obs.col(j);
    actions.col(i) = src.actions.col(j);
  }
}

std::string checkpoint_name(long step) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "checkpoint_%09ld.json", step);
  return buf;
}

class Recorder {
 public:
  Recorder(const TrainConfig& config, const TrainOptions& options, ObsMode mode)
      : config_(config), options_(options), mode_(mode) {
    if (!options_.out_dir.empty()) {
      if (options_.config_text.empty()) {
        throw InvalidArgument("training output needs a config snapshot");
      }
      std::filesystem::create_directories(options_.out_dir);
      hash_ = hash_hex(Config::from_text(options_.config_text).full_hash());
    }
  }

  void row(const MetricRow& r, const PolicyParams& policy, TrainResult& result) {
    result.metrics.push_back(r);
    if (options_.out_dir.empty()) return;
    const std::filesystem::path dir(options_.out_dir);
    std::ofstream(dir / "metrics.csv", std::ios::binary) << metrics_csv(result.metrics);
    const std::string path = (dir / checkpoint_name(r.step)).string();
    save_checkpoint({policy, mode_, r.step, options_.config_text, hash_}, path);
    kept_.push_back(path);
    while (kept_.size() > static_cast<std::size_t>(config_.checkpoints_kept)) {
      std::filesystem::remove(kept_.front());
      kept_.pop_front();
    }
    result.checkpoints.assign(kept_.begin(), kept_.end());
  }

 private:
  const TrainConfig& config_;
  const TrainOptions& options_;
  ObsMode mode_;
  std::string hash_;
  std::deque<std::string> kept_;
};

struct EpisodeWindow {
  double current_return = 0.0;
  double returns = 0.0;
  double successes = 0.0;
  double episodes = 0.0;

  MetricRow take(long step, double disc_expert, double disc_policy) {
    MetricRow r{step, episodes > 0 ? returns / episodes : current_return,
                episodes > 0 ? successes / episodes : 0.0, disc_expert, disc_policy};
    returns = successes = episodes = 0.0;
    return r;
  }
};

}  // namespace

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::string out = "step,cum_reward,success_rate,disc_expert,disc_policy\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%ld,%.10g,%.10g,%.10g,%.10g\n", r.step, r.cum_reward,
                  r.success_rate, r.disc_expert, r.disc_policy);
    out += buf;
  }
  return out;
}

TrainResult train(PipeEnv& env, const std::vector<Demonstration>& demos,
                  const TrainConfig& config, const TrainOptions& options) {
  const ObsMode mode = env.mode();
  const bool imitation = !demos.empty();
  for (const auto& d : demos) {
    if (d.meta.group != mode) {
      throw InvalidArgument("demo group " + std::string(to_string(d.meta.group)) +
                        " does not match observation mode " + std::string(to_string(mode)));
    }
  }
  const int dim = static_cast<int>(obs_dim(mode));
  const double clamp = env.config().action_clamp;
  std::mt19937_64 rng(config.seed);
  TrainResult result;
  Recorder recorder(config, options, mode);

  PolicyParams policy = make_policy(dim, config, rng);
  DiscriminatorParams disc;
  ExpertData expert;
  if (imitation) {
    disc = make_discriminator(dim, config, rng);
    expert = stack_demos(demos, dim, clamp);
    policy.normalizer.update(expert.obs);
  }

  long step = 0;
  Eigen::MatrixXd batch_obs;
  Eigen::MatrixXd batch_act;
  if (imitation && config.bc_strength > 0.0) {
    const long bc_budget = std::min(config.bc_steps, config.total_steps);
    Adam bc_opt(policy.mean.parameter_count());
    for (long done = 0; done + config.bc_step_cost <= bc_budget; done += config.bc_step_cost) {
      sample_columns(expert, config.batch_size, rng, batch_obs, batch_act);
      const double anneal = 1.0 - static_cast<double>(done) / static_cast<double>(config.bc_steps);
      bc_update(policy, bc_opt, batch_obs, batch_act, config.learning_rate * anneal,
                config.bc_strength);
      ++result.bc_updates;
    }
    step = bc_budget;
  }

  PolicyOptimizer opt(policy);
  Adam disc_opt(disc.net.parameter_count());
  double disc_expert = 0.0;
  double disc_policy = 0.0;
  EpisodeWindow window;
  long next_summary = (step / config.summary_every + 1) * config.summary_every;
  RolloutBuffer buffer;
  std::normal_distribution<double> noise(0.0, 1.0);
  Observation obs = step < config.total_steps ? env.reset(config.condition, rng()) : Observation{};
  const std::size_t buffer_size = static_cast<std::size_t>(config.buffer_size);

  while (step < config.total_steps) {
    buffer.clear();
    while (buffer.size() < buffer_size && step < config.total_steps) {
      const Eigen::Map<const Eigen::VectorXd> x(obs.data(), dim);
      const Eigen::MatrixXd xn = policy.normalizer.apply(x);
      const Eigen::Vector3d mu = mlp_forward_batch(policy.mean, xn).col(0);
      const double value = mlp_forward_batch(policy.value, xn)(0, 0);
      Eigen::Vector3d u;
      for (int k = 0; k < 3; ++k) u(k) = mu(k) + std::exp(policy.log_std(k)) * noise(rng);
      const StepResult r = env.step(Vec3{u(0), u(1), u(2)} * clamp);

      buffer.obs.push_back(obs);
      buffer.actions.push_back(u);
      buffer.log_probs.push_back(gaussian_log_prob(mu, policy.log_std, u));
      buffer.values.push_back(value);
      buffer.extrinsic.push_back(r.reward);
      buffer.gail.push_back(0.0);
      buffer.dones.push_back(r.done);
      ++step;

      window.current_return += r.reward;
      if (r.done) {
        window.returns += window.current_return;
        window.successes += r.success ? 1.0 : 0.0;
        window.episodes += 1.0;
        window.current_return = 0.0;
        obs = env.reset(config.condition, rng());
      } else {
        obs = r.observation;
      }
      if (step >= next_summary) {
        recorder.row(window.take(step, disc_expert, disc_policy), policy, result);
        next_summary += config.summary_every;
      }
    }
    if (buffer.size() < buffer_size) break;

    const Eigen::Map<const Eigen::VectorXd> x_last(obs.data(), dim);
    buffer.last_value = buffer.dones.back() ? 0.0 : policy_value(policy, x_last)(0);

    Eigen::MatrixXd raw(dim, config.buffer_size);
    Eigen::MatrixXd acts(3, config.buffer_size);
    for (int i = 0; i < config.buffer_size; ++i) {
      raw.col(i) = Eigen::Map<const Eigen::VectorXd>(buffer.obs[i].data(), dim);
      acts.col(i) = buffer.actions[i];
    }
    const double lr = learning_rate_at(config, step);
    if (imitation) {
      const Eigen::MatrixXd normed = policy.normalizer.apply(raw);
      const Eigen::VectorXd g = gail_rewards(disc, normed, acts, config.gail_strength);
      for (int i = 0; i < config.buffer_size; ++i) buffer.gail[i] = g(i);

      // One discriminator pass over the buffer, paired with equally many expert samples.
      double sum_e = 0.0;
      double sum_p = 0.0;
      int passes = 0;
      for (int start = 0; start < config.buffer_size; start += config.batch_size) {
        const int b = std::min(config.batch_size, config.buffer_size - start);
        sample_columns(expert, b, rng, batch_obs, batch_act);
        const DiscriminatorStep ds = gail_discriminator_update(
            disc, disc_opt, policy.normalizer.apply(batch_obs), batch_act,
            normed.middleCols(start, b), acts.middleCols(start, b), lr);
        sum_e += ds.mean_expert;
        sum_p += ds.mean_policy;
        ++passes;
      }
      disc_expert = sum_e / passes;
      disc_policy = sum_p / passes;
    }
    ppo_update(policy, opt, buffer, config, lr, rng);
    policy.normalizer.update(raw);
  }

  if (result.metrics.empty() || result.metrics.back().step != step) {
    recorder.row(window.take(step, disc_expert, disc_policy), policy, result);
  }
  result.policy = std::move(policy);
  return result;
}

}  // namespace pipeforge
