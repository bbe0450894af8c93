#include "pipeforge/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <initializer_list>
#include <memory>
#include <random>

#include "pipeforge/demos.hpp"
#include "pipeforge/errors.hpp"

namespace pipeforge {

Actor policy_actor(const PolicyParams& policy) {
  auto p = std::make_shared<const PolicyParams>(policy);
  return [p](const PipeEnv& env, const Observation& obs) {
    return act_deterministic(*p, obs, env.config().action_clamp);
  };
}

Actor expert_actor(const ExpertConfig& expert, std::uint64_t seed) {
  auto rng = std::make_shared<std::mt19937_64>(seed);
  return [expert, rng](const PipeEnv& env, const Observation&) {
    return scripted_expert_action(env, expert, *rng);
  };
}

Actor uniform_random_actor(std::uint64_t seed) {
  auto rng = std::make_shared<std::mt19937_64>(seed);
  return [rng](const PipeEnv& env, const Observation&) {
    const double c = env.config().action_clamp;
    std::uniform_real_distribution<double> u(-c, c);
    const double x = u(*rng);
    const double y = u(*rng);
    return Vec3{x, y, u(*rng)};
  };
}

TrialStats run_trials(PipeEnv& env, const Actor& actor, Condition condition, int n_trials,
                      std::uint64_t seed) {
  TrialStats stats;
  std::vector<double> lengths;
  for (int i = 0; i < n_trials; ++i) {
    Observation obs = env.reset(condition, seed + static_cast<std::uint64_t>(i));
    StepResult r;
    do {
      r = env.step(actor(env, obs));
      obs = r.observation;
    } while (!r.done);
    const int length = env.state().step_count;
    stats.records.push_back({i, r.success, length});
    ++stats.trials;
    if (r.success) {
      ++stats.successes;
      lengths.push_back(length);
    }
  }
  if (const auto s = summarize(lengths)) {
    stats.mean_len = s->mean;
    stats.std_len = s->std;
  }
  return stats;
}

std::optional<LengthSummary> summarize(const std::vector<double>& lengths) {
  if (lengths.empty()) return std::nullopt;
  const double n = static_cast<double>(lengths.size());
  double sum = 0.0;
  for (double v : lengths) sum += v;
  LengthSummary s;
  s.mean = sum / n;
  if (lengths.size() >= 2) {
    double ss = 0.0;
    for (double v : lengths) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

double GroupReport::mean_success_rate() const {
  if (trials.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& t : trials) sum += t.success_rate();
  return sum / static_cast<double>(trials.size());
}

Quartiles quartiles(std::vector<double> values) {
  if (values.empty()) throw InvalidArgument("quartiles of an empty sample");
  std::sort(values.begin(), values.end());
  auto at = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (values[hi] - values[lo]) * (pos - static_cast<double>(lo));
  };
  return {values.front(), at(0.25), at(0.5), at(0.75), values.back()};
}

namespace {

Quartiles rate_spread(const GroupReport& g) {
  std::vector<double> rates;
  for (const auto& t : g.trials) rates.push_back(t.success_rate());
  return rates.empty() ? Quartiles{} : quartiles(rates);
}

// Every run in every group must use the same number of evaluation trials.
bool consistent_trials(std::initializer_list<const GroupReport*> groups) {
  int expected = -1;
  for (const GroupReport* g : groups) {
    for (const auto& t : g->trials) {
      if (expected < 0) expected = t.trials;
      if (t.trials != expected) return false;
    }
  }
  return true;
}

}  // namespace

Comparison compare_groups(const GroupReport& force, const GroupReport& visual,
                          const GroupReport& baseline) {
  if (!consistent_trials({&force, &visual, &baseline})) {
    throw InvalidArgument("group reports have different trial counts");
  }
  Comparison c;
  c.force_rate = force.mean_success_rate();
  c.visual_rate = visual.mean_success_rate();
  c.baseline_rate = baseline.mean_success_rate();
  c.delta = c.force_rate - c.visual_rate;
  c.ordering = c.delta > 0.0 ? "force>visual" : c.delta < 0.0 ? "visual>force" : "tie";
  c.force_beats_baseline = c.force_rate >= c.baseline_rate;
  c.visual_beats_baseline = c.visual_rate >= c.baseline_rate;
  c.force_spread = rate_spread(force);
  c.visual_spread = rate_spread(visual);
  c.baseline_spread = rate_spread(baseline);
  return c;
}

std::string trials_csv(const TrialStats& stats) {
  std::string out = "trial,success,length\n";
  for (const auto& r : stats.records) {
    out += std::to_string(r.trial) + "," + (r.success ? "1" : "0") + "," +
           std::to_string(r.length) + "\n";
  }
  return out;
}

std::string summary_csv(const std::vector<std::pair<std::string, TrialStats>>& columns) {
  auto num = [](const std::optional<double>& v) {
    if (!v) return std::string();
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", *v);
    return std::string(buf);
  };
  std::string header = "metric";
  std::string success = "Success";
  std::string mean = "Mean";
  std::string std = "STD";
  for (const auto& [name, s] : columns) {
    header += "," + name;
    success += "," + std::to_string(s.successes);
    mean += "," + num(s.mean_len);
    std += "," + num(s.std_len);
  }
  return header + "\n" + success + "\n" + mean + "\n" + std + "\n";
}

}  // namespace pipeforge
