#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pipeforge/config.hpp"
#include "pipeforge/errors.hpp"
#include "pipeforge/eval.hpp"

using namespace pipeforge;

namespace {

TrialStats stats_with(int trials, int successes) {
  TrialStats s;
  s.trials = trials;
  s.successes = successes;
  return s;
}

GroupReport group(const std::string& name, std::initializer_list<int> successes) {
  GroupReport g{name, {}};
  for (int k : successes) g.trials.push_back(stats_with(100, k));
  return g;
}

}  // namespace

TEST(Summarize, HandExamples) {
  const auto s = summarize({100, 200, 300});
  ASSERT_TRUE(s.has_value());
  EXPECT_EQ(s->mean, 200.0);
  ASSERT_TRUE(s->std.has_value());
  EXPECT_EQ(*s->std, 100.0);

  const auto one = summarize({458});
  ASSERT_TRUE(one.has_value());
  EXPECT_EQ(one->mean, 458.0);
  EXPECT_FALSE(one->std.has_value());

  EXPECT_FALSE(summarize({}).has_value());
}

TEST(Summarize, MatchesTwoPassOracle) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> n_dist(2, 200);
  std::uniform_real_distribution<double> len(10.0, 2000.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(n_dist(rng));
    for (double& x : v) x = std::round(len(rng));
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= v.size();
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / (v.size() - 1));
    const auto s = summarize(v);
    ASSERT_TRUE(s && s->std);
    EXPECT_LE(std::abs(s->mean - mean), 1e-12 * mean);
    EXPECT_LE(std::abs(*s->std - sd), 1e-12 * std::max(sd, 1.0));
  }
}

TEST(Compare, HandExamples) {
  const GroupReport force = group("force", {80, 80});
  const GroupReport visual = group("visual", {30, 30});
  const GroupReport base = group("rl", {10, 10});
  const Comparison c = compare_groups(force, visual, base);
  EXPECT_NEAR(c.force_rate, 0.8, 1e-12);
  EXPECT_NEAR(c.delta, 0.5, 1e-12);
  EXPECT_EQ(c.ordering, "force>visual");
  EXPECT_TRUE(c.force_beats_baseline);
  EXPECT_TRUE(c.visual_beats_baseline);

  const Comparison tie = compare_groups(force, force, base);
  EXPECT_EQ(tie.delta, 0.0);
  EXPECT_EQ(tie.ordering, "tie");

  EXPECT_EQ(compare_groups(visual, force, base).ordering, "visual>force");
}

TEST(Compare, ReferenceDeltaArithmetic) {
  // Group means from the inner-randomization experiment, used only to check the arithmetic.
  GroupReport force{"force", {stats_with(1000, 812)}};
  GroupReport visual{"visual", {stats_with(1000, 276)}};
  GroupReport base{"rl", {stats_with(1000, 240)}};
  EXPECT_NEAR(compare_groups(force, visual, base).delta * 100.0, 53.6, 1e-9);
}

TEST(Compare, SpreadsAndTrialCountCheck) {
  const GroupReport force = group("force", {100, 80, 94, 89, 75});
  const Comparison c = compare_groups(force, group("visual", {1, 2, 3, 4, 5}), group("rl", {0}));
  EXPECT_EQ(c.force_spread.min, 0.75);
  EXPECT_EQ(c.force_spread.median, 0.89);
  EXPECT_EQ(c.force_spread.max, 1.0);

  GroupReport uneven = group("visual", {30});
  uneven.trials[0].trials = 50;
  EXPECT_THROW(compare_groups(force, uneven, group("rl", {0})), InvalidArgument);
}

TEST(Quartiles, LinearInterpolation) {
  const Quartiles q = quartiles({4, 1, 3, 2, 5});
  EXPECT_EQ(q.min, 1);
  EXPECT_EQ(q.q1, 2);
  EXPECT_EQ(q.median, 3);
  EXPECT_EQ(q.q3, 4);
  EXPECT_EQ(q.max, 5);
  EXPECT_DOUBLE_EQ(quartiles({1, 2, 3, 4}).median, 2.5);
}

TEST(Trials, ExpertGateOnFixedCondition) {
  const Config cfg = Config::desk();
  PipeEnv env(cfg.sim);
  const TrialStats s = run_trials(env, expert_actor(cfg.expert, 0), Condition::kFixed, 100, 0);
  EXPECT_GE(s.successes, 95);
}

TEST(Trials, RandomUniformFloorOnConditionOne) {
  const Config cfg = Config::desk();
  PipeEnv env(cfg.sim);
  const TrialStats s =
      run_trials(env, uniform_random_actor(3), Condition::kInnerRandom, 100, 0);
  EXPECT_LE(s.successes, 5);
  EXPECT_EQ(s.trials, 100);
}

TEST(Trials, DeterministicAndConsistent) {
  const Config cfg = Config::desk();
  PipeEnv env(cfg.sim);
  const Actor expert = expert_actor(cfg.expert, 11);
  const TrialStats a = run_trials(env, expert, Condition::kTargetRandom, 12, 40);
  const TrialStats b = run_trials(env, expert_actor(cfg.expert, 11), Condition::kTargetRandom, 12, 40);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.records.size(), 12u);
  int wins = 0;
  for (const auto& r : a.records) {
    EXPECT_LE(r.length, cfg.sim.max_step);
    wins += r.success ? 1 : 0;
  }
  EXPECT_EQ(wins, a.successes);
  EXPECT_LE(a.successes, a.trials);
}

TEST(Trials, SeedIsPerTrialOffset) {
  const Config cfg = Config::desk();
  PipeEnv env(cfg.sim);
  const TrialStats all = run_trials(env, expert_actor(cfg.expert, 5), Condition::kInnerRandom, 4, 20);
  const TrialStats tail = run_trials(env, expert_actor(cfg.expert, 5), Condition::kInnerRandom, 1, 23);
  EXPECT_EQ(all.records[3].success, tail.records[0].success);
}

TEST(Csv, TrialAndSummaryFormats) {
  TrialStats s = stats_with(3, 2);
  s.records = {{0, true, 458}, {1, false, 2000}, {2, true, 460}};
  s.mean_len = 459.0;
  s.std_len = std::sqrt(2.0);
  EXPECT_EQ(trials_csv(s), "trial,success,length\n0,1,458\n1,0,2000\n2,1,460\n");
  TrialStats none = stats_with(3, 0);
  EXPECT_EQ(summary_csv({{"1", s}, {"RL", none}}),
            "metric,1,RL\nSuccess,2,0\nMean,459,\nSTD,1.41421,\n");
}
