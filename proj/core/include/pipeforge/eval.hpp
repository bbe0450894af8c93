#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pipeforge/config.hpp"
#include "pipeforge/env.hpp"
#include "pipeforge/learn.hpp"

namespace pipeforge {

/// Maps the current observation to an action. May read privileged env state.
using Actor = std::function<Vec3(const PipeEnv&, const Observation&)>;

Actor policy_actor(const PolicyParams& policy);
/// Scripted expert with its own jitter stream seeded by `seed`.
Actor expert_actor(const ExpertConfig& expert, std::uint64_t seed);
Actor uniform_random_actor(std::uint64_t seed);

struct TrialRecord {
  int trial = 0;
  bool success = false;
  int length = 0;

  bool operator==(const TrialRecord&) const = default;
};

struct TrialStats {
  int trials = 0;
  int successes = 0;
  std::optional<double> mean_len;  // successful trials only
  std::optional<double> std_len;   // sample std, needs two successes
  std::vector<TrialRecord> records;

  double success_rate() const { return trials > 0 ? static_cast<double>(successes) / trials : 0.0; }
  bool operator==(const TrialStats&) const = default;
};

/// Episode i starts from reset(condition, seed + i).
TrialStats run_trials(PipeEnv& env, const Actor& actor, Condition condition, int n_trials,
                      std::uint64_t seed);

struct LengthSummary {
  double mean = 0.0;
  std::optional<double> std;  // n - 1 denominator
};

/// nullopt when there were no successes.
std::optional<LengthSummary> summarize(const std::vector<double>& lengths);

struct GroupReport {
  std::string name;
  std::vector<TrialStats> trials;

  double mean_success_rate() const;
};

struct Quartiles {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

/// Linear-interpolation quantiles; throws InvalidArgument on empty input.
Quartiles quartiles(std::vector<double> values);

struct Comparison {
  double force_rate = 0.0;
  double visual_rate = 0.0;
  double baseline_rate = 0.0;
  double delta = 0.0;             // force minus visual
  std::string ordering;           // "force>visual", "visual>force" or "tie"
  bool force_beats_baseline = false;
  bool visual_beats_baseline = false;
  Quartiles force_spread;
  Quartiles visual_spread;
  Quartiles baseline_spread;
};

/// Throws InvalidArgument when trial counts differ between the reports.
Comparison compare_groups(const GroupReport& force, const GroupReport& visual,
                          const GroupReport& baseline);

std::string trials_csv(const TrialStats& stats);
/// Success / Mean / STD rows with one column per named report.
std::string summary_csv(const std::vector<std::pair<std::string, TrialStats>>& columns);

}  // namespace pipeforge
