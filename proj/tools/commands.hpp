#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pipeforge/config.hpp"

namespace pipeforge::cli {

struct GenDemosArgs {
  std::string config;
  std::string group = "force";
  int count = -1;  // -1: demos.count from the config
  std::string condition = "fixed";
  std::uint64_t seed = 0;
  std::string out;
};

struct TrainArgs {
  std::string config;
  std::string demos = "none";
  std::string obs = "force";
  std::string out;
};

struct EvalArgs {
  std::string checkpoint;
  std::string condition = "1";
  int trials = 100;
  std::uint64_t seed = 0;
  std::string out;
};

struct ServeArgs {
  std::string config;
  unsigned short port = 8765;
  std::string record_dir = "demos";
};

/// PIPEFORGE_SEED, when set, wins over any --seed flag or config seed.
std::optional<std::uint64_t> seed_override();

/// Empty path: desk defaults.
Config load_config(const std::string& path);

/// Each command throws ConfigError or InvalidArgument for bad input and std::exception
/// for runtime failures; success returns normally.
void cmd_gen_demos(const GenDemosArgs& args, std::ostream& log);
void cmd_train(const TrainArgs& args, std::ostream& log);
void cmd_eval(const EvalArgs& args, std::ostream& log);
/// Blocks until SIGINT or SIGTERM.
void cmd_serve(const ServeArgs& args, std::ostream& log);

/// Writes <out>/manifest.json, replacing any previous one.
void write_manifest(const std::string& out_dir, const std::string& command,
                    const std::string& config_path, const Config& config, std::uint64_t seed,
                    const std::vector<std::string>& artifacts);

}  // namespace pipeforge::cli
