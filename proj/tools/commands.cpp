#include "commands.hpp"

#include <algorithm>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <pthread.h>
#include <sstream>
#include <thread>

#include "pipeforge/demos.hpp"
#include "pipeforge/errors.hpp"
#include "pipeforge/eval.hpp"
#include "pipeforge/learn.hpp"
#include "pipeforge/teleop.hpp"

namespace pipeforge::cli {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
}

std::vector<fs::path> demo_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("demo directory '" + dir.string() + "' not found");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("no .jsonl demonstrations in '" + dir.string() + "'");
  return files;
}

}  // namespace

std::optional<std::uint64_t> seed_override() {
  const char* v = std::getenv("PIPEFORGE_SEED");
  if (!v || !*v) return std::nullopt;
  char* end = nullptr;
  const unsigned long long seed = std::strtoull(v, &end, 10);
  if (*end != '\0') throw ConfigError("PIPEFORGE_SEED must be a non-negative integer");
  return seed;
}

Config load_config(const std::string& path) {
  return path.empty() ? Config::desk() : Config::load(path);
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const std::string& config_path, const Config& config, std::uint64_t seed,
                    const std::vector<std::string>& artifacts) {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["config_path"] = config_path;
  j["config"] = config.to_text();
  j["config_hash"] = hash_hex(config.full_hash());
  j["seed"] = seed;
  j["output_dir"] = out_dir;
  nlohmann::ordered_json hashes = nlohmann::ordered_json::object();
  for (const auto& a : artifacts) {
    hashes[fs::path(a).filename().string()] = hash_hex(fnv1a64(read_file(a)));
  }
  j["artifacts"] = hashes;
  write_file(fs::path(out_dir) / "manifest.json", j.dump(2) + "\n");
}

void cmd_gen_demos(const GenDemosArgs& args, std::ostream& log) {
  Config config = load_config(args.config);
  const ObsMode group = parse_obs_mode(args.group);
  if (group == ObsMode::kBaseline) throw ConfigError("--group must be force or visual");
  const Condition condition = parse_condition(args.condition);
  const std::uint64_t seed = seed_override().value_or(args.seed);
  const int count = args.count >= 0 ? args.count : config.demo_count;
  if (count <= 0) throw ConfigError("--count must be positive");
  if (args.out.empty()) throw ConfigError("--out is required");
  fs::create_directories(args.out);

  const std::string hash = demo_config_hash(config);
  PipeEnv env(config.sim, group);
  std::vector<std::string> files;
  for (int i = 0; i < count; ++i) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(i);
    const Demonstration demo = record_demo(env, config.expert, group, condition, s, hash);
    const ValidationReport report = validate_demo(demo, config.sim, hash);
    if (!report.ok) {
      std::string why;
      for (const auto& r : report.reasons) why += "\n  " + r;
      throw std::runtime_error("demo for seed " + std::to_string(s) + " failed validation:" + why);
    }
    char name[64];
    std::snprintf(name, sizeof name, "demo_%s_%03d.jsonl", std::string(to_string(group)).c_str(), i);
    const fs::path path = fs::path(args.out) / name;
    save_demo(demo, path.string());
    files.push_back(path.string());
    log << path.string() << ": " << demo.transitions.size() << " steps\n";
  }
  write_manifest(args.out, "gen-demos", args.config, config, seed, files);
}

void cmd_train(const TrainArgs& args, std::ostream& log) {
  Config config = load_config(args.config);
  if (const auto s = seed_override()) config.train.seed = *s;
  const ObsMode mode = parse_obs_mode(args.obs);
  if (args.out.empty()) throw ConfigError("--out is required");

  std::vector<Demonstration> demos;
  if (args.demos != "none") {
    if (mode == ObsMode::kBaseline) throw ConfigError("--obs baseline trains without demos");
    const std::string hash = demo_config_hash(config);
    for (const auto& path : demo_files(args.demos)) {
      Demonstration d = load_demo(path.string());
      if (d.meta.group != mode) {
        throw ConfigError("demo '" + path.string() + "' is " + std::string(to_string(d.meta.group)) +
                          " but --obs is " + std::string(to_string(mode)));
      }
      const ValidationReport report = validate_demo(d, config.sim, hash);
      if (!report.ok) {
        throw ConfigError("demo '" + path.string() + "' is invalid: " + report.reasons.front());
      }
      demos.push_back(std::move(d));
    }
    log << "loaded " << demos.size() << " demonstrations\n";
  }

  PipeEnv env(config.sim, mode);
  const TrainResult result = train(env, demos, config.train, {args.out, config.to_text()});
  for (const auto& row : result.metrics) {
    log << "step " << row.step << " cum_reward " << row.cum_reward << " success "
        << row.success_rate << "\n";
  }
  std::vector<std::string> artifacts = result.checkpoints;
  artifacts.push_back((fs::path(args.out) / "metrics.csv").string());
  write_manifest(args.out, "train", args.config, config, config.train.seed, artifacts);
}

void cmd_eval(const EvalArgs& args, std::ostream& log) {
  const Checkpoint ckpt = load_checkpoint(args.checkpoint);
  const Config config = Config::from_text(ckpt.config_text);
  const Condition condition = parse_condition(args.condition);
  const std::uint64_t seed = seed_override().value_or(args.seed);
  if (args.trials <= 0) throw ConfigError("--trials must be positive");
  if (args.out.empty()) throw ConfigError("--out is required");
  fs::create_directories(args.out);

  PipeEnv env(config.sim, ckpt.obs_mode);
  const TrialStats stats = run_trials(env, policy_actor(ckpt.policy), condition, args.trials, seed);
  const fs::path trials = fs::path(args.out) / "trials.csv";
  const fs::path summary = fs::path(args.out) / "summary.csv";
  write_file(trials, trials_csv(stats));
  const std::string column = condition == Condition::kFixed
                                 ? "fixed"
                                 : "cond" + std::string(to_string(condition));
  write_file(summary, summary_csv({{column, stats}}));
  log << "success " << stats.successes << "/" << stats.trials << "\n";
  write_manifest(args.out, "eval", args.checkpoint, config, seed,
                 {args.checkpoint, trials.string(), summary.string()});
}

void cmd_serve(const ServeArgs& args, std::ostream& log) {
  const Config config = load_config(args.config);
  // Route SIGINT/SIGTERM to a waiter thread instead of an async handler.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  TeleopServer server(config, {args.record_dir}, args.port);
  log << "serving on ws://127.0.0.1:" << server.port() << "\n" << std::flush;
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.run();
  // run() only returns after stop(), which the waiter issued.
  waiter.join();
}

}  // namespace pipeforge::cli
