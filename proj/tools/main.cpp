#include <CLI11.hpp>
#include <iostream>

#include "commands.hpp"
#include "pipeforge/errors.hpp"

int main(int argc, char** argv) {
  using namespace pipeforge;
  CLI::App app{"pipeforge: pipe-insertion simulator and imitation-learning toolkit"};
  app.require_subcommand(0, 1);
  bool dump_config = false;
  app.add_flag("--dump-default-config", dump_config, "Print every config key with its default");

  cli::GenDemosArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-demos", "Record scripted expert demonstrations");
  gen_cmd->add_option("--config", gen.config, "Config file (default: desk profile)");
  gen_cmd->add_option("--group", gen.group, "force or visual")
      ->check(CLI::IsMember({"force", "visual"}));
  gen_cmd->add_option("--count", gen.count, "Number of demonstrations");
  gen_cmd->add_option("--condition", gen.condition, "fixed, 1 or 2");
  gen_cmd->add_option("--seed", gen.seed, "First episode seed");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  cli::TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a policy (BC, then PPO with GAIL)");
  train_cmd->add_option("--config", tr.config, "Config file (default: desk profile)");
  train_cmd->add_option("--demos", tr.demos, "Demonstration directory, or none");
  train_cmd->add_option("--obs", tr.obs, "force, visual or baseline")
      ->check(CLI::IsMember({"force", "visual", "baseline"}));
  train_cmd->add_option("--out", tr.out, "Output directory")->required();

  cli::EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--condition", ev.condition, "fixed, 1 or 2");
  eval_cmd->add_option("--trials", ev.trials, "Number of episodes");
  eval_cmd->add_option("--seed", ev.seed, "First episode seed");
  eval_cmd->add_option("--out", ev.out, "Output directory")->required();

  cli::ServeArgs sv;
  auto* serve_cmd = app.add_subcommand("serve", "Run the teleoperation WebSocket service");
  serve_cmd->add_option("--config", sv.config, "Config file (default: desk profile)");
  serve_cmd->add_option("--port", sv.port, "TCP port");
  serve_cmd->add_option("--record-dir", sv.record_dir, "Where saved demonstrations go");

  CLI11_PARSE(app, argc, argv);

  try {
    if (dump_config) {
      std::cout << Config::desk().to_text();
    } else if (*gen_cmd) {
      cli::cmd_gen_demos(gen, std::cerr);
    } else if (*train_cmd) {
      cli::cmd_train(tr, std::cerr);
    } else if (*eval_cmd) {
      cli::cmd_eval(ev, std::cerr);
    } else if (*serve_cmd) {
      cli::cmd_serve(sv, std::cerr);
    } else {
      std::cerr << app.help();
      return 2;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
