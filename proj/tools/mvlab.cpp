// mvlab: batch front end. run <config> | replay <manifest> | check <config>.
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mvlab/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Mean-field particle experiments for the stochastic porous medium equation"};
  app.require_subcommand(1);
  mvlab::RunOptions opts;
  std::string path;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--set", opts.overrides, "Override a config key, e.g. --set sim.n_particles=64");
    sub->add_option("--threads", opts.threads, "OpenMP thread cap (0 = default)")->check(CLI::NonNegativeNumber);
    sub->add_option("--output-dir", opts.output_dir, "Output directory (overrides MVLAB_OUTPUT_DIR)");
  };
  auto* run = app.add_subcommand("run", "Run the experiments of a config");
  run->add_option("config", path, "YAML config")->required();
  add_common(run);
  auto* replay = app.add_subcommand("replay", "Re-run a manifest and compare output hashes");
  replay->add_option("manifest", path, "manifest.json of a previous run")->required();
  replay->add_option("--threads", opts.threads, "OpenMP thread cap (0 = default)")->check(CLI::NonNegativeNumber);
  replay->add_option("--output-dir", opts.output_dir, "Replay directory (default <manifest dir>/replay)");
  auto* check = app.add_subcommand("check", "Parse and validate a config");
  check->add_option("config", path, "YAML config")->required();
  check->add_option("--set", opts.overrides, "Override a config key");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : mvlab::kExitConfig;
  }
  if (*run) return mvlab::run_command(path, opts);
  if (*replay) return mvlab::replay_command(path, opts);
  return mvlab::check_command(path, opts);
}
