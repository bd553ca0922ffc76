// Command-line runner for the adaptive entanglement-witness simulation.

#include <string>
#include <vector>

#include <CLI11.hpp>

#include "quadwit/runner.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::string subtract;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config, "experiment config file")->required();
  cmd->add_option("--seed", args.seed, "override run.seed")
      ->each([&args](const std::string&) { args.seed_set = true; });
  cmd->add_option("--out", args.out_dir, "override run.out_dir");
  cmd->add_option("--subtract", args.subtract, "accidental subtraction: on|off|both")
      ->check(CLI::IsMember({"on", "off", "both"}));
  cmd->add_flag("-q,--quiet", args.quiet, "suppress progress logs");
}

quadwit::RunOptions to_options(const CommonArgs& args) {
  quadwit::RunOptions opts;
  opts.quiet = args.quiet;
  if (args.seed_set) opts.seed = args.seed;
  if (!args.out_dir.empty()) opts.out_dir = args.out_dir;
  if (args.subtract == "on") opts.subtract = quadwit::SubtractMode::On;
  else if (args.subtract == "off") opts.subtract = quadwit::SubtractMode::Off;
  else if (args.subtract == "both") opts.subtract = quadwit::SubtractMode::Both;
  return opts;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive quad-tree acquisition and entropic entanglement witness"};
  app.require_subcommand(1);

  CommonArgs sim_args;
  bool reanalyze = false;
  CLI::App* sim = app.add_subcommand("simulate", "full acquisition, witness, and uncertainty");
  add_common(sim, sim_args);
  sim->add_flag("--reanalyze", reanalyze,
                "recompute results from existing output files instead of simulating");

  CommonArgs time_args;
  std::vector<int> passes;
  CLI::App* sweep_time = app.add_subcommand("sweep-time", "witness versus acquisition time");
  add_common(sweep_time, time_args);
  sweep_time->add_option("--passes", passes, "checkpoint record counts (default from config)")
      ->delimiter(',');

  CommonArgs res_args;
  std::vector<int> resolutions;
  CLI::App* sweep_res =
      app.add_subcommand("sweep-resolution", "witness versus maximum resolution");
  add_common(sweep_res, res_args);
  sweep_res->add_option("--resolutions", resolutions, "grid sizes (default from config)")
      ->delimiter(',');

  CommonArgs oracle_args;
  CLI::App* oracle = app.add_subcommand("oracle", "dense-grid witness without sampling");
  add_common(oracle, oracle_args);

  CLI11_PARSE(app, argc, argv);

  if (sim->parsed()) {
    quadwit::RunOptions opts = to_options(sim_args);
    opts.reanalyze = reanalyze;
    return quadwit::cmd_simulate(sim_args.config, opts);
  }
  if (sweep_time->parsed())
    return quadwit::cmd_sweep_time(time_args.config, passes, to_options(time_args));
  if (sweep_res->parsed())
    return quadwit::cmd_sweep_resolution(res_args.config, resolutions, to_options(res_args));
  if (oracle->parsed()) return quadwit::cmd_oracle(oracle_args.config, to_options(oracle_args));
  return 1;
}
