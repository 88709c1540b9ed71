#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "driftlasso/experiments.hpp"

namespace {

using driftlasso::RunConfig;

struct CmdArgs {
  CLI::App* cmd = nullptr;
  std::string config;
  std::uint64_t seed = 0;
  std::string out_dir;
  int trials = 0;
  int threads = 0;
  CLI::Option* o_seed = nullptr;
  CLI::Option* o_out = nullptr;
  CLI::Option* o_trials = nullptr;
  CLI::Option* o_threads = nullptr;
};

void setup_cmd(CLI::App& app, CmdArgs& a, const char* name, const char* desc) {
  a.cmd = app.add_subcommand(name, desc);
  a.cmd->add_option("--config", a.config, "JSON run configuration")
      ->required()
      ->check(CLI::ExistingFile);
  a.o_seed = a.cmd->add_option("--seed", a.seed, "override sim.seed");
  a.o_out = a.cmd->add_option("--out-dir", a.out_dir, "override experiment.output_dir");
  a.o_trials = a.cmd->add_option("--trials", a.trials, "override experiment.trials")
                   ->check(CLI::PositiveNumber);
  a.o_threads = a.cmd->add_option("--threads", a.threads, "override experiment.threads")
                    ->check(CLI::PositiveNumber);
}

RunConfig load(const CmdArgs& a) {
  RunConfig cfg = driftlasso::parse_run_config_file(a.config);
  if (a.o_seed->count() > 0) cfg.sim.seed = a.seed;
  if (a.o_out->count() > 0) cfg.exp.output_dir = a.out_dir;
  if (a.o_trials->count() > 0) cfg.exp.trials = a.trials;
  if (a.o_threads->count() > 0) cfg.exp.threads = a.threads;
  driftlasso::refresh_resolved(cfg);
  return cfg;
}

int run_guarded(const CmdArgs& a, int (*fn)(const RunConfig&, std::ostream&)) {
  try {
    const RunConfig cfg = load(a);
    return fn(cfg, std::cout);
  } catch (const driftlasso::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return driftlasso::kExitConfigError;
  } catch (const driftlasso::ContractViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return driftlasso::kExitConfigError;
  } catch (const driftlasso::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return driftlasso::kExitNumericalError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return driftlasso::kExitNumericalError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse drift estimation for discretely observed diffusions"};
  app.set_version_flag("--version", driftlasso::kVersion);
  app.require_subcommand(1);

  CmdArgs sim_args, fit_args, cv_args, fig_args, scal_args, ver_args;
  setup_cmd(app, sim_args, "simulate", "simulate one path and write it as CSV");
  setup_cmd(app, fit_args, "fit", "fit one estimator on a simulated or imported path");
  setup_cmd(app, cv_args, "cv", "cross-validate the penalty level along the lambda grid");
  setup_cmd(app, fig_args, "figure1",
            "support-recovery experiment: sparse truth, lasso vs mle, per-trial matrices");
  setup_cmd(app, scal_args, "scaling-study", "estimation error versus observation horizon");
  setup_cmd(app, ver_args, "verify",
            "Monte Carlo checks of the prediction-error and concentration bounds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help, --version
    app.exit(e);
    return driftlasso::kExitConfigError;
  }

  const std::pair<const CmdArgs*, int (*)(const RunConfig&, std::ostream&)> table[] = {
      {&sim_args, &driftlasso::cmd_simulate},   {&fit_args, &driftlasso::cmd_fit},
      {&cv_args, &driftlasso::cmd_cv},          {&fig_args, &driftlasso::cmd_figure1},
      {&scal_args, &driftlasso::cmd_scaling_study}, {&ver_args, &driftlasso::cmd_verify},
  };
  for (const auto& [args, fn] : table)
    if (args->cmd->parsed()) return run_guarded(*args, fn);
  std::cerr << "error: no subcommand\n";
  return driftlasso::kExitConfigError;
}
