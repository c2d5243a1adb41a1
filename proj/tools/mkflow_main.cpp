#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mkflow/config.hpp"
#include "mkflow/errors.hpp"
#include "mkflow/runner.hpp"
#include "mkflow/verify.hpp"

namespace {

int run_cmd(const std::string& config_path) {
  const mkflow::RunConfig cfg = mkflow::load_run_config(config_path);
  const mkflow::RunOutcome outcome = mkflow::run_command(cfg, &std::cout);
  if (!outcome.error.empty()) std::cerr << outcome.error << "\n";
  return outcome.exit_code;
}

int verify_cmd(const std::string& suite) {
  mkflow::VerifySuite vs(&std::cout);
  const std::vector<mkflow::CriterionResult> results = vs.run_selector(suite);
  bool ok = true;
  for (const mkflow::CriterionResult& r : results) {
    std::printf("%s %-32s %s%s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                r.detail.c_str(), r.gating ? "" : " [informational]");
    if (r.gating && !r.pass) ok = false;
  }
  std::fflush(stdout);
  return ok ? mkflow::kExitOk : mkflow::kExitNoConvergence;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transport density dynamics: steady states of mu' = mu(|grad u| - k)"};
  app.require_subcommand(1);

  std::string config_path;
  CLI::App* run = app.add_subcommand("run", "Run a scenario from a config file to steady state");
  run->add_option("config", config_path, "flat key = value config file")->required();

  std::string suite = "all";
  CLI::App* verify = app.add_subcommand("verify", "Run an acceptance suite and print a table");
  verify->add_option("suite", suite,
                     "graph | fem | lyapunov | mk | timeline | bounds | maze | hetero | "
                     "positivity | all");

  std::string state_dir;
  CLI::App* exp = app.add_subcommand("export", "Rewrite saved field snapshots as VTK files");
  exp->add_option("state-dir", state_dir, "directory produced by a previous run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? mkflow::kExitOk : mkflow::kExitConfigError;
  }

  try {
    if (run->parsed()) return run_cmd(config_path);
    if (verify->parsed()) return verify_cmd(suite);
    if (exp->parsed()) return mkflow::export_command(state_dir, &std::cout);
  } catch (const mkflow::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return mkflow::kExitConfigError;
  } catch (const mkflow::IoError& e) {
    std::cerr << e.what() << "\n";
    return mkflow::kExitConfigError;
  } catch (const mkflow::ContractError& e) {
    std::cerr << e.what() << "\n";
    return mkflow::kExitConfigError;
  } catch (const mkflow::InvalidGeometryError& e) {
    std::cerr << e.what() << "\n";
    return mkflow::kExitConfigError;
  } catch (const mkflow::NonConvergenceError& e) {
    std::cerr << e.what() << "\n";
    return mkflow::kExitNoConvergence;
  } catch (const mkflow::Error& e) {
    std::cerr << e.what() << "\n";
    return mkflow::kExitSolverFailure;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return mkflow::kExitSolverFailure;
  }
  return mkflow::kExitOk;
}
