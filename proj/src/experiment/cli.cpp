#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "mmtl/experiment.hpp"
#include "mmtl/verify.hpp"

#ifndef MMTL_VERSION
#define MMTL_VERSION "0.0.0"
#endif

namespace mmtl {

namespace {

enum Exit { ok = 0, verify_failed = 1, config_error = 2, data_error = 3, diverged = 4 };

int do_run(const std::string& config_path, const RunOptions& opts) {
  try {
    const ExperimentConfig cfg = load_config(config_path);
    const RunOutcome out = run_experiment(cfg, opts);
    std::cout << "wrote " << out.rows.size() << " rows from " << out.solves << " solves to "
              << (out.output_dir / "results.csv").string() << '\n';
    return ok;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const InvalidArgument& e) {
    // Values that parse but that a module rejects are still config problems.
    std::cerr << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return data_error;
  } catch (const DivergenceError& e) {
    std::cerr << "solver diverged: " << e.what() << '\n';
    return diverged;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return data_error;
  }
}

int do_verify(const std::string& suite, const verify::SuiteOptions& opt) {
  verify::SuiteResult res;
  try {
    res = verify::run_suite(suite, opt);
  } catch (const InconclusiveError& e) {
    std::cerr << "verify " << suite << ": inconclusive: " << e.what() << '\n';
    return verify_failed;
  }
  std::size_t failed = 0;
  for (const auto& c : res.checks) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name;
    if (!c.detail.empty()) std::cout << ": " << c.detail;
    std::cout << '\n';
    failed += c.passed ? 0 : 1;
  }
  std::printf("%s: %zu/%zu checks passed in %.2f s\n", suite.c_str(), res.checks.size() - failed, res.checks.size(),
              res.seconds);
  return failed == 0 ? ok : verify_failed;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Loss-compositional multi-task learning experiments"};
  app.set_version_flag("--version", std::string(MMTL_VERSION));
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  RunOptions run_opts;
  auto* run = app.add_subcommand("run", "Run the experiment described by a JSON config");
  run->add_option("config", config_path, "Path to the config file")->required();
  run->add_option("--output-dir", output_dir, "Output directory (overrides MMTL_OUTPUT_DIR and the config)");
  run->add_option("--workers", run_opts.workers, "Worker threads for grid cells")->check(CLI::PositiveNumber);
  run->add_flag("--trace", run_opts.trace, "Write per-iteration solver traces");

  std::string suite;
  verify::SuiteOptions suite_opts;
  auto* ver = app.add_subcommand("verify", "Run an invariant suite against independent oracles");
  ver->add_option("suite", suite, "Suite name")->required()->check(CLI::IsMember(verify::suite_names()));
  ver->add_option("--seed", suite_opts.seed, "Seed for the random instances");
  ver->add_option("--instances", suite_opts.instances, "Random cases per property")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }

  if (*run) {
    if (!output_dir.empty()) run_opts.output_dir = output_dir;
    return do_run(config_path, run_opts);
  }
  return do_verify(suite, suite_opts);
}

}  // namespace mmtl
