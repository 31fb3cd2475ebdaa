// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "hma/errors.hpp"

int main(int argc, char** argv) {
  using namespace hma::cli;
  CLI::App app{"Monge-Ampere solver for compact Hessian manifolds"};
  app.require_subcommand(1);

  std::string config;
  Overrides ov;
  std::string out;
  std::uint64_t seed = 0;
  int threads = 0, radius = -1;
  double tol = 0.0;

  auto add_common = [&](CLI::App* sub, bool need_config) {
    auto* c = sub->add_option("--config", config, "run configuration (JSON)");
    if (need_config) c->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory");
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--threads", threads, "worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
    sub->add_option("--radius", radius, "truncation radius")->check(CLI::NonNegativeNumber);
    sub->add_option("--tol", tol, "solver tolerance")->check(CLI::PositiveNumber);
  };
  auto* run_cmd = app.add_subcommand("run", "solve the configured problem");
  auto* verify_cmd = app.add_subcommand("verify", "run the invariant suite without solving");
  auto* tiling_cmd = app.add_subcommand("export-tiling", "solve an atomic problem and export its tiling");
  auto* report_cmd = app.add_subcommand("report", "summarize an output directory");
  add_common(run_cmd, true);
  add_common(verify_cmd, true);
  add_common(tiling_cmd, true);
  report_cmd->add_option("--out", out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  auto collect = [&](CLI::App* sub) {
    if (sub->count("--out")) ov.out = out;
    if (sub->count("--seed")) ov.seed = seed;
    if (sub->count("--threads")) ov.threads = threads;
    if (sub->count("--radius")) ov.radius = radius;
    if (sub->count("--tol")) ov.tol = tol;
  };

  try {
    if (report_cmd->parsed()) return report(out, std::cout);
    CLI::App* sub = run_cmd->parsed() ? run_cmd : verify_cmd->parsed() ? verify_cmd : tiling_cmd;
    collect(sub);
    const RunConfig c = load_config(config, ov);
    if (sub == run_cmd) return run(c, std::cout);
    if (sub == verify_cmd) return verify(c, std::cout);
    return export_tiling(c, std::cout);
  } catch (const hma::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
}
