#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bsde/errors.hpp"
#include "bsde/harness.hpp"
#include "bsde/util.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "out";
  std::string seed_override;
  unsigned threads = 0;
};

void add_common(CLI::App* sub, CommonOpts& opts, bool needs_config = true) {
  auto* c = sub->add_option("--config", opts.config_path, "experiment config file");
  if (needs_config) c->required();
  sub->add_option("--out", opts.out_dir, "output directory");
  sub->add_option("--seed", opts.seed_override, "override mc.seed");
  sub->add_option("--threads", opts.threads, "worker thread count (0 = hardware)");
}

bsde::ExperimentConfig load(const CommonOpts& opts) {
  bsde::ExperimentConfig cfg = bsde::ExperimentConfig::parse_file(opts.config_path);
  if (!opts.seed_override.empty()) {
    std::string text;
    for (const auto& [k, v] : cfg.entries())
      if (k != "mc.seed") text += k + " = " + v + "\n";
    text += "mc.seed = " + opts.seed_override + "\n";
    cfg = bsde::ExperimentConfig::parse_text(text);
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BSDE discretization schemes on graded time grids"};
  app.require_subcommand(1);

  if (const char* env = std::getenv("BSDE_THREADS")) {
    bsde::set_thread_count(static_cast<unsigned>(std::strtoul(env, nullptr, 10)));
  }

  CommonOpts verify, sim, solve, conv, probe, smooth, report;
  auto* c_verify = app.add_subcommand("verify-grid", "check the grid bound certificates");
  add_common(c_verify, verify);
  auto* c_sim = app.add_subcommand("simulate", "simulate a path batch and dump it");
  add_common(c_sim, sim);
  auto* c_solve = app.add_subcommand("solve", "run one scheme at the first N in grid.N");
  add_common(c_solve, solve);
  auto* c_conv = app.add_subcommand("convergence", "error sweep over grid.N with a rate fit");
  add_common(c_conv, conv);
  auto* c_probe = app.add_subcommand("probe-representation",
                                     "Monte Carlo check of the Z_0 weight representation");
  add_common(c_probe, probe);
  auto* c_smooth = app.add_subcommand("smoothness", "fractional smoothness fit of the terminal");
  add_common(c_smooth, smooth);
  auto* c_report = app.add_subcommand("report", "merge summary.json files into one table");
  add_common(c_report, report, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_verify->parsed()) {
      if (verify.threads) bsde::set_thread_count(verify.threads);
      return bsde::cmd_verify_grid(load(verify), verify.out_dir);
    }
    if (c_sim->parsed()) {
      if (sim.threads) bsde::set_thread_count(sim.threads);
      return bsde::cmd_simulate(load(sim), sim.out_dir);
    }
    if (c_solve->parsed()) {
      if (solve.threads) bsde::set_thread_count(solve.threads);
      return bsde::cmd_solve(load(solve), solve.out_dir);
    }
    if (c_conv->parsed()) {
      if (conv.threads) bsde::set_thread_count(conv.threads);
      return bsde::cmd_convergence(load(conv), conv.out_dir);
    }
    if (c_probe->parsed()) {
      if (probe.threads) bsde::set_thread_count(probe.threads);
      return bsde::cmd_probe_representation(load(probe), probe.out_dir);
    }
    if (c_smooth->parsed()) {
      if (smooth.threads) bsde::set_thread_count(smooth.threads);
      return bsde::cmd_smoothness(load(smooth), smooth.out_dir);
    }
    if (c_report->parsed()) {
      return bsde::cmd_report(report.out_dir);
    }
  } catch (const bsde::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const bsde::BsdeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
