#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"

namespace cli = sanovsim::cli;

namespace {

int code(cli::ExitCode c) { return static_cast<int>(c); }

void common_output(CLI::App* sub, cli::RunConfig& cfg) {
  sub->add_option("--format", cfg.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
  sub->add_option("--out", cfg.out, "Write the report here instead of stdout");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Classical simulation of signed measures and their Sanov rates"};
  app.require_subcommand(1);
  cli::RunConfig cfg;
  std::uint64_t seed = 0;

  auto* bell = app.add_subcommand("bell-demo", "Bell-state fixture: roundtrip, rates and the DPI reversal");
  bell->add_option("--n", cfg.n, "Sample sizes for the Sanov probabilities (comma list)");
  common_output(bell, cfg);

  auto* realize = app.add_subcommand("realize", "L1-minimal signed realization of an empirical model");
  realize->add_option("--model", cfg.model_path, "Model JSON")->required();
  common_output(realize, cfg);

  auto* rev = app.add_subcommand("reversal-search", "Cheapest deviation that cancels down to a target");
  rev->add_option("--model", cfg.model_path, "Model JSON (default: built-in Bell table)");
  rev->add_option("--context", cfg.context, "Context such as \"a,b'\"");
  rev->add_option("--target", cfg.target, "Target distribution over the context's joint outcomes");
  rev->add_option("--realization", cfg.realization, "fixture, solver or both");
  common_output(rev, cfg);

  auto* nu = app.add_subcommand("near-uniform", "Gap sweep for the near-uniform family");
  nu->add_option("--m", cfg.m, "Number of positive states");
  nu->add_option("--c", cfg.c, "Deviation weight on the negative state, g_0 = c*eps");
  nu->add_option("--target", cfg.target, "ramp, proxy, mu or an explicit list of m+1 values");
  nu->add_option("--epsilon-grid", cfg.epsilon_grid, "Comma list of eps values");
  nu->add_option("--step", cfg.h, "Finite-difference step");
  nu->add_option("--threads", cfg.threads, "Worker threads");
  common_output(nu, cfg);

  auto* mc = app.add_subcommand("mc-sanov", "Exact and Monte Carlo ball probabilities against Sanov rates");
  mc->add_option("--dist", cfg.dist, "Sampling distribution");
  mc->add_option("--center", cfg.center, "Ball center");
  mc->add_option("--delta", cfg.delta, "L1 ball radius");
  mc->add_option("--n", cfg.n, "Sample sizes (comma list)");
  mc->add_option("--trials", cfg.trials, "Monte Carlo trials per n (0 = exact only)");
  auto* mc_seed = mc->add_option("--seed", seed, "Random seed (required with --trials)");
  mc->add_option("--threads", cfg.threads, "Worker threads");
  common_output(mc, cfg);

  auto* ising = app.add_subcommand("ising", "Two-spin Ising baseline under a noisy kernel");
  ising->add_option("--J", cfg.coupling, "Coupling");
  ising->add_option("--temperature", cfg.temperature, "Temperature (> 0)");
  ising->add_option("--g", cfg.g, "Deviation over ++,+-,-+,--");
  ising->add_option("--random", cfg.random, "Number of random deviations to test");
  auto* ising_seed = ising->add_option("--seed", seed, "Random seed (required with --random)");
  common_output(ising, cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : code(cli::ExitCode::usage);
  }

  cfg.command = app.get_subcommands().front()->get_name();
  if (mc_seed->count() || ising_seed->count()) cfg.seed = seed;

  try {
    const cli::Report report = cli::run(cfg);
    const std::string text = cli::render(report, cfg.format);
    if (cfg.out.empty()) {
      std::cout << text;
      std::cout.flush();
    } else {
      std::ofstream out(cfg.out, std::ios::binary);
      if (!out || !(out << text)) {
        std::cerr << "error: cannot write " << cfg.out << "\n";
        return code(cli::ExitCode::usage);
      }
    }
    if (report.status != cli::ExitCode::ok) std::cerr << "error: exit " << code(report.status) << ", see report\n";
    return code(report.status);
  } catch (const cli::CliError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return code(e.code());
  } catch (const sanovsim::Error& e) {
    std::cerr << "error: " << sanovsim::to_string(e.code()) << ": " << e.what() << "\n";
    return code(cli::exit_code_for(e.code()));
  }
}
