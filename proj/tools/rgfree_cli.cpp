// rgfree: eigenstates of spin-1/2 Richardson-Gaudin models from their
// conserved charges.
//
//   rgfree validate --model m.json
//   rgfree solve    --model m.json --out dir [--g-steps 64]
//   rgfree project  --model m.json --out dir [--state 0110|all] [--vacuum uniform|file]
//   rgfree check    --model m.json [--seed 7]
//   rgfree bench    --bench-range 4..12 [--out dir]

#include "rgfree/commands.hpp"
#include "rgfree/errors.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>

namespace {

void parse_range(const std::string& text, int& lo, int& hi) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) throw rgfree::InputError("--bench-range must look like lo..hi");
  try {
    lo = std::stoi(text.substr(0, dots));
    hi = std::stoi(text.substr(dots + 2));
  } catch (const std::exception&) {
    throw rgfree::InputError("--bench-range must look like lo..hi");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bethe-ansatz-free eigenstates of spin-1/2 Richardson-Gaudin models"};
  app.require_subcommand(1);

  rgfree::RunConfig config;
  std::string model, out_dir = ".", spectrum, strategy = "subset-tree", bench_range = "4..10";
  double tol = 0.0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--model", model, "Model config (JSON)");
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--tol", tol, "Override the pass threshold");
    sub->add_option("--seed", config.seed, "Seed for oracle combinations and random draws");
    sub->add_option("--g-steps", config.g_steps, "Initial continuation steps in g");
    sub->add_option("--strategy", strategy, "subset-tree | dense-laplace");
    sub->add_option("--dense-cap", config.dense_cap, "Largest N for dense matrices");
    sub->add_option("--threads", config.threads, "Worker threads (0 = all cores)");
  };

  auto* validate = app.add_subcommand("validate", "Check commutators and quadratic relations");
  auto* solve = app.add_subcommand("solve", "Solve the quadratic equations for all eigenvalue vectors");
  auto* project = app.add_subcommand("project", "Build eigenstates from the operator determinant");
  auto* check = app.add_subcommand("check", "Run the property suite against exact diagonalization");
  auto* bench = app.add_subcommand("bench", "Time the solver and projector across system sizes");
  for (auto* sub : {validate, solve, project, check, bench}) add_common(sub);

  project->add_option("--state", config.state, "Sign-pattern bitstring (spin 1 first) or 'all'");
  project->add_option("--vacuum", config.vacuum, "'uniform' or a state file");
  project->add_option("--spectrum", spectrum, "Spectrum file from 'solve' (otherwise solved inline)");
  bench->add_option("--bench-range", bench_range, "Range of N, lo..hi");
  bench->add_option("--bench-repeats", config.bench_repeats, "Timing repetitions per row");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return rgfree::kExitInputError;
  }

  try {
    config.command = rgfree::parse_command(app.get_subcommands().front()->get_name());
    config.model_path = model;
    config.out_dir = out_dir;
    if (!spectrum.empty()) config.spectrum_path = spectrum;
    for (auto* sub : {validate, solve, project, check, bench}) {
      if (sub->parsed() && sub->count("--tol") > 0) config.tol = tol;
    }
    config.strategy = rgfree::parse_strategy(strategy);
    parse_range(bench_range, config.bench_lo, config.bench_hi);
  } catch (const rgfree::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return rgfree::kExitInputError;
  }
  return rgfree::run_command(config, std::cout, std::cerr);
}
