#pragma once

// Command implementations behind the `rgfree` executable. Each returns the
// process exit code: 0 success, 1 numerical or property failure, 2 bad input.

#include "rgfree/oracle.hpp"
#include "rgfree/projector.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace rgfree {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInputError = 2;

enum class Command { kValidate, kSolve, kProject, kCheck, kBench };

Command parse_command(const std::string& name);

struct RunConfig {
  Command command = Command::kValidate;
  std::filesystem::path model_path;
  std::filesystem::path out_dir = ".";
  // Sign-pattern bitstring or "all".
  std::string state = "all";
  // "uniform" or a path to a state file.
  std::string vacuum = "uniform";
  std::optional<std::filesystem::path> spectrum_path;
  // Overrides the command's pass threshold when set.
  std::optional<double> tol;
  std::uint64_t seed = kDefaultOracleSeed;
  Strategy strategy = Strategy::kSubsetTree;
  int g_steps = 64;
  int bench_lo = 4;
  int bench_hi = 10;
  int bench_repeats = 3;
  int dense_cap = kDefaultDenseCap;
  int threads = 0;
};

// Throws InputError when a command-specific requirement is missing.
void check_config(const RunConfig& config);

int cmd_validate(const RunConfig& config, std::ostream& out);
int cmd_solve(const RunConfig& config, std::ostream& out);
int cmd_project(const RunConfig& config, std::ostream& out);
int cmd_check(const RunConfig& config, std::ostream& out);
int cmd_bench(const RunConfig& config, std::ostream& out);

// Dispatches and maps exceptions to exit codes, printing messages to `err`.
int run_command(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace rgfree
