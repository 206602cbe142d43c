#pragma once

// Text file formats. All doubles are written with 17 significant digits so
// they round-trip exactly.
//
// Model config (JSON object; unknown keys are rejected):
//   n_spins   integer, required, must equal the length of epsilons
//   epsilons  array of numbers, required
//   g         number, required
//   gamma, lambda             numbers, default 0
//   alpha_x, alpha_y          numbers, default 0
//   beta_x, beta_y            numbers, default 1
//
// Spectrum file:
//   # rgfree spectrum
//   source <solver|oracle>
//   n_spins <N>
//   g <g>
//   spec_hash <16 hex digits>
//   <sign pattern> <r_1> ... <r_N> <residual>      (one line per solution)
//
// State file:
//   # rgfree state
//   spec_hash <16 hex digits>                       (optional)
//   label <text>                                    (optional)
//   n_spins <N>
//   <index> <re> <im>                               (2^N lines, index order)

#include "rgfree/bethe_solver.hpp"
#include "rgfree/model.hpp"
#include "rgfree/spin_algebra.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace rgfree {

std::string format_double(double v);

// Both throw ParseError on malformed input and ModelError on invalid models.
ModelSpec parse_model_config(const std::string& text);
ModelSpec load_model_config(const std::filesystem::path& path);
std::string model_config_text(const ModelSpec& spec);

struct SpectrumRow {
  std::string label;
  std::vector<double> r;
  double residual = 0.0;
};

struct SpectrumFile {
  std::string source = "solver";
  int n_spins = 0;
  double g = 0.0;
  std::string spec_hash;
  std::vector<SpectrumRow> rows;
};

SpectrumFile spectrum_from_solutions(const SolutionSet& set, const ModelSpec& spec);
std::string spectrum_text(const SpectrumFile& file);
SpectrumFile parse_spectrum(const std::string& text);

struct StateFile {
  std::string spec_hash;
  std::string label;
  StateVector state;
};

std::string state_text(const StateFile& file);
StateFile parse_state(const std::string& text);

std::string read_text_file(const std::filesystem::path& path);
// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace rgfree
