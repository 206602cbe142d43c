#pragma once

// Brute-force ground truth by dense diagonalization. Never consumes solver or
// projector output; every cross-check compares against it.

#include "rgfree/model.hpp"
#include "rgfree/spin_algebra.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace rgfree {

struct SpectrumOracle {
  int n_spins = 0;
  // Orthonormal common eigenvectors, one per column.
  Eigen::MatrixXcd eigenvectors;
  // Row n holds <psi_n|R_i|psi_n> for i = 1..N.
  Eigen::MatrixXd eigenvalues;
  // max_{i, m != n} |<psi_m|R_i|psi_n>|
  double diagonality_residual = 0.0;
  // Seed of the random combination that was finally used, and how many
  // reseeds were needed to find a non-degenerate one.
  std::uint64_t seed = 0;
  int retries = 0;

  std::vector<double> row(Eigen::Index n) const;
  std::vector<std::vector<double>> rows() const;
};

inline constexpr std::uint64_t kDefaultOracleSeed = 20190321;

// Diagonalizes sum_i c_i R_i with c_i uniform in [0.5, 1.5] drawn from
// mt19937_64(seed). Reseeds (seed + 1, ...) up to 5 times when two levels of
// the combination are closer than 1e-8 times its spectral radius; throws
// DegeneracyError if that persists.
SpectrumOracle diagonalize(const Couplings& c, std::uint64_t seed = kDefaultOracleSeed,
                           int cap = kDefaultDenseCap);

struct SpectrumMatching {
  // a_to_b[k] is the row of table B matched to row k of table A.
  std::vector<int> a_to_b;
  double max_abs_diff = 0.0;
};

// Greedy global assignment: all row pairs sorted by infinity-distance,
// taken smallest first. Tables must have the same shape.
SpectrumMatching match_spectra(const std::vector<std::vector<double>>& a,
                               const std::vector<std::vector<double>>& b);

struct ProjectorCrosscheck {
  // 1 - |<psi_n|v>|^2 / ||v||^2
  double overlap_defect = 0.0;
  // ||P / N - |psi_n><psi_n| ||_F when a dense projector was supplied.
  std::optional<double> frobenius_distance;
};

ProjectorCrosscheck crosscheck_projector(const SpectrumOracle& oracle, Eigen::Index n,
                                         const StateVector& engine_output,
                                         const Eigen::MatrixXcd* normalized_dense_projector = nullptr);

}  // namespace rgfree
