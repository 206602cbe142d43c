#pragma once

// Integrable spin-1/2 Richardson-Gaudin models in an arbitrary field.
//
// A model is fixed by the rapidities eps_i and seven scalars. Every coupling
// is derived from them:
//
//   F_x(e) = sqrt(alpha_x e + beta_x),   F_y(e) = sqrt(alpha_y e + beta_y)
//   B^x_i = gamma / F_x(eps_i),  B^y_i = lambda / F_y(eps_i),  B^z_i = 1
//   X_ij = g F_x(eps_i) F_y(eps_j) / (eps_i - eps_j)
//   Y_ij = g F_x(eps_j) F_y(eps_i) / (eps_i - eps_j)
//   Z_ij = g F_x(eps_j) F_y(eps_j) / (eps_i - eps_j)
//
// and the charges then obey R_i^2 = sum_{j != i} Gamma_ij R_j + K_i with
// Gamma_ij = 2 Z_ij.

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace rgfree {

struct ModelSpec {
  std::vector<double> epsilons;
  double g = 0.0;
  double gamma = 0.0;
  double lambda = 0.0;
  double alpha_x = 0.0;
  double beta_x = 1.0;
  double alpha_y = 0.0;
  double beta_y = 1.0;

  int n_spins() const { return static_cast<int>(epsilons.size()); }
};

// Relative gap below which two rapidities count as duplicates.
inline constexpr double kDuplicateEpsilonTolerance = 1e-10;

// Throws ModelError naming the offending parameter (or pair of spins, 1-based).
void validate(const ModelSpec& spec);

template <typename T>
struct BasicCouplings {
  using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

  int n = 0;
  T g = 0;
  Vector eps;
  Vector Fx, Fy;
  Matrix X, Y, Z;
  Vector Bx, By, Bz;
  Matrix Gamma;
  Vector K;

  // Largest absolute entry over B, X, Y, Z; at least 1.
  T scale() const;
};

using Couplings = BasicCouplings<double>;
// Same couplings evaluated in long double from the model parameters. Near
// coalescing solutions the projector amplifies ulp-level inconsistencies
// between Gamma, K and the charges, so those paths use this form.
using ExtendedCouplings = BasicCouplings<long double>;

Couplings build_couplings(const ModelSpec& spec);
ExtendedCouplings build_extended_couplings(const ModelSpec& spec);

// X = Y: F_x and F_y share the parameters (alpha, beta).
ModelSpec xxz_spec(std::vector<double> epsilons, double g, double alpha, double beta,
                   double gamma = 0.0, double lambda = 0.0);
// X = Y = Z: both F functions constant.
ModelSpec xxx_spec(std::vector<double> epsilons, double g, double gamma = 0.0,
                   double lambda = 0.0);

// Stable 64-bit fingerprint of the spec (FNV-1a over the 17-digit text form).
std::uint64_t spec_hash(const ModelSpec& spec);
std::string spec_hash_hex(const ModelSpec& spec);

// Constant K_i at g = 0: |B_i|^2.
double k_at_zero_coupling(const ModelSpec& spec, int i);

}  // namespace rgfree
