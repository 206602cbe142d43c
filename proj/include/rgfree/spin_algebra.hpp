#pragma once

// Bitstring Hilbert space of N spins-1/2 and matrix-free conserved charges.
//
// Basis convention: bit k of a basis index (0-based) set means spin k+1
// points up along z. Pauli actions used throughout:
//   sigma^z |up> = |up>,      sigma^z |down> = -|down>
//   sigma^x flips the spin,   sigma^y |down> = i|up>, sigma^y |up> = -i|down>

#include "rgfree/model.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace rgfree {

using Complex = std::complex<double>;

inline constexpr int kDefaultDenseCap = 12;

inline std::size_t hilbert_dim(int n_spins) { return std::size_t{1} << n_spins; }

// Complex amplitudes over the 2^N basis. Not necessarily normalized.
class StateVector {
 public:
  StateVector() = default;
  explicit StateVector(int n_spins);
  StateVector(int n_spins, Eigen::VectorXcd amplitudes);

  static StateVector zero(int n_spins) { return StateVector(n_spins); }
  static StateVector basis(int n_spins, std::size_t index);
  // Equal weight on every basis state, unit norm.
  static StateVector uniform(int n_spins);

  int n_spins() const { return n_spins_; }
  std::size_t dim() const { return static_cast<std::size_t>(amps_.size()); }

  Eigen::VectorXcd& amplitudes() { return amps_; }
  const Eigen::VectorXcd& amplitudes() const { return amps_; }
  std::span<Complex> span() { return {amps_.data(), dim()}; }
  std::span<const Complex> span() const { return {amps_.data(), dim()}; }

  Complex& operator[](std::size_t b) { return amps_(static_cast<Eigen::Index>(b)); }
  const Complex& operator[](std::size_t b) const { return amps_(static_cast<Eigen::Index>(b)); }

  double norm() const { return amps_.norm(); }

 private:
  int n_spins_ = 0;
  Eigen::VectorXcd amps_;
};

// Scales v to unit norm and rotates its global phase so the first amplitude
// with modulus above 1e-8 * max modulus is real and positive.
StateVector unit_normalized(const StateVector& v);

template <typename T>
struct BasicPairTerm {
  int j;
  T xx, yy, zz;
};

// R_i = B_i . sigma_i + sum_{j != i} (X_ij s^x_i s^x_j + Y_ij s^y_i s^y_j + Z_ij s^z_i s^z_j)
template <typename T>
class BasicChargeOperator {
 public:
  using Scalar = std::complex<T>;
  using PairTerm = BasicPairTerm<T>;

  BasicChargeOperator(const BasicCouplings<T>& c, int index);

  int index() const { return index_; }
  int n_spins() const { return n_; }
  T bx() const { return bx_; }
  T by() const { return by_; }
  T bz() const { return bz_; }
  const std::vector<PairTerm>& pair_terms() const { return pairs_; }
  // Number of Pauli strings: 3 field terms plus 3 per partner spin.
  int term_count() const { return 3 + 3 * static_cast<int>(pairs_.size()); }

  // out = R_i in. `in` and `out` must not alias. Allocation-free.
  void apply(std::span<const Scalar> in, std::span<Scalar> out) const;

 private:
  int index_;
  int n_;
  T bx_, by_, bz_;
  std::vector<PairTerm> pairs_;
};

using ChargeOperator = BasicChargeOperator<double>;
using ExtendedChargeOperator = BasicChargeOperator<long double>;
using PairTerm = ChargeOperator::PairTerm;

extern template class BasicChargeOperator<double>;
extern template class BasicChargeOperator<long double>;

template <typename T>
std::vector<BasicChargeOperator<T>> make_charges(const BasicCouplings<T>& c) {
  std::vector<BasicChargeOperator<T>> ops;
  ops.reserve(static_cast<std::size_t>(c.n));
  for (int i = 0; i < c.n; ++i) ops.emplace_back(c, i);
  return ops;
}

StateVector apply_charge(const ChargeOperator& op, const StateVector& v);

// Dense 2^N x 2^N matrix of the charge; throws DenseCapError above `cap`.
Eigen::MatrixXcd dense_charge(const ChargeOperator& op, int cap = kDefaultDenseCap);

// ||R_i R_j - R_j R_i||_F / (||R_i||_F ||R_j||_F)
double commutator_residual(const Couplings& c, int i, int j, int cap = kDefaultDenseCap);

// ||R_i^2 - sum_{j != i} Gamma_ij R_j - K_i||_F / ||R_i^2||_F
double quadratic_operator_residual(const Couplings& c, int i, int cap = kDefaultDenseCap);

}  // namespace rgfree
