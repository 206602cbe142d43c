#pragma once

// Operator-valued determinant
//
//         | r_1 + R_1   -Gamma_12   ...   -Gamma_1N |
//   P(r) = det | -Gamma_21   r_2 + R_2   ...   -Gamma_2N |
//         |    ...         ...       ...      ...    |
//
// Entries commute, so the determinant is unambiguous. Expanding over which
// diagonal entries appear,
//
//   P(r) = sum_{pi} K_{pi-bar} prod_{k in pi} (r_k + R_k),
//
// where K of the complement set is the determinant of the zero-diagonal
// -Gamma block on it. That block vanishes for odd size and equals a sum over
// perfect matchings of prod 2g F_x F_y / (eps_a - eps_b)^2 for even size.
//
// On-shell (r solves the quadratic equations) P(r) / N(r) is the projector
// onto the eigenstate with eigenvalues r, where N(r) is the scalar
// determinant with diagonal 2 r_i.

#include "rgfree/model.hpp"
#include "rgfree/spin_algebra.hpp"

#include <cstdint>
#include <vector>

namespace rgfree {

using IndexMask = std::uint32_t;

enum class Strategy { kSubsetTree, kDenseLaplace };

const char* strategy_name(Strategy s);
// Accepts "subset-tree" and "dense-laplace"; throws ParseError.
Strategy parse_strategy(const std::string& text);

// det of diag(2 r) - Gamma.
double scalar_norm_det(const std::vector<double>& r, const Couplings& c);

// det of diag(r + r_m) - Gamma. Coefficient of |psi_m><psi_m| in P(r).
double offshell_coefficient(const std::vector<double>& r, const std::vector<double>& r_m,
                            const Couplings& c);

// Row-norm product bounding |det| of diag(d) - Gamma (Hadamard).
double determinant_scale(const std::vector<double>& diagonal, const Couplings& c);

// Matching-sum value of K for the complement set `mask` (bit k = spin k+1).
// Zero for odd size, one for the empty set.
double pairing_coefficient(IndexMask mask, const Couplings& c);

// The same coefficient as a plain determinant of the -Gamma block.
double pairing_coefficient_by_determinant(IndexMask mask, const Couplings& c);

// K for every complement mask, filled by dynamic programming over subsets.
std::vector<double> pairing_table(const Couplings& c);

struct ExpansionTerm {
  IndexMask included;  // spins whose (r_k + R_k) factor appears
  double coefficient;  // K of the complement
};

// Every term of the subset expansion with an even-size complement, in
// increasing order of the complement mask.
std::vector<ExpansionTerm> expansion_terms(const Couplings& c);

struct OperatorDeterminantPlan {
  std::vector<double> r;
  Strategy strategy = Strategy::kSubsetTree;
};

struct ProjectionReport {
  StateVector unnormalized;  // P(r) |Omega>
  StateVector projected;     // P(r) |Omega> / N(r)
  double norm_det = 0.0;
  double bethe_residual = 0.0;
  bool on_shell = false;
  // Largest change to r made by the on-shell refinement; zero when r was used as given.
  double refinement_shift = 0.0;
  double idempotency_residual = 0.0;
  std::vector<double> eigen_residuals;
};

// Charges, pairing coefficients and the projector sums are kept in long
// double. Near coalescing solutions |N(r)| is many orders of magnitude below
// the size of the individual terms of P(r), and double rounding alone leaves
// visible errors in P(r) / N(r).
class ProjectorEngine {
 public:
  explicit ProjectorEngine(const ModelSpec& spec, int dense_cap = kDefaultDenseCap);

  const Couplings& couplings() const { return c_; }
  const ExtendedCouplings& extended_couplings() const { return x_; }
  int n_spins() const { return c_.n; }
  const std::vector<ChargeOperator>& charges() const { return charges_; }
  const std::vector<double>& pairing() const { return pairing_; }

  // r is used exactly as given.
  StateVector apply(const OperatorDeterminantPlan& plan, const StateVector& omega) const;
  StateVector apply(const std::vector<double>& r, const StateVector& omega,
                    Strategy strategy = Strategy::kSubsetTree) const {
    return apply(OperatorDeterminantPlan{r, strategy}, omega);
  }

  // Subset tree split over 2^split_depth independent subtrees run on up to
  // `threads` workers. Partial sums are merged in subtree order.
  StateVector apply_parallel(const std::vector<double>& r, const StateVector& omega,
                             int threads, int split_depth = 3) const;

  // An on-shell r (residual below 1e-9 max(1, max K)) is first polished by
  // long double Newton steps; the polished point is kept when it moves r by
  // at most 1e-6 max(1, |r|_inf). Throws NormalizationError when
  // |N(r)| < 1e-12 * scale and VacuumOrthogonalError when
  // ||P|Omega>|| / |N(r)| < 1e-8 ||Omega||.
  ProjectionReport project_and_normalize(const std::vector<double>& r,
                                         const StateVector& omega) const;

  // Columns P(r) e_b for all basis states (N <= dense cap).
  Eigen::MatrixXcd dense_projector(const std::vector<double>& r) const;

  // P(r) / N(r) as a dense matrix, with the same on-shell polish and
  // normalization check as project_and_normalize.
  Eigen::MatrixXcd normalized_projector(const std::vector<double>& r) const;

  // || integral_{[-a,a]^N} (prod r_i) P(r) dr / (2a^3/3)^N - 1 ||_F / 2^{N/2},
  // exact through a two-point Gauss-Legendre rule per axis. N <= 6.
  double identity_resolution_residual(double a) const;

 private:
  using XScalar = std::complex<long double>;
  using XVector = Eigen::Matrix<XScalar, Eigen::Dynamic, 1>;
  using RVector = ExtendedCouplings::Vector;

  XVector apply_subset_tree(const RVector& r, const XVector& omega) const;
  StateVector apply_dense_laplace(const std::vector<double>& r, const StateVector& omega) const;
  void check(const std::vector<double>& r, const StateVector& omega) const;
  void check_dense(const char* what) const;
  // Polished r when the input is on shell, otherwise r itself.
  RVector working_point(const std::vector<double>& r, double* shift) const;
  // det of diag(2 r) - Gamma in long double; throws NormalizationError.
  long double checked_norm_det(const RVector& r) const;
  Eigen::Matrix<XScalar, Eigen::Dynamic, Eigen::Dynamic> dense_columns(const RVector& r) const;

  Couplings c_;
  ExtendedCouplings x_;
  int dense_cap_;
  std::vector<ChargeOperator> charges_;
  std::vector<ExtendedChargeOperator> xcharges_;
  std::vector<double> pairing_;
  std::vector<long double> xpairing_;
};

inline constexpr int kIdentityResolutionCap = 6;

}  // namespace rgfree
