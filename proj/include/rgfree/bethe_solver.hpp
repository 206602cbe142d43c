#pragma once

// Eigenvalue vectors from the quadratic equations
//
//   r_i^2 = sum_{j != i} Gamma_ij r_j + K_i,   i = 1..N
//
// All 2^N solutions are reached by continuation in g from g = 0, where the
// system decouples into r_i = s_i sqrt(K_i(0)) for s in {+1, -1}^N.

#include "rgfree/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rgfree {

// Which g = 0 branch a solution was continued from. Bit k set means
// s_{k+1} = +1. The text form lists spin 1 first.
class SignPattern {
 public:
  SignPattern() = default;
  SignPattern(int n_spins, std::uint32_t bits) : n_(n_spins), bits_(bits) {}

  int n_spins() const { return n_; }
  std::uint32_t bits() const { return bits_; }
  int sign(int k) const { return (bits_ >> k) & 1U ? 1 : -1; }

  std::string to_string() const;
  // Throws ParseError.
  static SignPattern parse(const std::string& text);

  friend bool operator==(const SignPattern&, const SignPattern&) = default;

 private:
  int n_ = 0;
  std::uint32_t bits_ = 0;
};

struct EigenvalueVector {
  std::vector<double> r;
  // max_i |r_i^2 - sum_j Gamma_ij r_j - K_i|
  double residual = 0.0;
  SignPattern sign_pattern;
  double g_reached = 0.0;
};

struct SolverDiagnostics {
  long total_steps = 0;
  long rejected_steps = 0;
  long newton_iterations = 0;
  // Smallest |det J| / threshold-scale seen along any path.
  double min_relative_jacobian_det = 0.0;
  int schedule_refinements = 0;
};

struct SolutionSet {
  // Ordered by sign_pattern bits.
  std::vector<EigenvalueVector> solutions;
  std::uint64_t spec_hash = 0;
  double g = 0.0;
  int n_spins = 0;
  SolverDiagnostics diagnostics;
};

double bethe_residual(const std::vector<double>& r, const Couplings& c);

long double extended_residual(const ExtendedCouplings& x, const ExtendedCouplings::Vector& r);

// Newton iteration in long double. Returns the iterate with the smallest
// residual, the start included, and stops once the residual stalls.
ExtendedCouplings::Vector extended_newton(const ExtendedCouplings& x,
                                          const ExtendedCouplings::Vector& start, int max_iter = 12);

// Default Newton tolerance: 1e-12 * max(1, max_i K_i).
double default_newton_tolerance(const Couplings& c);

// Threshold below which |det J| is treated as singular:
// 1e-10 * prod_i max(1, 2|r_i|).
double jacobian_singularity_threshold(const std::vector<double>& r);

SolutionSet g_zero_solutions(const ModelSpec& spec);

struct NewtonOutcome {
  EigenvalueVector result;
  int iterations = 0;
};

// Throws SingularJacobianError or ConvergenceError.
NewtonOutcome newton_refine(const EigenvalueVector& start, const Couplings& c, double tol,
                            int max_iter = 50);

struct HomotopyOptions {
  int initial_steps = 64;
  // Minimum step as a fraction of |g_target|.
  double step_floor = 1.0 / (1 << 20);
  // Newton tolerance; <= 0 selects default_newton_tolerance at each g.
  double tolerance = 0.0;
  // Minimum infinity-distance between distinct solutions, times max(1, max sqrt K).
  double deflation_tolerance = 1e-8;
  // How many times the whole schedule is refined 4x if paths collide.
  int max_refinements = 3;
  // 0 means hardware concurrency.
  int threads = 0;
};

// Throws ContinuationError (path stuck at the step floor, or paths that
// still coincide after every schedule refinement).
SolutionSet homotopy_solve(const ModelSpec& spec, const HomotopyOptions& options = {});

struct SumRuleResiduals {
  // max_i |sum_n r_i^n| / (2^N sqrt(max K))
  double linear = 0.0;
  // max_i |sum_n (r_i^n)^2 - 2^N K_i| / (2^N K_i)
  double quadratic = 0.0;
};

// Works on any table with 2^N rows of N eigenvalues.
SumRuleResiduals sum_rule_residuals(const std::vector<std::vector<double>>& rows,
                                    const Couplings& c);
SumRuleResiduals sum_rule_residuals(const SolutionSet& set, const Couplings& c);

// Smallest infinity-norm distance between two solutions in the set.
double min_pairwise_distance(const SolutionSet& set);

}  // namespace rgfree
