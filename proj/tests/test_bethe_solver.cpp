#include "rgfree/bethe_solver.hpp"
#include "rgfree/errors.hpp"
#include "rgfree/oracle.hpp"
#include "rgfree/random_spec.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace rgfree;

namespace {

std::vector<std::vector<double>> rows_of(const SolutionSet& set) {
  std::vector<std::vector<double>> rows;
  for (const auto& s : set.solutions) rows.push_back(s.r);
  return rows;
}

}  // namespace

TEST(SignPattern, TextRoundTrip) {
  const SignPattern p = SignPattern::parse("1001");
  EXPECT_EQ(p.n_spins(), 4);
  EXPECT_EQ(p.bits(), 0b1001u);
  EXPECT_EQ(p.sign(0), 1);
  EXPECT_EQ(p.sign(1), -1);
  EXPECT_EQ(p.to_string(), "1001");
  EXPECT_EQ(SignPattern(3, 0b001).to_string(), "100");
  EXPECT_THROW(SignPattern::parse("10x"), ParseError);
  EXPECT_THROW(SignPattern::parse(""), ParseError);
}

TEST(ZeroCoupling, SolutionsAreSignedRoots) {
  std::mt19937_64 rng(4);
  const ModelSpec spec = random_spec(4, {Anisotropy::kXYZ, true}, rng);
  const SolutionSet set = g_zero_solutions(spec);
  ASSERT_EQ(set.solutions.size(), 16u);
  for (const auto& s : set.solutions) {
    for (int i = 0; i < 4; ++i) {
      EXPECT_DOUBLE_EQ(s.r[i], s.sign_pattern.sign(i) * std::sqrt(k_at_zero_coupling(spec, i)));
    }
  }
  ModelSpec zero = spec;
  zero.g = 0.0;
  const SolutionSet via_homotopy = homotopy_solve(zero);
  for (std::size_t k = 0; k < 16; ++k) EXPECT_EQ(via_homotopy.solutions[k].r, set.solutions[k].r);
}

TEST(Homotopy, TwoSpinAnalyticSpectrum) {
  // eps = (0, 1), g = 1, constant F: Gamma_12 = -2, Gamma_21 = 2, K = 4.
  // r_1 (r_1 + 2)(r_1^2 - 2 r_1 - 4) = 0 with r_2 = (4 - r_1^2) / 2.
  const SolutionSet set = homotopy_solve(xxx_spec({0.0, 1.0}, 1.0));
  const double s5 = std::sqrt(5.0);
  const std::vector<std::vector<double>> expected = {
      {0.0, 2.0}, {-2.0, 0.0}, {1.0 + s5, -1.0 - s5}, {1.0 - s5, -1.0 + s5}};
  const SpectrumMatching m = match_spectra(rows_of(set), expected);
  EXPECT_LT(m.max_abs_diff, 1e-13);
}

TEST(Homotopy, MatchesExactDiagonalization) {
  for (int n = 2; n <= 6; ++n) {
    for (auto aniso : {Anisotropy::kXXX, Anisotropy::kXXZ, Anisotropy::kXYZ}) {
      for (bool field : {false, true}) {
        std::mt19937_64 rng(1000 * n + 10 * static_cast<int>(aniso) + field);
        const ModelSpec spec = random_spec(n, {aniso, field}, rng);
        const Couplings c = build_couplings(spec);
        const SolutionSet set = homotopy_solve(spec);
        ASSERT_EQ(set.solutions.size(), std::size_t{1} << n);
        const SpectrumMatching m = match_spectra(rows_of(set), diagonalize(c).rows());
        EXPECT_LT(m.max_abs_diff, 1e-8) << "n=" << n << " " << anisotropy_name(aniso) << " field=" << field;
        for (const auto& s : set.solutions) {
          EXPECT_LT(s.residual, 1e-10 * std::max(1.0, c.K.maxCoeff()));
          EXPECT_EQ(s.g_reached, spec.g);
        }
      }
    }
  }
}

TEST(Homotopy, SolutionsAreDistinct) {
  std::mt19937_64 rng(77);
  const ModelSpec spec = random_spec(7, {Anisotropy::kXYZ, true}, rng);
  const SolutionSet set = homotopy_solve(spec);
  EXPECT_GT(min_pairwise_distance(set), 1e-8);
}

TEST(Homotopy, NegativeCouplingAndNoField) {
  ModelSpec spec = xxz_spec({-1.0, 0.2, 0.9, 2.0}, -0.6, 0.3, 1.5);
  const SolutionSet set = homotopy_solve(spec);
  const SpectrumMatching m = match_spectra(rows_of(set), diagonalize(build_couplings(spec)).rows());
  EXPECT_LT(m.max_abs_diff, 1e-8);
}

TEST(Homotopy, SumRules) {
  for (int n : {3, 5, 8}) {
    std::mt19937_64 rng(300 + n);
    const ModelSpec spec = random_spec(n, {Anisotropy::kXYZ, true}, rng);
    const SumRuleResiduals s = sum_rule_residuals(homotopy_solve(spec), build_couplings(spec));
    EXPECT_LT(s.linear, 1e-9);
    EXPECT_LT(s.quadratic, 1e-9);
  }
}

TEST(Homotopy, DeterministicAcrossThreadCounts) {
  std::mt19937_64 rng(31);
  const ModelSpec spec = random_spec(6, {Anisotropy::kXXZ, true}, rng);
  HomotopyOptions one;
  one.threads = 1;
  HomotopyOptions four;
  four.threads = 4;
  const SolutionSet a = homotopy_solve(spec, one);
  const SolutionSet b = homotopy_solve(spec, four);
  const SolutionSet c = homotopy_solve(spec, one);
  for (std::size_t k = 0; k < a.solutions.size(); ++k) {
    EXPECT_EQ(a.solutions[k].r, b.solutions[k].r);
    EXPECT_EQ(a.solutions[k].r, c.solutions[k].r);
    EXPECT_EQ(a.solutions[k].sign_pattern.bits(), k);
  }
  EXPECT_EQ(a.spec_hash, spec_hash(spec));
}

TEST(Homotopy, RejectsBadOptions) {
  HomotopyOptions opt;
  opt.initial_steps = 0;
  EXPECT_THROW(homotopy_solve(xxx_spec({0.0, 1.0}, 1.0), opt), InputError);
}

TEST(SumRules, DetectCorruptedRow) {
  std::mt19937_64 rng(8);
  const ModelSpec spec = random_spec(4, {Anisotropy::kXYZ, true}, rng);
  const Couplings c = build_couplings(spec);
  auto rows = rows_of(homotopy_solve(spec));
  rows[3][1] += 1e-3;
  const SumRuleResiduals s = sum_rule_residuals(rows, c);
  EXPECT_GT(s.linear, 1e-6);
}

TEST(Newton, ExactSolutionIsFixedPoint) {
  const Couplings c = build_couplings(xxx_spec({0.0, 1.0}, 1.0));
  EigenvalueVector start;
  start.r = {-2.0, 0.0};
  const NewtonOutcome out = newton_refine(start, c, 1e-12);
  EXPECT_EQ(out.iterations, 0);
  EXPECT_EQ(out.result.r, start.r);
  EXPECT_EQ(out.result.residual, 0.0);
}

TEST(Newton, ConvergesQuicklyFromWeakCoupling) {
  std::mt19937_64 rng(12);
  ModelSpec spec = random_spec(5, {Anisotropy::kXYZ, true}, rng);
  spec.g = 1e-6;
  const Couplings c = build_couplings(spec);
  for (const auto& s : g_zero_solutions(spec).solutions) {
    const NewtonOutcome out = newton_refine(s, c, default_newton_tolerance(c));
    EXPECT_LE(out.iterations, 3);
    EXPECT_LT(out.result.residual, default_newton_tolerance(c));
  }
}

TEST(Newton, SingularJacobianThrows) {
  // At g = 0 the Jacobian is diag(2 r); r = 0 is singular.
  ModelSpec spec = xxx_spec({0.0, 1.0, 2.0}, 0.0);
  const Couplings c = build_couplings(spec);
  EigenvalueVector start;
  start.r = {0.0, 0.0, 0.0};
  EXPECT_THROW(newton_refine(start, c, 1e-12), SingularJacobianError);
}

TEST(Newton, IterationLimitThrows) {
  const Couplings c = build_couplings(xxx_spec({0.0, 1.0}, 1.0));
  EigenvalueVector start;
  start.r = {3.0, -5.0};
  EXPECT_THROW(newton_refine(start, c, 1e-12, 1), ConvergenceError);
}

TEST(SingularityThreshold, ScalesWithLargeEntries) {
  EXPECT_DOUBLE_EQ(jacobian_singularity_threshold({0.1, 0.2}), 1e-10);
  EXPECT_DOUBLE_EQ(jacobian_singularity_threshold({2.0, -3.0}), 1e-10 * 4.0 * 6.0);
}

TEST(ExtendedNewton, TightensRoundedSolutions) {
  std::mt19937_64 rng(23);
  const ModelSpec spec = random_spec(6, {Anisotropy::kXYZ, true}, rng);
  const ExtendedCouplings x = build_extended_couplings(spec);
  const long double k_max = std::max(1.0L, x.K.maxCoeff());
  for (const auto& s : homotopy_solve(spec).solutions) {
    const ExtendedCouplings::Vector start =
        Eigen::Map<const Eigen::VectorXd>(s.r.data(), 6).cast<long double>();
    const ExtendedCouplings::Vector polished = extended_newton(x, start);
    EXPECT_LE(extended_residual(x, polished), extended_residual(x, start));
    EXPECT_LT(extended_residual(x, polished), 1e-16L * k_max);
    // Rounding to double is the only error left in the start point.
    EXPECT_LT((polished - start).cwiseAbs().maxCoeff(), 1e-9L);
  }
}
