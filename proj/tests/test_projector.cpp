#include "rgfree/bethe_solver.hpp"
#include "rgfree/errors.hpp"
#include "rgfree/oracle.hpp"
#include "rgfree/projector.hpp"
#include "rgfree/random_spec.hpp"

#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <random>

using namespace rgfree;

namespace {

ModelSpec mixed_spec(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_spec(n, {Anisotropy::kXYZ, true}, rng);
}

std::vector<double> random_point(int n, std::mt19937_64& rng, double scale = 2.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> r(static_cast<std::size_t>(n));
  for (double& x : r) x = u(rng);
  return r;
}

double relative(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace

TEST(ScalarDeterminants, TwoSpinClosedForm) {
  // Gamma_12 Gamma_21 = -4, so N(r) = 4 r_1 r_2 + 4.
  const Couplings c = build_couplings(xxx_spec({0.0, 1.0}, 1.0));
  EXPECT_DOUBLE_EQ(scalar_norm_det({-2.0, 0.0}, c), 4.0);
  EXPECT_DOUBLE_EQ(scalar_norm_det({1.5, 3.0}, c), 22.0);
  // det of diag(r + r') - Gamma.
  EXPECT_DOUBLE_EQ(offshell_coefficient({1.0, 2.0}, {0.5, -1.0}, c), 1.5 * 1.0 + 4.0);
}

TEST(ScalarDeterminants, OffshellAtSamePointIsNorm) {
  const Couplings c = build_couplings(mixed_spec(6, 3));
  std::mt19937_64 rng(1);
  for (int t = 0; t < 5; ++t) {
    const auto r = random_point(6, rng);
    EXPECT_NEAR(offshell_coefficient(r, r, c), scalar_norm_det(r, c),
                1e-13 * determinant_scale(std::vector<double>(r.size(), 4.0), c));
  }
}

TEST(ScalarDeterminants, OffshellVanishesBetweenDistinctSolutions) {
  const ModelSpec spec = mixed_spec(5, 21);
  const Couplings c = build_couplings(spec);
  const SolutionSet set = homotopy_solve(spec);
  for (const auto& a : set.solutions) {
    const double norm = std::abs(scalar_norm_det(a.r, c));
    for (const auto& b : set.solutions) {
      const double coef = offshell_coefficient(a.r, b.r, c);
      if (&a == &b) {
        EXPECT_NEAR(coef / norm, scalar_norm_det(a.r, c) / norm, 1e-12);
      } else {
        EXPECT_LT(std::abs(coef) / norm, 1e-9);
      }
    }
  }
}

TEST(Pairing, EmptyOddAndPair) {
  const Couplings c = build_couplings(mixed_spec(5, 4));
  EXPECT_EQ(pairing_coefficient(0, c), 1.0);
  for (IndexMask m : {0b1u, 0b111u, 0b10101u, 0b11111u}) EXPECT_EQ(pairing_coefficient(m, c), 0.0);
  // One pair: 4 g^2 F_x F_y(a) F_x F_y(b) / (eps_a - eps_b)^2.
  const double d = c.eps(1) - c.eps(3);
  const double expected = 4 * c.g * c.g * c.Fx(1) * c.Fy(1) * c.Fx(3) * c.Fy(3) / (d * d);
  EXPECT_NEAR(pairing_coefficient(0b1010, c), expected, 1e-14 * expected);
}

TEST(Pairing, FourSpinMatchingSum) {
  const Couplings c = build_couplings(mixed_spec(4, 5));
  auto f = [&](int k) { return c.Fx(k) * c.Fy(k); };
  auto inv2 = [&](int a, int b) { return 1.0 / ((c.eps(a) - c.eps(b)) * (c.eps(a) - c.eps(b))); };
  double pref = 1.0;
  for (int k = 0; k < 4; ++k) pref *= 2 * c.g * f(k);
  const double expected =
      pref * (inv2(0, 1) * inv2(2, 3) + inv2(0, 2) * inv2(1, 3) + inv2(0, 3) * inv2(1, 2));
  EXPECT_NEAR(pairing_coefficient(0b1111, c), expected, 1e-13 * expected);
}

TEST(Pairing, AgreesWithDeterminantForEverySubset) {
  const Couplings c = build_couplings(mixed_spec(8, 6));
  const auto table = pairing_table(c);
  for (IndexMask m = 0; m < 256; ++m) {
    const double value = pairing_coefficient(m, c);
    EXPECT_NEAR(table[m], value, 1e-13 * std::abs(value)) << m;
    if (std::popcount(m) % 2) {
      EXPECT_EQ(value, 0.0);
      // Hadamard bound of the -Gamma block sets the rounding scale.
      double bound = 1.0;
      for (int a = 0; a < 8; ++a) {
        if (!((m >> a) & 1U)) continue;
        double row = 0.0;
        for (int b = 0; b < 8; ++b) {
          if (((m >> b) & 1U) && b != a) row += c.Gamma(a, b) * c.Gamma(a, b);
        }
        bound *= std::sqrt(row);
      }
      EXPECT_NEAR(pairing_coefficient_by_determinant(m, c), 0.0, 1e-12 * bound) << m;
    } else {
      EXPECT_NEAR(pairing_coefficient_by_determinant(m, c), value, 1e-10 * std::abs(value)) << m;
    }
  }
}

TEST(Expansion, TermsHaveEvenComplements) {
  const Couplings c = build_couplings(mixed_spec(6, 7));
  const auto terms = expansion_terms(c);
  EXPECT_EQ(terms.size(), 32u);
  bool saw_full = false;
  for (const auto& t : terms) {
    EXPECT_EQ(std::popcount(static_cast<IndexMask>(0b111111 & ~t.included)) % 2, 0);
    if (t.included == 0b111111) {
      saw_full = true;
      EXPECT_EQ(t.coefficient, 1.0);
    }
  }
  EXPECT_TRUE(saw_full);
}

TEST(Expansion, ScalarDeterminantFromTerms) {
  // Replacing R_k by a scalar s_k turns the expansion into det(diag(r + s) - Gamma).
  const Couplings c = build_couplings(mixed_spec(5, 8));
  std::mt19937_64 rng(2);
  const auto r = random_point(5, rng), s = random_point(5, rng);
  double sum = 0.0;
  for (const auto& t : expansion_terms(c)) {
    double prod = t.coefficient;
    for (int k = 0; k < 5; ++k) {
      if ((t.included >> k) & 1U) prod *= r[k] + s[k];
    }
    sum += prod;
  }
  EXPECT_NEAR(sum, offshell_coefficient(r, s, c), 1e-12 * std::abs(sum));
}

TEST(Strategies, ParseNames) {
  EXPECT_EQ(parse_strategy("subset-tree"), Strategy::kSubsetTree);
  EXPECT_EQ(parse_strategy("dense-laplace"), Strategy::kDenseLaplace);
  EXPECT_STREQ(strategy_name(Strategy::kDenseLaplace), "dense-laplace");
  EXPECT_THROW(parse_strategy("laplace"), ParseError);
}

TEST(Strategies, SubsetTreeMatchesDenseLaplace) {
  for (int n : {2, 3, 5, 7}) {
    const ProjectorEngine engine(mixed_spec(n, 30 + n));
    std::mt19937_64 rng(n);
    const auto r = random_point(n, rng);
    StateVector omega(n);
    std::normal_distribution<double> gauss;
    for (std::size_t b = 0; b < omega.dim(); ++b) omega[b] = Complex(gauss(rng), gauss(rng));
    const StateVector tree = engine.apply(r, omega, Strategy::kSubsetTree);
    const StateVector dense = engine.apply(r, omega, Strategy::kDenseLaplace);
    EXPECT_LT((tree.amplitudes() - dense.amplitudes()).norm(), 1e-10 * dense.norm()) << n;
  }
}

TEST(Strategies, ParallelMatchesSequential) {
  const ProjectorEngine engine(mixed_spec(8, 9));
  std::mt19937_64 rng(3);
  const auto r = random_point(8, rng);
  const StateVector omega = StateVector::uniform(8);
  const StateVector seq = engine.apply(r, omega);
  for (int threads : {1, 3}) {
    const StateVector par = engine.apply_parallel(r, omega, threads);
    EXPECT_LT((par.amplitudes() - seq.amplitudes()).norm(), 1e-12 * seq.norm());
  }
}

TEST(Strategies, DenseLaplaceRespectsCap) {
  const ProjectorEngine engine(mixed_spec(5, 10), 4);
  std::mt19937_64 rng(4);
  EXPECT_THROW(engine.apply(random_point(5, rng), StateVector::uniform(5), Strategy::kDenseLaplace),
               DenseCapError);
}

TEST(Projector, AffineInEachParameter) {
  const ProjectorEngine engine(mixed_spec(4, 11));
  std::mt19937_64 rng(5);
  const auto r = random_point(4, rng);
  const StateVector omega = StateVector::uniform(4);
  for (int k = 0; k < 4; ++k) {
    auto r1 = r, r2 = r;
    r1[k] += 0.7;
    r2[k] += 1.4;
    const Eigen::VectorXcd second = engine.apply(r2, omega).amplitudes() -
                                    2.0 * engine.apply(r1, omega).amplitudes() +
                                    engine.apply(r, omega).amplitudes();
    EXPECT_LT(second.norm(), 1e-12 * engine.apply(r2, omega).norm());
  }
}

TEST(Projector, ZeroCouplingSelectsBasisState) {
  // z field only, g = 0: r_i = +-1 and P / N projects onto one bitstring.
  const ProjectorEngine engine(xxx_spec({0.0, 0.5, 1.3}, 0.0));
  const StateVector omega = StateVector::uniform(3);
  for (std::uint32_t bits = 0; bits < 8; ++bits) {
    std::vector<double> r(3);
    for (int k = 0; k < 3; ++k) r[k] = (bits >> k) & 1U ? 1.0 : -1.0;
    const ProjectionReport rep = engine.project_and_normalize(r, omega);
    StateVector expected = StateVector::basis(3, bits);
    expected.amplitudes() *= 1.0 / std::sqrt(8.0);
    EXPECT_LT((rep.projected.amplitudes() - expected.amplitudes()).norm(), 1e-15);
    EXPECT_TRUE(rep.on_shell);
  }
}

TEST(Projector, OnShellGivesEigenstates) {
  const ModelSpec spec = mixed_spec(5, 12);
  const Couplings c = build_couplings(spec);
  const ProjectorEngine engine(spec);
  const SolutionSet set = homotopy_solve(spec);
  const SpectrumOracle oracle = diagonalize(c);
  std::vector<std::vector<double>> rows;
  for (const auto& s : set.solutions) rows.push_back(s.r);
  const SpectrumMatching match = match_spectra(rows, oracle.rows());
  const StateVector omega = StateVector::uniform(5);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const ProjectionReport rep = engine.project_and_normalize(rows[k], omega);
    EXPECT_TRUE(rep.on_shell);
    EXPECT_LT(rep.idempotency_residual, 1e-8);
    for (double e : rep.eigen_residuals) EXPECT_LT(e, 1e-8);
    const Eigen::MatrixXcd dense = engine.dense_projector(rows[k]) / rep.norm_det;
    const auto cc = crosscheck_projector(oracle, match.a_to_b[k], rep.projected, &dense);
    EXPECT_LT(cc.overlap_defect, 1e-8);
    EXPECT_LT(*cc.frobenius_distance, 1e-8);
  }
}

TEST(Projector, ProjectorsResolveIdentity) {
  const ModelSpec spec = mixed_spec(4, 13);
  const Couplings c = build_couplings(spec);
  const ProjectorEngine engine(spec);
  Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(16, 16);
  for (const auto& s : homotopy_solve(spec).solutions) {
    sum += engine.normalized_projector(s.r);
  }
  EXPECT_LT(relative(sum, Eigen::MatrixXcd::Identity(16, 16)), 1e-10);
}

TEST(Projector, OffShellTimesOnShell) {
  const ModelSpec spec = mixed_spec(4, 14);
  const Couplings c = build_couplings(spec);
  const ProjectorEngine engine(spec);
  std::mt19937_64 rng(6);
  for (const auto& s : homotopy_solve(spec).solutions) {
    const Eigen::MatrixXcd on = engine.normalized_projector(s.r);
    const auto r = random_point(4, rng);
    const Eigen::MatrixXcd lhs = engine.dense_projector(r) * on;
    EXPECT_LT(relative(lhs, offshell_coefficient(r, s.r, c) * on), 1e-9);
  }
}

TEST(Projector, OffShellPointIsFlagged) {
  const ProjectorEngine engine(mixed_spec(3, 15));
  const ProjectionReport rep = engine.project_and_normalize({0.3, -0.4, 1.1}, StateVector::uniform(3));
  EXPECT_FALSE(rep.on_shell);
  EXPECT_GT(rep.bethe_residual, 1e-3);
}

TEST(Projector, VanishingNormThrows) {
  // N(r) = 4 r_1 r_2 + 4 vanishes at r = (1, -1).
  const ProjectorEngine engine(xxx_spec({0.0, 1.0}, 1.0));
  EXPECT_THROW(engine.project_and_normalize({1.0, -1.0}, StateVector::uniform(2)), NormalizationError);
}

TEST(Projector, OrthogonalVacuumThrows) {
  // z field and XXZ couplings conserve magnetization, so the all-down vacuum
  // reaches exactly one eigenstate.
  const ModelSpec spec = xxz_spec({-0.5, 0.4, 1.0, 2.2}, 0.7, 0.2, 1.3);
  const ProjectorEngine engine(spec);
  const StateVector vacuum = StateVector::basis(4, 0);
  int reached = 0, orthogonal = 0;
  for (const auto& s : homotopy_solve(spec).solutions) {
    try {
      engine.project_and_normalize(s.r, vacuum);
      ++reached;
    } catch (const VacuumOrthogonalError&) {
      ++orthogonal;
    }
  }
  EXPECT_EQ(reached, 1);
  EXPECT_EQ(orthogonal, 15);
}

TEST(Projector, DimensionMismatchThrows) {
  const ProjectorEngine engine(mixed_spec(3, 16));
  EXPECT_THROW(engine.apply({1.0, 2.0, 3.0}, StateVector::uniform(4)), DimensionError);
  EXPECT_THROW(engine.apply({1.0, 2.0}, StateVector::uniform(3)), DimensionError);
}

TEST(IdentityResolution, ExactQuadrature) {
  for (int n : {2, 3, 5}) {
    const ProjectorEngine engine(mixed_spec(n, 40 + n));
    for (double a : {0.5, 1.0, 2.0}) EXPECT_LT(engine.identity_resolution_residual(a), 1e-10);
  }
}

TEST(IdentityResolution, RejectsLargeSystems) {
  const ProjectorEngine engine(mixed_spec(7, 17));
  EXPECT_THROW(engine.identity_resolution_residual(1.0), DenseCapError);
}

TEST(NormalizedProjector, MatchesRawRatioOffCoalescence) {
  const ModelSpec spec = mixed_spec(3, 18);
  const Couplings c = build_couplings(spec);
  const ProjectorEngine engine(spec);
  for (const auto& s : homotopy_solve(spec).solutions) {
    const Eigen::MatrixXcd raw = engine.dense_projector(s.r) / scalar_norm_det(s.r, c);
    EXPECT_LT(relative(engine.normalized_projector(s.r), raw), 1e-10);
    const ProjectionReport rep = engine.project_and_normalize(s.r, StateVector::uniform(3));
    EXPECT_LT(rep.refinement_shift, 1e-12);
  }
}

TEST(NormalizedProjector, OffShellInputIsNotMoved) {
  const ModelSpec spec = mixed_spec(4, 19);
  const ProjectorEngine engine(spec);
  std::mt19937_64 rng(8);
  const auto r = random_point(4, rng);
  const ProjectionReport rep = engine.project_and_normalize(r, StateVector::uniform(4));
  EXPECT_FALSE(rep.on_shell);
  EXPECT_EQ(rep.refinement_shift, 0.0);
  EXPECT_LT(relative(engine.normalized_projector(r) * rep.norm_det, engine.dense_projector(r)), 1e-12);
}

TEST(NormalizedProjector, ZeroNormalizationThrows) {
  const ProjectorEngine engine(mixed_spec(3, 20));
  EXPECT_THROW(engine.normalized_projector({0.0, 0.0, 0.0}), NormalizationError);
}
