#include "rgfree/oracle.hpp"

#include "rgfree/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>
#include <tuple>

namespace rgfree {

std::vector<double> SpectrumOracle::row(Eigen::Index n) const {
  std::vector<double> out(static_cast<std::size_t>(eigenvalues.cols()));
  for (Eigen::Index i = 0; i < eigenvalues.cols(); ++i) out[static_cast<std::size_t>(i)] = eigenvalues(n, i);
  return out;
}

std::vector<std::vector<double>> SpectrumOracle::rows() const {
  std::vector<std::vector<double>> out;
  out.reserve(static_cast<std::size_t>(eigenvalues.rows()));
  for (Eigen::Index n = 0; n < eigenvalues.rows(); ++n) out.push_back(row(n));
  return out;
}

SpectrumOracle diagonalize(const Couplings& c, std::uint64_t seed, int cap) {
  if (c.n > cap) {
    throw DenseCapError("oracle needs N <= " + std::to_string(cap) + ", got N = " + std::to_string(c.n));
  }
  const std::vector<ChargeOperator> charges = make_charges(c);
  std::vector<Eigen::MatrixXcd> dense;
  dense.reserve(charges.size());
  for (const auto& op : charges) dense.push_back(dense_charge(op, cap));
  const Eigen::Index dim = dense.front().rows();

  for (int attempt = 0; attempt <= 5; ++attempt) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(attempt);
    std::mt19937_64 rng(s);
    std::uniform_real_distribution<double> coef(0.5, 1.5);
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);
    for (const auto& m : dense) h += coef(rng) * m;

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
    if (es.info() != Eigen::Success) continue;
    const Eigen::VectorXd& levels = es.eigenvalues();
    const double radius = std::max(1.0, levels.cwiseAbs().maxCoeff());
    double min_gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 1; k < dim; ++k) min_gap = std::min(min_gap, levels(k) - levels(k - 1));
    if (min_gap < 1e-8 * radius) continue;

    SpectrumOracle out;
    out.n_spins = c.n;
    out.seed = s;
    out.retries = attempt;
    out.eigenvectors = es.eigenvectors();
    out.eigenvalues.resize(dim, c.n);
    for (int i = 0; i < c.n; ++i) {
      const Eigen::MatrixXcd in_basis = out.eigenvectors.adjoint() * dense[static_cast<std::size_t>(i)] * out.eigenvectors;
      out.eigenvalues.col(i) = in_basis.diagonal().real();
      Eigen::MatrixXcd off = in_basis;
      off.diagonal().setZero();
      out.diagonality_residual = std::max(out.diagonality_residual, off.cwiseAbs().maxCoeff());
    }
    return out;
  }
  throw DegeneracyError("every random combination of the charges had near-degenerate levels; "
                        "the joint spectrum is suspected to be genuinely degenerate");
}

SpectrumMatching match_spectra(const std::vector<std::vector<double>>& a,
                               const std::vector<std::vector<double>>& b) {
  if (a.size() != b.size()) throw DimensionError("spectra have different numbers of rows");
  const std::size_t n = a.size();
  std::vector<std::tuple<double, int, int>> pairs;
  pairs.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (a[i].size() != b[j].size()) throw DimensionError("spectrum rows have different lengths");
      double d = 0.0;
      for (std::size_t k = 0; k < a[i].size(); ++k) d = std::max(d, std::abs(a[i][k] - b[j][k]));
      pairs.emplace_back(d, static_cast<int>(i), static_cast<int>(j));
    }
  }
  std::sort(pairs.begin(), pairs.end());
  SpectrumMatching out;
  out.a_to_b.assign(n, -1);
  std::vector<bool> taken(n, false);
  std::size_t assigned = 0;
  for (const auto& [d, i, j] : pairs) {
    if (assigned == n) break;
    if (out.a_to_b[static_cast<std::size_t>(i)] >= 0 || taken[static_cast<std::size_t>(j)]) continue;
    out.a_to_b[static_cast<std::size_t>(i)] = j;
    taken[static_cast<std::size_t>(j)] = true;
    out.max_abs_diff = std::max(out.max_abs_diff, d);
    ++assigned;
  }
  return out;
}

ProjectorCrosscheck crosscheck_projector(const SpectrumOracle& oracle, Eigen::Index n,
                                         const StateVector& engine_output,
                                         const Eigen::MatrixXcd* normalized_dense_projector) {
  if (n < 0 || n >= oracle.eigenvectors.cols()) throw DimensionError("oracle state index out of range");
  if (static_cast<Eigen::Index>(engine_output.dim()) != oracle.eigenvectors.rows()) {
    throw DimensionError("engine output does not match oracle dimension");
  }
  ProjectorCrosscheck out;
  const auto psi = oracle.eigenvectors.col(n);
  const Eigen::VectorXcd& v = engine_output.amplitudes();
  const double vv = v.squaredNorm();
  out.overlap_defect = 1.0 - std::norm(psi.dot(v)) / vv;
  if (normalized_dense_projector != nullptr) {
    out.frobenius_distance = (*normalized_dense_projector - psi * psi.adjoint()).norm();
  }
  return out;
}

}  // namespace rgfree
