#include "rgfree/projector.hpp"

#include "rgfree/bethe_solver.hpp"
#include "rgfree/errors.hpp"

#include <bit>
#include <cmath>
#include <exception>
#include <thread>

namespace rgfree {

const char* strategy_name(Strategy s) {
  return s == Strategy::kSubsetTree ? "subset-tree" : "dense-laplace";
}

Strategy parse_strategy(const std::string& text) {
  if (text == "subset-tree") return Strategy::kSubsetTree;
  if (text == "dense-laplace") return Strategy::kDenseLaplace;
  throw ParseError("unknown strategy '" + text + "' (expected subset-tree or dense-laplace)");
}

namespace {

Eigen::MatrixXd shifted_gamma(const Eigen::VectorXd& diagonal, const Couplings& c) {
  Eigen::MatrixXd m = -c.Gamma;
  m.diagonal() = diagonal;
  return m;
}

Eigen::VectorXd as_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void check_length(const std::vector<double>& r, const Couplings& c) {
  if (static_cast<int>(r.size()) != c.n) {
    throw DimensionError("parameter vector has " + std::to_string(r.size()) + " entries, model has " +
                         std::to_string(c.n) + " spins");
  }
}

template <typename T>
T pair_weight(const BasicCouplings<T>& c, int a, int b) {
  const T gap = c.eps(a) - c.eps(b);
  return 1 / (gap * gap);
}

double matching_sum(const Couplings& c, IndexMask mask) {
  if (mask == 0) return 1.0;
  const int a = std::countr_zero(mask);
  const IndexMask rest = mask & (mask - 1);
  double total = 0.0;
  for (IndexMask m = rest; m != 0; m &= m - 1) {
    const int b = std::countr_zero(m);
    total += pair_weight(c, a, b) * matching_sum(c, rest & ~(IndexMask{1} << b));
  }
  return total;
}

double pairing_prefactor(const Couplings& c, IndexMask mask) {
  double p = 1.0;
  for (IndexMask m = mask; m != 0; m &= m - 1) {
    const int k = std::countr_zero(m);
    p *= 2.0 * c.g * c.Fx(k) * c.Fy(k);
  }
  return p;
}

template <typename T>
std::vector<T> pairing_table_as(const BasicCouplings<T>& c) {
  const std::size_t count = std::size_t{1} << c.n;
  std::vector<T> haf(count, 0), prefactor(count, 1), out(count, 0);
  haf[0] = 1;
  for (std::size_t m = 1; m < count; ++m) {
    const auto mask = static_cast<IndexMask>(m);
    const int low = std::countr_zero(mask);
    const IndexMask rest = mask & (mask - 1);
    prefactor[m] = prefactor[rest] * 2 * c.g * c.Fx(low) * c.Fy(low);
    if (std::popcount(mask) & 1) continue;
    T total = 0;
    for (IndexMask r = rest; r != 0; r &= r - 1) {
      const int b = std::countr_zero(r);
      total += pair_weight(c, low, b) * haf[rest & ~(IndexMask{1} << b)];
    }
    haf[m] = total;
  }
  for (std::size_t m = 0; m < count; ++m) out[m] = prefactor[m] * haf[m];
  return out;
}

using XScalar = std::complex<long double>;
using XVector = Eigen::Matrix<XScalar, Eigen::Dynamic, 1>;
using XMatrix = Eigen::Matrix<XScalar, Eigen::Dynamic, Eigen::Dynamic>;
using RVector = ExtendedCouplings::Vector;

// Depth-first walk over include/skip decisions for spins 0..n-1. The vector
// at depth k is the product of (r_j + R_j) over included j < k applied to
// the vacuum; complements of odd size are never completed.
class SubsetTreeWalker {
 public:
  SubsetTreeWalker(const std::vector<ExtendedChargeOperator>& charges, const RVector& r,
                   const std::vector<long double>& pairing, int n)
      : charges_(charges), r_(r), pairing_(pairing), n_(n), dim_(hilbert_dim(n)),
        buffers_(static_cast<std::size_t>(n), XVector(static_cast<Eigen::Index>(dim_))),
        acc_(XVector::Zero(static_cast<Eigen::Index>(dim_))) {}

  void walk(int k, const XVector& v, IndexMask skipped) {
    if (k == n_) {
      acc_ += pairing_[skipped] * v;
      return;
    }
    const bool last = k == n_ - 1;
    const bool odd = (std::popcount(skipped) & 1) != 0;
    if (!last || !odd) {
      XVector& out = buffers_[static_cast<std::size_t>(k)];
      charges_[static_cast<std::size_t>(k)].apply({v.data(), dim_}, {out.data(), dim_});
      out += r_(k) * v;
      walk(k + 1, out, skipped);
    }
    if (!last || odd) walk(k + 1, v, skipped | (IndexMask{1} << k));
  }

  XVector& accumulator() { return acc_; }

 private:
  const std::vector<ExtendedChargeOperator>& charges_;
  const RVector& r_;
  const std::vector<long double>& pairing_;
  int n_;
  std::size_t dim_;
  std::vector<XVector> buffers_;
  XVector acc_;
};

RVector extended(const std::vector<double>& r) { return as_eigen(r).cast<long double>(); }

XVector extended(const StateVector& v) { return v.amplitudes().cast<XScalar>(); }

StateVector narrowed(int n, const XVector& v) { return StateVector(n, v.cast<Complex>()); }

}  // namespace

double scalar_norm_det(const std::vector<double>& r, const Couplings& c) {
  check_length(r, c);
  return shifted_gamma(2.0 * as_eigen(r), c).partialPivLu().determinant();
}

double offshell_coefficient(const std::vector<double>& r, const std::vector<double>& r_m,
                            const Couplings& c) {
  check_length(r, c);
  check_length(r_m, c);
  return shifted_gamma(as_eigen(r) + as_eigen(r_m), c).partialPivLu().determinant();
}

double determinant_scale(const std::vector<double>& diagonal, const Couplings& c) {
  check_length(diagonal, c);
  double s = 1.0;
  for (int i = 0; i < c.n; ++i) {
    s *= std::abs(diagonal[i]) + c.Gamma.row(i).cwiseAbs().sum();
  }
  return s;
}

double pairing_coefficient(IndexMask mask, const Couplings& c) {
  if (mask >> c.n) throw DimensionError("subset mask refers to spins beyond the model");
  if (std::popcount(mask) & 1) return 0.0;
  return pairing_prefactor(c, mask) * matching_sum(c, mask);
}

double pairing_coefficient_by_determinant(IndexMask mask, const Couplings& c) {
  if (mask >> c.n) throw DimensionError("subset mask refers to spins beyond the model");
  std::vector<int> idx;
  for (IndexMask m = mask; m != 0; m &= m - 1) idx.push_back(std::countr_zero(m));
  const auto size = static_cast<Eigen::Index>(idx.size());
  if (size == 0) return 1.0;
  Eigen::MatrixXd block(size, size);
  for (Eigen::Index a = 0; a < size; ++a) {
    for (Eigen::Index b = 0; b < size; ++b) block(a, b) = a == b ? 0.0 : -c.Gamma(idx[a], idx[b]);
  }
  return block.fullPivLu().determinant();
}

std::vector<double> pairing_table(const Couplings& c) { return pairing_table_as(c); }

std::vector<ExpansionTerm> expansion_terms(const Couplings& c) {
  const std::vector<double> table = pairing_table(c);
  const IndexMask full = static_cast<IndexMask>((std::size_t{1} << c.n) - 1);
  std::vector<ExpansionTerm> terms;
  for (std::size_t m = 0; m < table.size(); ++m) {
    const auto mask = static_cast<IndexMask>(m);
    if (std::popcount(mask) & 1) continue;
    terms.push_back({full & ~mask, table[m]});
  }
  return terms;
}

ProjectorEngine::ProjectorEngine(const ModelSpec& spec, int dense_cap)
    : c_(build_couplings(spec)), x_(build_extended_couplings(spec)), dense_cap_(dense_cap),
      charges_(make_charges(c_)), xcharges_(make_charges(x_)), pairing_(pairing_table(c_)),
      xpairing_(pairing_table_as(x_)) {}

void ProjectorEngine::check(const std::vector<double>& r, const StateVector& omega) const {
  check_length(r, c_);
  if (omega.n_spins() != c_.n || omega.dim() != hilbert_dim(c_.n)) {
    throw DimensionError("vacuum has " + std::to_string(omega.n_spins()) + " spins, model has " +
                         std::to_string(c_.n));
  }
}

void ProjectorEngine::check_dense(const char* what) const {
  if (c_.n > dense_cap_) {
    throw DenseCapError(std::string(what) + " needs N <= " + std::to_string(dense_cap_) +
                        ", got N = " + std::to_string(c_.n));
  }
}

StateVector ProjectorEngine::apply(const OperatorDeterminantPlan& plan,
                                   const StateVector& omega) const {
  check(plan.r, omega);
  if (plan.strategy == Strategy::kDenseLaplace) return apply_dense_laplace(plan.r, omega);
  return narrowed(c_.n, apply_subset_tree(extended(plan.r), extended(omega)));
}

ProjectorEngine::XVector ProjectorEngine::apply_subset_tree(const RVector& r,
                                                            const XVector& omega) const {
  SubsetTreeWalker walker(xcharges_, r, xpairing_, c_.n);
  walker.walk(0, omega, 0);
  return std::move(walker.accumulator());
}

StateVector ProjectorEngine::apply_parallel(const std::vector<double>& r, const StateVector& omega,
                                            int threads, int split_depth) const {
  check(r, omega);
  const int depth = std::max(0, std::min(split_depth, c_.n - 1));
  const std::size_t prefixes = std::size_t{1} << depth;
  const std::size_t dim = hilbert_dim(c_.n);
  const RVector xr = extended(r);
  const XVector xomega = extended(omega);
  std::vector<XVector> partial(prefixes);
  std::vector<std::exception_ptr> errors(prefixes);

  auto run_prefix = [&](std::size_t p) {
    // Bit k of p set: spin k is included.
    XVector v = xomega;
    XVector tmp(v.size());
    IndexMask skipped = 0;
    for (int k = 0; k < depth; ++k) {
      if ((p >> k) & 1U) {
        xcharges_[static_cast<std::size_t>(k)].apply({v.data(), dim}, {tmp.data(), dim});
        tmp += xr(k) * v;
        v.swap(tmp);
      } else {
        skipped |= IndexMask{1} << k;
      }
    }
    SubsetTreeWalker walker(xcharges_, xr, xpairing_, c_.n);
    walker.walk(depth, v, skipped);
    partial[p] = std::move(walker.accumulator());
  };

  unsigned workers = threads > 0 ? static_cast<unsigned>(threads) : std::thread::hardware_concurrency();
  workers = std::max(1U, std::min<unsigned>(workers, static_cast<unsigned>(prefixes)));
  auto body = [&](unsigned w) {
    for (std::size_t p = w; p < prefixes; p += workers) {
      try {
        run_prefix(p);
      } catch (...) {
        errors[p] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(body, w);
  body(0);
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  XVector sum = XVector::Zero(static_cast<Eigen::Index>(dim));
  for (const auto& part : partial) sum += part;
  return narrowed(c_.n, sum);
}

// Kept in double on purpose: it serves as an independent check of the tree.
StateVector ProjectorEngine::apply_dense_laplace(const std::vector<double>& r,
                                                 const StateVector& omega) const {
  check_dense("dense-laplace strategy");
  // minors[S]: determinant of rows n-|S|..n-1 and columns S applied to the
  // vacuum, built up by Laplace expansion along the top row of each minor.
  const int n = c_.n;
  const std::size_t count = std::size_t{1} << n;
  std::vector<Eigen::VectorXcd> minors(count);
  minors[0] = omega.amplitudes();
  for (int size = 1; size <= n; ++size) {
    const int row = n - size;
    Eigen::MatrixXcd diag_entry = dense_charge(charges_[static_cast<std::size_t>(row)], dense_cap_);
    diag_entry.diagonal().array() += r[static_cast<std::size_t>(row)];
    for (std::size_t m = 0; m < count; ++m) {
      const auto mask = static_cast<IndexMask>(m);
      if (std::popcount(mask) != size) continue;
      Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(omega.amplitudes().size());
      int position = 0;
      for (IndexMask rest = mask; rest != 0; rest &= rest - 1, ++position) {
        const int col = std::countr_zero(rest);
        const Eigen::VectorXcd& minor = minors[mask & ~(IndexMask{1} << col)];
        const double sign = (position & 1) ? -1.0 : 1.0;
        if (col == row) {
          acc.noalias() += sign * (diag_entry * minor);
        } else {
          acc -= (sign * c_.Gamma(row, col)) * minor;
        }
      }
      minors[m] = std::move(acc);
    }
    for (std::size_t m = 0; m < count; ++m) {
      if (std::popcount(static_cast<IndexMask>(m)) == size - 1) minors[m] = Eigen::VectorXcd();
    }
  }
  return StateVector(n, std::move(minors[count - 1]));
}

ProjectorEngine::RVector ProjectorEngine::working_point(const std::vector<double>& r,
                                                        double* shift) const {
  const RVector start = extended(r);
  if (shift) *shift = 0.0;
  if (!(bethe_residual(r, c_) < 1e-9 * std::max(1.0, c_.K.maxCoeff()))) return start;
  const RVector polished = extended_newton(x_, start);
  const long double moved = (polished - start).cwiseAbs().maxCoeff();
  const long double limit = 1e-6L * std::max(1.0L, start.cwiseAbs().maxCoeff());
  if (!(moved <= limit)) return start;
  if (shift) *shift = static_cast<double>(moved);
  return polished;
}

long double ProjectorEngine::checked_norm_det(const RVector& r) const {
  ExtendedCouplings::Matrix m = -x_.Gamma;
  m.diagonal() = 2.0L * r;
  const long double det = m.partialPivLu().determinant();
  long double scale = 1.0L;
  for (int i = 0; i < x_.n; ++i) scale *= std::abs(m(i, i)) + x_.Gamma.row(i).cwiseAbs().sum();
  if (!(std::abs(det) >= 1e-12L * scale)) {
    throw NormalizationError("scalar normalization determinant N(r) = " +
                             std::to_string(static_cast<double>(det)) + " is numerically zero");
  }
  return det;
}

ProjectionReport ProjectorEngine::project_and_normalize(const std::vector<double>& r,
                                                        const StateVector& omega) const {
  check(r, omega);
  ProjectionReport rep;
  rep.bethe_residual = bethe_residual(r, c_);
  rep.on_shell = rep.bethe_residual < 1e-9 * std::max(1.0, c_.K.maxCoeff());
  const RVector xr = working_point(r, &rep.refinement_shift);
  const long double det = checked_norm_det(xr);
  rep.norm_det = static_cast<double>(det);

  const XVector unnormalized = apply_subset_tree(xr, extended(omega));
  const XVector projected = unnormalized / det;
  rep.unnormalized = narrowed(c_.n, unnormalized);
  rep.projected = narrowed(c_.n, projected);
  const long double v_norm = projected.norm();
  if (v_norm < 1e-8L * static_cast<long double>(omega.norm())) {
    throw VacuumOrthogonalError(
        "vacuum has no overlap with the requested eigenstate (|P Omega| / N = " +
        std::to_string(static_cast<double>(v_norm)) +
        "); choose a vacuum spread over every magnetization sector");
  }

  const XVector twice = apply_subset_tree(xr, projected) / det;
  rep.idempotency_residual = static_cast<double>((twice - projected).norm() / v_norm);

  rep.eigen_residuals.resize(static_cast<std::size_t>(c_.n));
  const std::size_t dim = hilbert_dim(c_.n);
  XVector tmp(static_cast<Eigen::Index>(dim));
  for (int i = 0; i < c_.n; ++i) {
    xcharges_[static_cast<std::size_t>(i)].apply({projected.data(), dim}, {tmp.data(), dim});
    rep.eigen_residuals[static_cast<std::size_t>(i)] =
        static_cast<double>((tmp - xr(i) * projected).norm() / v_norm);
  }
  return rep;
}

XMatrix ProjectorEngine::dense_columns(const RVector& r) const {
  const auto dim = static_cast<Eigen::Index>(hilbert_dim(c_.n));
  XMatrix m(dim, dim);
  XVector e = XVector::Zero(dim);
  for (Eigen::Index b = 0; b < dim; ++b) {
    e(b) = 1.0L;
    m.col(b) = apply_subset_tree(r, e);
    e(b) = 0.0L;
  }
  return m;
}

Eigen::MatrixXcd ProjectorEngine::dense_projector(const std::vector<double>& r) const {
  check_length(r, c_);
  check_dense("dense projector");
  return dense_columns(extended(r)).cast<Complex>();
}

Eigen::MatrixXcd ProjectorEngine::normalized_projector(const std::vector<double>& r) const {
  check_length(r, c_);
  check_dense("dense projector");
  const RVector xr = working_point(r, nullptr);
  const long double det = checked_norm_det(xr);
  return (dense_columns(xr) / det).cast<Complex>();
}

double ProjectorEngine::identity_resolution_residual(double a) const {
  if (c_.n > kIdentityResolutionCap) {
    throw DenseCapError("identity resolution check needs N <= " +
                        std::to_string(kIdentityResolutionCap));
  }
  if (!(a > 0.0)) throw InputError("integration half-width must be positive");
  const int n = c_.n;
  const long double node = a / std::sqrt(3.0L);
  const long double weight = std::pow(static_cast<long double>(a), n);

  XMatrix integral = XMatrix::Zero(static_cast<Eigen::Index>(hilbert_dim(n)),
                                   static_cast<Eigen::Index>(hilbert_dim(n)));
  RVector r(n);
  for (std::size_t p = 0; p < (std::size_t{1} << n); ++p) {
    long double w = weight;
    for (int i = 0; i < n; ++i) {
      r(i) = (p >> i) & 1U ? node : -node;
      w *= r(i);
    }
    integral += w * dense_columns(r);
  }
  const long double expected = std::pow(2.0L * a * a * a / 3.0L, n);
  integral /= expected;
  integral.diagonal().array() -= 1.0L;
  return static_cast<double>(integral.norm() / std::sqrt(static_cast<long double>(integral.rows())));
}

}  // namespace rgfree
