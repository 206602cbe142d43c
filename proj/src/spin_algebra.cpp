#include "rgfree/spin_algebra.hpp"

#include "rgfree/errors.hpp"

#include <cmath>
#include <string>

namespace rgfree {

StateVector::StateVector(int n_spins)
    : n_spins_(n_spins), amps_(Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(hilbert_dim(n_spins)))) {}

StateVector::StateVector(int n_spins, Eigen::VectorXcd amplitudes)
    : n_spins_(n_spins), amps_(std::move(amplitudes)) {
  if (static_cast<std::size_t>(amps_.size()) != hilbert_dim(n_spins)) {
    throw DimensionError("state vector of length " + std::to_string(amps_.size()) +
                         " does not match 2^" + std::to_string(n_spins));
  }
}

StateVector StateVector::basis(int n_spins, std::size_t index) {
  StateVector v(n_spins);
  if (index >= v.dim()) throw DimensionError("basis index out of range");
  v[index] = 1.0;
  return v;
}

StateVector StateVector::uniform(int n_spins) {
  StateVector v(n_spins);
  v.amps_.setConstant(1.0 / std::sqrt(static_cast<double>(v.dim())));
  return v;
}

StateVector unit_normalized(const StateVector& v) {
  const double nrm = v.norm();
  if (!(nrm > 0.0)) throw NumericalError("cannot normalize a zero vector");
  Eigen::VectorXcd a = v.amplitudes() / nrm;
  const double max_mod = a.cwiseAbs().maxCoeff();
  for (Eigen::Index b = 0; b < a.size(); ++b) {
    if (std::abs(a(b)) > 1e-8 * max_mod) {
      const Complex phase = std::conj(a(b)) / std::abs(a(b));
      a *= phase;
      a(b) = std::abs(a(b));
      break;
    }
  }
  return StateVector(v.n_spins(), std::move(a));
}

template <typename T>
BasicChargeOperator<T>::BasicChargeOperator(const BasicCouplings<T>& c, int index)
    : index_(index), n_(c.n) {
  if (index < 0 || index >= c.n) throw DimensionError("charge index out of range");
  bx_ = c.Bx(index);
  by_ = c.By(index);
  bz_ = c.Bz(index);
  pairs_.reserve(static_cast<std::size_t>(c.n - 1));
  for (int j = 0; j < c.n; ++j) {
    if (j == index) continue;
    pairs_.push_back({j, c.X(index, j), c.Y(index, j), c.Z(index, j)});
  }
}

template <typename T>
void BasicChargeOperator<T>::apply(std::span<const Scalar> in, std::span<Scalar> out) const {
  const std::size_t dim = hilbert_dim(n_);
  if (in.size() != dim || out.size() != dim) {
    throw DimensionError("apply_charge: vector length does not match 2^" + std::to_string(n_));
  }
  const std::size_t mi = std::size_t{1} << index_;
  const Scalar plus_i(0, by_);
  for (std::size_t b = 0; b < dim; ++b) {
    const bool up_i = (b & mi) != 0;
    const T si = up_i ? 1 : -1;

    T diag = bz_ * si;
    Scalar acc(0, 0);
    for (const PairTerm& t : pairs_) {
      const std::size_t mj = std::size_t{1} << t.j;
      const bool up_j = (b & mj) != 0;
      diag += up_i == up_j ? t.zz : -t.zz;
      // s^y s^y on a pair contributes -1 for aligned spins, +1 for anti-aligned.
      const T flip = up_i == up_j ? t.xx - t.yy : t.xx + t.yy;
      acc += flip * in[b ^ mi ^ mj];
    }
    const Scalar src = in[b ^ mi];
    acc += bx_ * src;
    acc += (up_i ? plus_i : -plus_i) * src;
    acc += diag * in[b];
    out[b] = acc;
  }
}

template class BasicChargeOperator<double>;
template class BasicChargeOperator<long double>;

StateVector apply_charge(const ChargeOperator& op, const StateVector& v) {
  if (v.n_spins() != op.n_spins()) {
    throw DimensionError("apply_charge: state has " + std::to_string(v.n_spins()) +
                         " spins, operator has " + std::to_string(op.n_spins()));
  }
  StateVector out(op.n_spins());
  op.apply(v.span(), out.span());
  return out;
}

namespace {

void check_cap(int n, int cap) {
  if (n > cap) {
    throw DenseCapError("dense materialization needs N <= " + std::to_string(cap) + ", got N = " +
                        std::to_string(n));
  }
}

// Columns of op * m, computed matrix-free.
Eigen::MatrixXcd apply_to_columns(const ChargeOperator& op, const Eigen::MatrixXcd& m) {
  Eigen::MatrixXcd out(m.rows(), m.cols());
  const auto rows = static_cast<std::size_t>(m.rows());
  for (Eigen::Index col = 0; col < m.cols(); ++col) {
    op.apply({m.col(col).data(), rows}, {out.col(col).data(), rows});
  }
  return out;
}

}  // namespace

Eigen::MatrixXcd dense_charge(const ChargeOperator& op, int cap) {
  check_cap(op.n_spins(), cap);
  const auto dim = static_cast<Eigen::Index>(hilbert_dim(op.n_spins()));
  Eigen::MatrixXcd m(dim, dim);
  std::vector<Complex> e(static_cast<std::size_t>(dim), Complex(0.0, 0.0));
  for (Eigen::Index b = 0; b < dim; ++b) {
    e[b] = 1.0;
    op.apply(e, {m.col(b).data(), static_cast<std::size_t>(dim)});
    e[b] = 0.0;
  }
  return m;
}

double commutator_residual(const Couplings& c, int i, int j, int cap) {
  check_cap(c.n, cap);
  const ChargeOperator ri(c, i), rj(c, j);
  const Eigen::MatrixXcd mi = dense_charge(ri, cap);
  const Eigen::MatrixXcd mj = dense_charge(rj, cap);
  const Eigen::MatrixXcd comm = apply_to_columns(ri, mj) - apply_to_columns(rj, mi);
  return comm.norm() / (mi.norm() * mj.norm());
}

double quadratic_operator_residual(const Couplings& c, int i, int cap) {
  check_cap(c.n, cap);
  const ChargeOperator ri(c, i);
  const Eigen::MatrixXcd mi = dense_charge(ri, cap);
  const Eigen::MatrixXcd square = apply_to_columns(ri, mi);
  Eigen::MatrixXcd rhs = c.K(i) * Eigen::MatrixXcd::Identity(mi.rows(), mi.cols());
  for (int j = 0; j < c.n; ++j) {
    if (j == i) continue;
    rhs += c.Gamma(i, j) * dense_charge(ChargeOperator(c, j), cap);
  }
  return (square - rhs).norm() / square.norm();
}

}  // namespace rgfree
