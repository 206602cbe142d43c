#include "rgfree/model.hpp"

#include "rgfree/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace rgfree {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void require_finite(double v, const char* name) {
  if (!std::isfinite(v)) throw ModelError(std::string("parameter '") + name + "' is not finite");
}

}  // namespace

void validate(const ModelSpec& spec) {
  const int n = spec.n_spins();
  if (n < 2) throw ModelError("model needs at least 2 spins, got " + std::to_string(n));
  if (n > 30) throw ModelError("model with " + std::to_string(n) + " spins exceeds the 30-spin limit");

  require_finite(spec.g, "g");
  require_finite(spec.gamma, "gamma");
  require_finite(spec.lambda, "lambda");
  require_finite(spec.alpha_x, "alpha_x");
  require_finite(spec.beta_x, "beta_x");
  require_finite(spec.alpha_y, "alpha_y");
  require_finite(spec.beta_y, "beta_y");

  double max_abs = 0.0;
  for (int i = 0; i < n; ++i) {
    const double e = spec.epsilons[i];
    if (!std::isfinite(e)) throw ModelError("epsilon " + std::to_string(i + 1) + " is not finite");
    max_abs = std::max(max_abs, std::abs(e));
  }

  const double min_gap = kDuplicateEpsilonTolerance * max_abs;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (std::abs(spec.epsilons[i] - spec.epsilons[j]) <= min_gap) {
        throw ModelError("duplicate epsilons: spins " + std::to_string(i + 1) + " and " +
                         std::to_string(j + 1) + " both have epsilon " +
                         fmt17(spec.epsilons[i]));
      }
    }
  }

  for (int i = 0; i < n; ++i) {
    const double e = spec.epsilons[i];
    if (!(spec.alpha_x * e + spec.beta_x > 0.0)) {
      throw ModelError("alpha_x*eps+beta_x must be positive; spin " + std::to_string(i + 1) +
                       " gives " + fmt17(spec.alpha_x * e + spec.beta_x));
    }
    if (!(spec.alpha_y * e + spec.beta_y > 0.0)) {
      throw ModelError("alpha_y*eps+beta_y must be positive; spin " + std::to_string(i + 1) +
                       " gives " + fmt17(spec.alpha_y * e + spec.beta_y));
    }
  }
}

template <typename T>
T BasicCouplings<T>::scale() const {
  T s = 1;
  s = std::max(s, Bx.cwiseAbs().maxCoeff());
  s = std::max(s, By.cwiseAbs().maxCoeff());
  s = std::max(s, X.cwiseAbs().maxCoeff());
  s = std::max(s, Y.cwiseAbs().maxCoeff());
  s = std::max(s, Z.cwiseAbs().maxCoeff());
  return s;
}

template struct BasicCouplings<double>;
template struct BasicCouplings<long double>;

namespace {

template <typename T>
BasicCouplings<T> build_as(const ModelSpec& spec) {
  validate(spec);
  using C = BasicCouplings<T>;
  const int n = spec.n_spins();

  C c;
  c.n = n;
  c.g = spec.g;
  c.eps.resize(n);
  c.Fx.resize(n);
  c.Fy.resize(n);
  for (int i = 0; i < n; ++i) {
    c.eps(i) = spec.epsilons[static_cast<std::size_t>(i)];
    c.Fx(i) = std::sqrt(static_cast<T>(spec.alpha_x) * c.eps(i) + static_cast<T>(spec.beta_x));
    c.Fy(i) = std::sqrt(static_cast<T>(spec.alpha_y) * c.eps(i) + static_cast<T>(spec.beta_y));
  }

  c.Bx = static_cast<T>(spec.gamma) * c.Fx.cwiseInverse();
  c.By = static_cast<T>(spec.lambda) * c.Fy.cwiseInverse();
  c.Bz = C::Vector::Ones(n);

  c.X = C::Matrix::Zero(n, n);
  c.Y = C::Matrix::Zero(n, n);
  c.Z = C::Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const T inv_gap = 1 / (c.eps(i) - c.eps(j));
      c.X(i, j) = c.g * c.Fx(i) * c.Fy(j) * inv_gap;
      c.Y(i, j) = c.g * c.Fx(j) * c.Fy(i) * inv_gap;
      c.Z(i, j) = c.g * c.Fx(j) * c.Fy(j) * inv_gap;
    }
  }
  c.Gamma = 2 * c.Z;

  c.K.resize(n);
  for (int i = 0; i < n; ++i) {
    T k = c.Bx(i) * c.Bx(i) + c.By(i) * c.By(i) + c.Bz(i) * c.Bz(i);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      k += c.X(i, j) * c.X(i, j) + c.Y(i, j) * c.Y(i, j) + c.Z(i, j) * c.Z(i, j);
    }
    c.K(i) = k;
  }
  return c;
}

}  // namespace

Couplings build_couplings(const ModelSpec& spec) { return build_as<double>(spec); }

ExtendedCouplings build_extended_couplings(const ModelSpec& spec) { return build_as<long double>(spec); }

ModelSpec xxz_spec(std::vector<double> epsilons, double g, double alpha, double beta,
                   double gamma, double lambda) {
  ModelSpec spec;
  spec.epsilons = std::move(epsilons);
  spec.g = g;
  spec.gamma = gamma;
  spec.lambda = lambda;
  spec.alpha_x = spec.alpha_y = alpha;
  spec.beta_x = spec.beta_y = beta;
  validate(spec);
  return spec;
}

ModelSpec xxx_spec(std::vector<double> epsilons, double g, double gamma, double lambda) {
  return xxz_spec(std::move(epsilons), g, 0.0, 1.0, gamma, lambda);
}

std::uint64_t spec_hash(const ModelSpec& spec) {
  std::ostringstream text;
  text << "n=" << spec.n_spins() << ";eps=";
  for (double e : spec.epsilons) text << fmt17(e) << ',';
  text << ";g=" << fmt17(spec.g) << ";gamma=" << fmt17(spec.gamma)
       << ";lambda=" << fmt17(spec.lambda) << ";ax=" << fmt17(spec.alpha_x)
       << ";bx=" << fmt17(spec.beta_x) << ";ay=" << fmt17(spec.alpha_y)
       << ";by=" << fmt17(spec.beta_y);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text.str()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string spec_hash_hex(const ModelSpec& spec) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(spec_hash(spec)));
  return buf;
}

double k_at_zero_coupling(const ModelSpec& spec, int i) {
  const double fx2 = spec.alpha_x * spec.epsilons[i] + spec.beta_x;
  const double fy2 = spec.alpha_y * spec.epsilons[i] + spec.beta_y;
  return spec.gamma * spec.gamma / fx2 + spec.lambda * spec.lambda / fy2 + 1.0;
}

}  // namespace rgfree
