#include "rgfree/bethe_solver.hpp"

#include "rgfree/errors.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

namespace rgfree {

std::string SignPattern::to_string() const {
  std::string s(static_cast<std::size_t>(n_), '0');
  for (int k = 0; k < n_; ++k) {
    if ((bits_ >> k) & 1U) s[static_cast<std::size_t>(k)] = '1';
  }
  return s;
}

SignPattern SignPattern::parse(const std::string& text) {
  if (text.empty() || text.size() > 31) throw ParseError("sign pattern must have 1..31 characters");
  std::uint32_t bits = 0;
  for (std::size_t k = 0; k < text.size(); ++k) {
    if (text[k] == '1') {
      bits |= 1U << k;
    } else if (text[k] != '0') {
      throw ParseError("sign pattern '" + text + "' must contain only 0 and 1");
    }
  }
  return SignPattern(static_cast<int>(text.size()), bits);
}

namespace {

// F(r) = r o r - Gamma r - K and its Jacobian diag(2r) - Gamma.
struct QuadraticSystem {
  const Eigen::MatrixXd& gamma;
  const Eigen::VectorXd& k;

  Eigen::VectorXd value(const Eigen::VectorXd& r) const {
    return r.cwiseProduct(r) - gamma * r - k;
  }
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& r) const {
    Eigen::MatrixXd j = -gamma;
    j.diagonal() = 2.0 * r;
    return j;
  }
};

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

double threshold_scale(const Eigen::VectorXd& r) {
  double s = 1.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) s *= std::max(1.0, 2.0 * std::abs(r(i)));
  return s;
}

enum class StepStatus { kConverged, kSingular, kDiverged };

struct CorrectorResult {
  StepStatus status = StepStatus::kDiverged;
  Eigen::VectorXd r;
  int iterations = 0;
  double min_relative_det = std::numeric_limits<double>::infinity();
};

// Newton corrector used inside continuation. Rejects anything that does not
// contract quickly, so a step that lands between paths is retried smaller.
CorrectorResult correct(const QuadraticSystem& sys, Eigen::VectorXd r, double tol,
                        double max_first_correction) {
  CorrectorResult out;
  double prev_step = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 8; ++it) {
    const Eigen::VectorXd f = sys.value(r);
    if (f.cwiseAbs().maxCoeff() < tol) {
      out.status = StepStatus::kConverged;
      out.r = std::move(r);
      return out;
    }
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(sys.jacobian(r));
    const double rel_det = std::abs(lu.determinant()) / threshold_scale(r);
    out.min_relative_det = std::min(out.min_relative_det, rel_det);
    if (rel_det < 1e-10) {
      out.status = StepStatus::kSingular;
      return out;
    }
    const Eigen::VectorXd delta = lu.solve(f);
    const double step = delta.cwiseAbs().maxCoeff();
    if (it == 0 && step > max_first_correction) return out;
    if (it > 0 && step > 0.5 * prev_step && step > 1e3 * tol) return out;
    prev_step = step;
    r -= delta;
    ++out.iterations;
  }
  return out;
}

// Near a coalescence of two roots the equations amplify ulp-level errors in
// Gamma and K by many orders of magnitude, so the last Newton steps run in
// long double against couplings rebuilt in long double.
Eigen::VectorXd extended_polish(const ModelSpec& spec, const Eigen::VectorXd& start) {
  return extended_newton(build_extended_couplings(spec), start.cast<long double>()).cast<double>();
}

struct PathResult {
  EigenvalueVector solution;
  long steps = 0;
  long rejected = 0;
  long newton = 0;
  double min_relative_det = std::numeric_limits<double>::infinity();
};

struct ContinuationData {
  ModelSpec spec;
  Couplings target;
  Eigen::MatrixXd gamma_unit;  // Gamma at g = 1
  Eigen::VectorXd k0;          // K at g = 0
  Eigen::VectorXd k2;          // K(g) = k0 + g^2 k2
  double r_scale = 1.0;        // max(1, sqrt(max K(g_target)))
};

PathResult track_path(const ContinuationData& d, SignPattern pattern, int initial_steps,
                      const HomotopyOptions& opt) {
  const int n = d.target.n;
  const double g_target = d.spec.g;
  PathResult out;

  Eigen::VectorXd r(n);
  for (int i = 0; i < n; ++i) r(i) = pattern.sign(i) * std::sqrt(d.k0(i));

  const double h_max = g_target / initial_steps;
  const double h_floor = std::abs(g_target) * opt.step_floor;
  double h = h_max;
  double t = 0.0;
  int streak = 0;

  Eigen::MatrixXd gamma_t(n, n);
  Eigen::VectorXd k_t(n);
  while (t != g_target) {
    double h_eff = h;
    const bool last = std::abs(g_target - t) <= std::abs(h);
    if (last) h_eff = g_target - t;
    const double t_next = last ? g_target : t + h_eff;

    // Tangent predictor: J dr/dg = Gamma_unit r + 2 g k2.
    gamma_t = t * d.gamma_unit;
    k_t = d.k0 + t * t * d.k2;
    const QuadraticSystem here{gamma_t, k_t};
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(here.jacobian(r));
    const double rel_det = std::abs(lu.determinant()) / threshold_scale(r);
    out.min_relative_det = std::min(out.min_relative_det, rel_det);

    bool accepted = false;
    Eigen::VectorXd r_new;
    if (rel_det >= 1e-10) {
      const Eigen::VectorXd tangent = lu.solve(d.gamma_unit * r + 2.0 * t * d.k2);
      const Eigen::VectorXd predicted = r + h_eff * tangent;

      gamma_t = t_next * d.gamma_unit;
      k_t = d.k0 + t_next * t_next * d.k2;
      const QuadraticSystem there{gamma_t, k_t};
      const double tol =
          opt.tolerance > 0.0 ? opt.tolerance : 1e-12 * std::max(1.0, k_t.maxCoeff());
      const double move = (predicted - r).cwiseAbs().maxCoeff();
      const double max_first = 0.25 * move + 1e-6 * d.r_scale;
      CorrectorResult cr = correct(there, predicted, tol, max_first);
      out.newton += cr.iterations;
      out.min_relative_det = std::min(out.min_relative_det, cr.min_relative_det);
      if (cr.status == StepStatus::kConverged) {
        accepted = true;
        r_new = std::move(cr.r);
      }
    }

    if (accepted) {
      ++out.steps;
      t = t_next;
      r = std::move(r_new);
      if (++streak >= 3 && std::abs(h) < std::abs(h_max)) {
        h = std::abs(2.0 * h) > std::abs(h_max) ? h_max : 2.0 * h;
        streak = 0;
      }
    } else {
      ++out.rejected;
      streak = 0;
      h *= 0.5;
      if (std::abs(h) < h_floor) {
        throw ContinuationError("continuation failed for sign pattern " + pattern.to_string() +
                                " at g = " + std::to_string(t) + " (step below floor)");
      }
    }
  }

  // Polish against the exact target couplings.
  const QuadraticSystem final_sys{d.target.Gamma, d.target.K};
  const double tol =
      opt.tolerance > 0.0 ? opt.tolerance : default_newton_tolerance(d.target);
  CorrectorResult cr = correct(final_sys, r, tol, std::numeric_limits<double>::infinity());
  if (cr.status == StepStatus::kConverged) r = std::move(cr.r);
  out.newton += cr.iterations;
  r = extended_polish(d.spec, r);

  out.solution.r = to_std(r);
  out.solution.residual = bethe_residual(out.solution.r, d.target);
  out.solution.sign_pattern = pattern;
  out.solution.g_reached = t;
  return out;
}

template <typename Fn>
void run_indexed(std::size_t count, int threads, Fn&& fn) {
  unsigned workers = threads > 0 ? static_cast<unsigned>(threads) : std::thread::hardware_concurrency();
  workers = std::max(1U, std::min<unsigned>(workers, static_cast<unsigned>(count)));
  std::vector<std::exception_ptr> errors(count);
  auto body = [&](unsigned w) {
    for (std::size_t k = w; k < count; k += workers) {
      try {
        fn(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    body(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body, w);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Index pairs (a, b) of solutions closer than `tol` in the infinity norm.
std::vector<std::pair<std::size_t, std::size_t>> close_pairs(
    const std::vector<EigenvalueVector>& sols, double tol) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t a = 0; a < sols.size(); ++a) {
    for (std::size_t b = a + 1; b < sols.size(); ++b) {
      double dist = 0.0;
      for (std::size_t i = 0; i < sols[a].r.size(); ++i) {
        dist = std::max(dist, std::abs(sols[a].r[i] - sols[b].r[i]));
      }
      if (dist <= tol) out.emplace_back(a, b);
    }
  }
  return out;
}

}  // namespace

double bethe_residual(const std::vector<double>& r, const Couplings& c) {
  double worst = 0.0;
  for (int i = 0; i < c.n; ++i) {
    double v = r[i] * r[i] - c.K(i);
    for (int j = 0; j < c.n; ++j) {
      if (j != i) v -= c.Gamma(i, j) * r[j];
    }
    worst = std::max(worst, std::abs(v));
  }
  return worst;
}

double default_newton_tolerance(const Couplings& c) {
  return 1e-12 * std::max(1.0, c.K.maxCoeff());
}

double jacobian_singularity_threshold(const std::vector<double>& r) {
  return 1e-10 * threshold_scale(Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size())));
}

SolutionSet g_zero_solutions(const ModelSpec& spec) {
  validate(spec);
  ModelSpec free_spec = spec;
  free_spec.g = 0.0;
  const Couplings c = build_couplings(free_spec);
  const int n = spec.n_spins();

  SolutionSet set;
  set.n_spins = n;
  set.g = 0.0;
  set.spec_hash = rgfree::spec_hash(spec);
  const std::uint32_t count = 1U << n;
  set.solutions.reserve(count);
  for (std::uint32_t bits = 0; bits < count; ++bits) {
    EigenvalueVector ev;
    ev.sign_pattern = SignPattern(n, bits);
    ev.r.resize(n);
    for (int i = 0; i < n; ++i) ev.r[i] = ev.sign_pattern.sign(i) * std::sqrt(c.K(i));
    ev.residual = bethe_residual(ev.r, c);
    ev.g_reached = 0.0;
    set.solutions.push_back(std::move(ev));
  }
  return set;
}

NewtonOutcome newton_refine(const EigenvalueVector& start, const Couplings& c, double tol,
                            int max_iter) {
  const QuadraticSystem sys{c.Gamma, c.K};
  Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(start.r.data(), c.n);
  NewtonOutcome out;
  out.result = start;
  for (;;) {
    const Eigen::VectorXd f = sys.value(r);
    if (f.cwiseAbs().maxCoeff() < tol) break;
    if (out.iterations >= max_iter) {
      throw ConvergenceError("Newton refinement did not converge in " + std::to_string(max_iter) +
                             " iterations");
    }
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(sys.jacobian(r));
    if (std::abs(lu.determinant()) < 1e-10 * threshold_scale(r)) {
      throw SingularJacobianError("singular Jacobian in Newton refinement (near-degenerate solution)");
    }
    r -= lu.solve(f);
    ++out.iterations;
  }
  out.result.r = to_std(r);
  out.result.residual = bethe_residual(out.result.r, c);
  out.result.g_reached = c.g;
  return out;
}

SolutionSet homotopy_solve(const ModelSpec& spec, const HomotopyOptions& opt) {
  validate(spec);
  if (opt.initial_steps < 1) throw InputError("initial step count must be positive");
  if (spec.g == 0.0) return g_zero_solutions(spec);

  ContinuationData d;
  d.spec = spec;
  d.target = build_couplings(spec);
  ModelSpec unit = spec;
  unit.g = 1.0;
  const Couplings cu = build_couplings(unit);
  ModelSpec free_spec = spec;
  free_spec.g = 0.0;
  const Couplings c0 = build_couplings(free_spec);
  d.gamma_unit = cu.Gamma;
  d.k0 = c0.K;
  d.k2 = cu.K - c0.K;
  d.r_scale = std::max(1.0, std::sqrt(d.target.K.maxCoeff()));

  const int n = spec.n_spins();
  const std::size_t count = std::size_t{1} << n;
  std::vector<PathResult> paths(count);
  std::vector<int> schedule(count, opt.initial_steps);

  run_indexed(count, opt.threads, [&](std::size_t k) {
    paths[k] = track_path(d, SignPattern(n, static_cast<std::uint32_t>(k)), schedule[k], opt);
  });

  SolutionSet set;
  set.n_spins = n;
  set.g = spec.g;
  set.spec_hash = rgfree::spec_hash(spec);

  const double dedup_tol = opt.deflation_tolerance * d.r_scale;
  for (int refinement = 0;; ++refinement) {
    std::vector<EigenvalueVector> sols;
    sols.reserve(count);
    for (const auto& p : paths) sols.push_back(p.solution);
    const auto collisions = close_pairs(sols, dedup_tol);
    if (collisions.empty()) {
      set.solutions = std::move(sols);
      set.diagnostics.schedule_refinements = refinement;
      break;
    }
    if (refinement >= opt.max_refinements) {
      const auto& [a, b] = collisions.front();
      throw ContinuationError("suspected path crossing: sign patterns " +
                              sols[a].sign_pattern.to_string() + " and " +
                              sols[b].sign_pattern.to_string() + " converged to the same solution");
    }
    std::vector<std::size_t> redo;
    for (const auto& [a, b] : collisions) {
      redo.push_back(a);
      redo.push_back(b);
    }
    std::sort(redo.begin(), redo.end());
    redo.erase(std::unique(redo.begin(), redo.end()), redo.end());
    run_indexed(redo.size(), opt.threads, [&](std::size_t idx) {
      const std::size_t k = redo[idx];
      schedule[k] *= 4;
      paths[k] = track_path(d, SignPattern(n, static_cast<std::uint32_t>(k)), schedule[k], opt);
    });
  }

  auto& diag = set.diagnostics;
  diag.min_relative_jacobian_det = std::numeric_limits<double>::infinity();
  for (const auto& p : paths) {
    diag.total_steps += p.steps;
    diag.rejected_steps += p.rejected;
    diag.newton_iterations += p.newton;
    diag.min_relative_jacobian_det = std::min(diag.min_relative_jacobian_det, p.min_relative_det);
  }
  return set;
}

SumRuleResiduals sum_rule_residuals(const std::vector<std::vector<double>>& rows,
                                    const Couplings& c) {
  SumRuleResiduals out;
  const double count = static_cast<double>(rows.size());
  const double r_scale = std::sqrt(std::max(1.0, c.K.maxCoeff()));
  for (int i = 0; i < c.n; ++i) {
    double s1 = 0.0, s2 = 0.0;
    for (const auto& row : rows) {
      s1 += row[i];
      s2 += row[i] * row[i];
    }
    out.linear = std::max(out.linear, std::abs(s1) / (count * r_scale));
    out.quadratic = std::max(out.quadratic, std::abs(s2 - count * c.K(i)) / (count * c.K(i)));
  }
  return out;
}

SumRuleResiduals sum_rule_residuals(const SolutionSet& set, const Couplings& c) {
  std::vector<std::vector<double>> rows;
  rows.reserve(set.solutions.size());
  for (const auto& s : set.solutions) rows.push_back(s.r);
  return sum_rule_residuals(rows, c);
}

double min_pairwise_distance(const SolutionSet& set) {
  double best = std::numeric_limits<double>::infinity();
  const auto& s = set.solutions;
  for (std::size_t a = 0; a < s.size(); ++a) {
    for (std::size_t b = a + 1; b < s.size(); ++b) {
      double dist = 0.0;
      for (std::size_t i = 0; i < s[a].r.size(); ++i) dist = std::max(dist, std::abs(s[a].r[i] - s[b].r[i]));
      best = std::min(best, dist);
    }
  }
  return best;
}

long double extended_residual(const ExtendedCouplings& x, const ExtendedCouplings::Vector& r) {
  return (r.cwiseProduct(r) - x.Gamma * r - x.K).cwiseAbs().maxCoeff();
}

ExtendedCouplings::Vector extended_newton(const ExtendedCouplings& x,
                                          const ExtendedCouplings::Vector& start, int max_iter) {
  using Vector = ExtendedCouplings::Vector;
  using Matrix = ExtendedCouplings::Matrix;
  Vector r = start;
  Vector f = r.cwiseProduct(r) - x.Gamma * r - x.K;
  long double best = f.cwiseAbs().maxCoeff();
  Vector best_r = r;
  for (int it = 0; it < max_iter && best > 0.0L; ++it) {
    Matrix j = -x.Gamma;
    j.diagonal() = 2.0L * r;
    const Eigen::PartialPivLU<Matrix> lu(j);
    const long double det = lu.determinant();
    if (!std::isfinite(det) || det == 0.0L) break;
    r -= lu.solve(f);
    f = r.cwiseProduct(r) - x.Gamma * r - x.K;
    const long double res = f.cwiseAbs().maxCoeff();
    if (!(res < best)) {
      if (it > 2) break;
      continue;
    }
    best = res;
    best_r = r;
  }
  return best_r;
}

}  // namespace rgfree
