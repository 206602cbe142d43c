#include "rgfree/commands.hpp"

#include "rgfree/bethe_solver.hpp"
#include "rgfree/errors.hpp"
#include "rgfree/io.hpp"
#include "rgfree/random_spec.hpp"

#include <sys/resource.h>

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace rgfree {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}

long peak_rss_kb() {
  rusage usage{};
  if (getrusage(RUSAGE_SELF, &usage) != 0) return -1;
  return usage.ru_maxrss;
}

// Pass/fail lines in a fixed layout.
class Scoreboard {
 public:
  explicit Scoreboard(std::ostream& out) : out_(out) {}

  void record(const std::string& name, double value, double limit) {
    const bool pass = value < limit;
    failures_ += pass ? 0 : 1;
    out_ << (pass ? "PASS  " : "FAIL  ") << name << "  " << sci(value) << " < " << sci(limit) << "\n";
  }
  void record_exact(const std::string& name, bool pass, const std::string& detail) {
    failures_ += pass ? 0 : 1;
    out_ << (pass ? "PASS  " : "FAIL  ") << name << "  " << detail << "\n";
  }
  void skip(const std::string& name, const std::string& why) {
    out_ << "SKIP  " << name << "  skipped (" << why << ")\n";
  }
  int failures() const { return failures_; }

 private:
  std::ostream& out_;
  int failures_ = 0;
};

std::vector<std::vector<double>> solution_rows(const SolutionSet& set) {
  std::vector<std::vector<double>> rows;
  rows.reserve(set.solutions.size());
  for (const auto& s : set.solutions) rows.push_back(s.r);
  return rows;
}

HomotopyOptions homotopy_options(const RunConfig& config) {
  HomotopyOptions opt;
  opt.initial_steps = config.g_steps;
  opt.threads = config.threads;
  return opt;
}

StateVector load_vacuum(const RunConfig& config, int n) {
  if (config.vacuum == "uniform") return StateVector::uniform(n);
  StateFile file = parse_state(read_text_file(config.vacuum));
  if (file.state.n_spins() != n) {
    throw DimensionError("vacuum file has " + std::to_string(file.state.n_spins()) +
                         " spins, model has " + std::to_string(n));
  }
  if (!(file.state.norm() > 0.0)) throw InputError("vacuum state is the zero vector");
  return file.state;
}

// Coefficients of the four-spin expansion written out term by term:
// included-set mask -> coefficient.
std::vector<std::pair<IndexMask, double>> four_spin_reference(const Couplings& c) {
  auto f = [&](int k) { return c.Fx(k) * c.Fy(k); };
  auto inv2 = [&](int a, int b) {
    const double d = c.eps(a) - c.eps(b);
    return 1.0 / (d * d);
  };
  const double g2 = c.g * c.g;
  std::vector<std::pair<IndexMask, double>> ref;
  ref.emplace_back(0b1111, 1.0);
  ref.emplace_back(0b0011, 4 * g2 * f(2) * f(3) * inv2(2, 3));
  ref.emplace_back(0b0101, 4 * g2 * f(1) * f(3) * inv2(1, 3));
  ref.emplace_back(0b1001, 4 * g2 * f(1) * f(2) * inv2(1, 2));
  ref.emplace_back(0b0110, 4 * g2 * f(0) * f(3) * inv2(0, 3));
  ref.emplace_back(0b1010, 4 * g2 * f(0) * f(2) * inv2(0, 2));
  ref.emplace_back(0b1100, 4 * g2 * f(0) * f(1) * inv2(0, 1));
  double pref = 1.0;
  for (int k = 0; k < 4; ++k) pref *= 2 * c.g * f(k);
  ref.emplace_back(0b0000, pref * (inv2(0, 1) * inv2(2, 3) + inv2(0, 2) * inv2(1, 3) +
                                   inv2(0, 3) * inv2(1, 2)));
  return ref;
}

}  // namespace

Command parse_command(const std::string& name) {
  if (name == "validate") return Command::kValidate;
  if (name == "solve") return Command::kSolve;
  if (name == "project") return Command::kProject;
  if (name == "check") return Command::kCheck;
  if (name == "bench") return Command::kBench;
  throw InputError("unknown command '" + name + "'");
}

void check_config(const RunConfig& config) {
  if (config.command != Command::kBench && config.model_path.empty()) {
    throw InputError("--model is required for this command");
  }
  if (config.tol && !(*config.tol > 0.0)) throw InputError("--tol must be positive");
  if (config.g_steps < 1) throw InputError("--g-steps must be positive");
  if (config.dense_cap < 1) throw InputError("--dense-cap must be positive");
  if (config.bench_lo < 2 || config.bench_hi < config.bench_lo || config.bench_hi > 20) {
    throw InputError("--bench-range must satisfy 2 <= lo <= hi <= 20");
  }
  if (config.bench_repeats < 1) throw InputError("--bench-repeats must be positive");
  if (config.state != "all") SignPattern::parse(config.state);
}

int cmd_validate(const RunConfig& config, std::ostream& out) {
  const ModelSpec spec = load_model_config(config.model_path);
  const Couplings c = build_couplings(spec);
  const double limit = config.tol.value_or(1e-12);
  out << "model: N = " << c.n << ", g = " << format_double(c.g)
      << ", spec_hash = " << spec_hash_hex(spec) << "\n";

  Scoreboard board(out);
  if (c.n > config.dense_cap) {
    board.skip("commutators", "N above dense cap");
    board.skip("quadratic relations", "N above dense cap");
    return kExitOk;
  }
  for (int i = 0; i < c.n; ++i) {
    for (int j = i + 1; j < c.n; ++j) {
      board.record("commutator R" + std::to_string(i + 1) + ",R" + std::to_string(j + 1),
                   commutator_residual(c, i, j, config.dense_cap), limit);
    }
  }
  for (int i = 0; i < c.n; ++i) {
    board.record("quadratic relation R" + std::to_string(i + 1),
                 quadratic_operator_residual(c, i, config.dense_cap), limit);
  }
  return board.failures() == 0 ? kExitOk : kExitFailure;
}

int cmd_solve(const RunConfig& config, std::ostream& out) {
  const ModelSpec spec = load_model_config(config.model_path);
  const Couplings c = build_couplings(spec);

  const auto start = Clock::now();
  const SolutionSet set = homotopy_solve(spec, homotopy_options(config));
  const double wall = ms_since(start);

  std::filesystem::create_directories(config.out_dir);
  const auto path = config.out_dir / "spectrum.txt";
  write_file_atomic(path, spectrum_text(spectrum_from_solutions(set, spec)));

  double worst = 0.0;
  for (const auto& s : set.solutions) worst = std::max(worst, s.residual);
  const SumRuleResiduals sums = sum_rule_residuals(set, c);
  const double limit = config.tol.value_or(1e-10 * std::max(1.0, c.K.maxCoeff()));

  out << "solutions: " << set.solutions.size() << " written to " << path.string() << "\n";
  out << "wall time: " << wall << " ms\n";
  out << "continuation: " << set.diagnostics.total_steps << " steps, "
      << set.diagnostics.rejected_steps << " rejected, " << set.diagnostics.newton_iterations
      << " Newton iterations\n";
  Scoreboard board(out);
  board.record("worst residual", worst, limit);
  board.record("sum rule sum_n r_i", sums.linear, 1e-9);
  board.record("sum rule sum_n r_i^2 = 2^N K_i", sums.quadratic, 1e-9);
  return board.failures() == 0 ? kExitOk : kExitFailure;
}

int cmd_project(const RunConfig& config, std::ostream& out) {
  const ModelSpec spec = load_model_config(config.model_path);
  const Couplings c = build_couplings(spec);
  const std::string hash = spec_hash_hex(spec);

  SpectrumFile spectrum;
  if (config.spectrum_path) {
    spectrum = parse_spectrum(read_text_file(*config.spectrum_path));
    if (spectrum.spec_hash != hash) {
      throw InputError("spectrum file spec_hash " + spectrum.spec_hash +
                       " does not match the model (" + hash + ")");
    }
  } else {
    spectrum = spectrum_from_solutions(homotopy_solve(spec, homotopy_options(config)), spec);
  }

  std::vector<const SpectrumRow*> selected;
  for (const auto& row : spectrum.rows) {
    if (config.state == "all" || row.label == config.state) selected.push_back(&row);
  }
  if (selected.empty()) throw InputError("no state with sign pattern '" + config.state + "'");

  const StateVector omega = load_vacuum(config, c.n);
  const ProjectorEngine engine(spec, config.dense_cap);
  const double limit = config.tol.value_or(1e-8);
  std::filesystem::create_directories(config.out_dir);

  int failures = 0;
  int orthogonal = 0;
  for (const SpectrumRow* row : selected) {
    try {
      const ProjectionReport rep = engine.project_and_normalize(row->r, omega);
      const double worst = *std::max_element(rep.eigen_residuals.begin(), rep.eigen_residuals.end());
      const bool pass = worst < limit && rep.idempotency_residual < limit;
      failures += pass ? 0 : 1;

      write_file_atomic(config.out_dir / ("state_" + row->label + ".txt"),
                        state_text({hash, row->label, unit_normalized(rep.projected)}));

      std::ostringstream diag;
      diag << "# rgfree projector diagnostics\n";
      diag << "spec_hash " << hash << "\n";
      diag << "label " << row->label << "\n";
      diag << "on_shell " << (rep.on_shell ? "yes" : "no") << "\n";
      diag << "bethe_residual " << format_double(rep.bethe_residual) << "\n";
      diag << "refinement_shift " << format_double(rep.refinement_shift) << "\n";
      diag << "norm_det " << format_double(rep.norm_det) << "\n";
      diag << "vacuum_overlap " << format_double(rep.projected.norm()) << "\n";
      diag << "idempotency_residual " << format_double(rep.idempotency_residual) << "\n";
      for (int i = 0; i < c.n; ++i) {
        diag << "eigen_residual " << (i + 1) << ' '
             << format_double(rep.eigen_residuals[static_cast<std::size_t>(i)]) << "\n";
      }
      write_file_atomic(config.out_dir / ("state_" + row->label + ".diag"), diag.str());

      out << (pass ? "PASS  " : "FAIL  ") << row->label << "  eigen " << sci(worst)
          << "  idempotency " << sci(rep.idempotency_residual) << "  N(r) "
          << sci(rep.norm_det) << (rep.on_shell ? "" : "  (warning: off-shell input)") << "\n";
    } catch (const VacuumOrthogonalError& e) {
      ++failures;
      ++orthogonal;
      out << "FAIL  " << row->label << "  " << e.what() << "\n";
    } catch (const NormalizationError& e) {
      ++failures;
      out << "FAIL  " << row->label << "  " << e.what() << "\n";
    }
  }
  out << selected.size() - static_cast<std::size_t>(failures) << "/" << selected.size()
      << " states passed\n";
  if (orthogonal > 0) {
    out << "hint: " << orthogonal
        << " state(s) are orthogonal to the vacuum. With a z-only field the eigenstates have "
           "fixed magnetization (XXZ/XXX) or fixed magnetization parity (XYZ); use a vacuum with "
           "weight in every sector, e.g. --vacuum uniform.\n";
  }
  return failures == 0 ? kExitOk : kExitFailure;
}

int cmd_check(const RunConfig& config, std::ostream& out) {
  const ModelSpec spec = load_model_config(config.model_path);
  const Couplings c = build_couplings(spec);
  const ProjectorEngine engine(spec, config.dense_cap);
  const int n = c.n;
  Scoreboard board(out);
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  // Identity resolution.
  if (n <= kIdentityResolutionCap) {
    for (double a : {0.5, 1.0, 2.0}) {
      board.record("identity resolution a=" + format_double(a), engine.identity_resolution_residual(a),
                   config.tol.value_or(1e-10));
    }
  } else {
    board.skip("identity resolution", "N above 6");
  }

  // Pairing coefficients.
  if (n <= 8) {
    bool odd_zero = true;
    double worst = 0.0;
    for (std::size_t m = 0; m < (std::size_t{1} << n); ++m) {
      const auto mask = static_cast<IndexMask>(m);
      const double value = pairing_coefficient(mask, c);
      if (std::popcount(mask) & 1) {
        odd_zero = odd_zero && value == 0.0 && engine.pairing()[m] == 0.0;
        continue;
      }
      const double det = pairing_coefficient_by_determinant(mask, c);
      worst = std::max(worst, std::abs(value - det) / std::max(std::abs(value), 1e-300));
    }
    board.record_exact("pairing odd subsets vanish", odd_zero, odd_zero ? "exact zero" : "nonzero value");
    board.record("pairing sum vs determinant", worst, 1e-10);
  } else {
    board.skip("pairing coefficients", "N above 8");
  }

  if (n == 4) {
    const auto terms = expansion_terms(c);
    const auto ref = four_spin_reference(c);
    bool same_terms = terms.size() == ref.size();
    double worst = 0.0;
    for (const auto& [mask, value] : ref) {
      bool found = false;
      for (const auto& t : terms) {
        if (t.included != mask) continue;
        found = true;
        worst = std::max(worst, std::abs(t.coefficient - value) / std::max(std::abs(value), 1e-300));
      }
      same_terms = same_terms && found;
    }
    board.record_exact("four-spin expansion term set", same_terms,
                       std::to_string(terms.size()) + " terms");
    board.record("four-spin expansion coefficients", worst, 1e-12);
  }

  if (n > 8) {
    board.skip("spectrum, off-shell and projector checks", "N above 8");
    return board.failures() == 0 ? kExitOk : kExitFailure;
  }

  HomotopyOptions opt = homotopy_options(config);
  const SolutionSet set = homotopy_solve(spec, opt);
  const auto rows = solution_rows(set);
  const SumRuleResiduals sums = sum_rule_residuals(set, c);
  board.record("sum rule linear", sums.linear, 1e-9);
  board.record("sum rule quadratic", sums.quadratic, 1e-9);

  const SpectrumOracle oracle = diagonalize(c, config.seed, config.dense_cap);
  const SpectrumMatching match = match_spectra(rows, oracle.rows());
  board.record("spectrum vs exact diagonalization", match.max_abs_diff, 1e-8);

  // Off-shell coefficient vanishing between distinct on-shell vectors.
  double worst_off = 0.0, worst_diag = 0.0;
  for (std::size_t a = 0; a < rows.size(); ++a) {
    const double norm = scalar_norm_det(rows[a], c);
    for (std::size_t b = 0; b < rows.size(); ++b) {
      const double coef = offshell_coefficient(rows[a], rows[b], c);
      if (a == b) {
        worst_diag = std::max(worst_diag, std::abs(coef - norm) / std::abs(norm));
      } else {
        worst_off = std::max(worst_off, std::abs(coef) / std::abs(norm));
      }
    }
  }
  board.record("off-shell coefficient vanishing", worst_off, 1e-9);
  board.record("off-shell coefficient at n = m", worst_diag, 1e-12);

  // Projector theorem against the oracle, every state.
  const StateVector omega = StateVector::uniform(n);
  double worst_overlap = 0.0, worst_eigen = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const ProjectionReport rep = engine.project_and_normalize(rows[k], omega);
    worst_eigen = std::max(worst_eigen, *std::max_element(rep.eigen_residuals.begin(), rep.eigen_residuals.end()));
    const auto cc = crosscheck_projector(oracle, match.a_to_b[k], rep.projected);
    worst_overlap = std::max(worst_overlap, cc.overlap_defect);
  }
  board.record("projector overlap defect", worst_overlap, 1e-8);
  board.record("projector eigen-residuals", worst_eigen, 1e-8);

  // Strategy equivalence at one random point.
  std::vector<double> r(static_cast<std::size_t>(n));
  for (double& x : r) x = unit(rng);
  if (n <= config.dense_cap) {
    const StateVector tree = engine.apply(r, omega, Strategy::kSubsetTree);
    const StateVector dense = engine.apply(r, omega, Strategy::kDenseLaplace);
    board.record("subset-tree vs dense-laplace",
                 (tree.amplitudes() - dense.amplitudes()).norm() / dense.norm(), 1e-10);
  }

  // On-/off-shell products on a few states.
  if (n <= 6) {
    double worst_prod = 0.0;
    const std::size_t stride = std::max<std::size_t>(1, rows.size() / 8);
    for (std::size_t k = 0; k < rows.size(); k += stride) {
      const Eigen::MatrixXcd on = engine.normalized_projector(rows[k]);
      for (int trial = 0; trial < 2; ++trial) {
        for (double& x : r) x = 2.0 * unit(rng);
        const Eigen::MatrixXcd prod = engine.dense_projector(r) * on;
        const auto psi = oracle.eigenvectors.col(match.a_to_b[k]);
        const Eigen::MatrixXcd expected = offshell_coefficient(r, rows[k], c) * (psi * psi.adjoint());
        worst_prod = std::max(worst_prod, (prod - expected).norm() / std::max(1.0, expected.norm()));
      }
    }
    board.record("on/off-shell product", worst_prod, 1e-9);
  } else {
    board.skip("on/off-shell product", "N above 6");
  }

  out << (board.failures() == 0 ? "all checks passed" : std::to_string(board.failures()) + " check(s) failed")
      << "\n";
  return board.failures() == 0 ? kExitOk : kExitFailure;
}

int cmd_bench(const RunConfig& config, std::ostream& out) {
  std::ostringstream table;
  table << "N\tstage\tstrategy\twall_ms_mean\twall_ms_std\tpeak_rss_kb\n";
  auto emit = [&](int n, const char* stage, const char* strategy, const std::vector<double>& ms) {
    const double mean = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(ms.size());
    double var = 0.0;
    for (double v : ms) var += (v - mean) * (v - mean);
    const double sd = ms.size() > 1 ? std::sqrt(var / static_cast<double>(ms.size() - 1)) : 0.0;
    char line[160];
    std::snprintf(line, sizeof(line), "%d\t%s\t%s\t%.3f\t%.3f\t%ld\n", n, stage, strategy, mean, sd,
                  peak_rss_kb());
    table << line;
    out << line << std::flush;
  };

  out << "N\tstage\tstrategy\twall_ms_mean\twall_ms_std\tpeak_rss_kb\n";
  std::mt19937_64 rng(config.seed);
  for (int n = config.bench_lo; n <= config.bench_hi; ++n) {
    const ModelSpec spec = random_spec(n, {Anisotropy::kXYZ, true}, rng);
    const Couplings c = build_couplings(spec);

    std::vector<double> solve_ms;
    SolutionSet set;
    for (int rep = 0; rep < config.bench_repeats; ++rep) {
      const auto start = Clock::now();
      set = homotopy_solve(spec, homotopy_options(config));
      solve_ms.push_back(ms_since(start));
    }
    emit(n, "homotopy_solve", "-", solve_ms);

    const ProjectorEngine engine(spec, config.dense_cap);
    const StateVector omega = StateVector::uniform(n);
    const std::vector<double>& r = set.solutions.front().r;
    for (Strategy s : {Strategy::kSubsetTree, Strategy::kDenseLaplace}) {
      if (s == Strategy::kDenseLaplace && n > config.dense_cap) {
        const std::string line = std::to_string(n) + "\tapply_projector\tdense-laplace\tskipped\tskipped\t-\n";
        table << line;
        out << line;
        continue;
      }
      std::vector<double> ms;
      for (int rep = 0; rep < config.bench_repeats; ++rep) {
        const auto start = Clock::now();
        const StateVector v = engine.apply(r, omega, s);
        ms.push_back(ms_since(start));
        if (!(v.norm() >= 0.0)) throw NumericalError("projector produced NaN");
      }
      emit(n, "apply_projector", strategy_name(s), ms);
    }
  }
  std::filesystem::create_directories(config.out_dir);
  write_file_atomic(config.out_dir / "bench.tsv", table.str());
  return kExitOk;
}

int run_command(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    check_config(config);
    switch (config.command) {
      case Command::kValidate: return cmd_validate(config, out);
      case Command::kSolve: return cmd_solve(config, out);
      case Command::kProject: return cmd_project(config, out);
      case Command::kCheck: return cmd_check(config, out);
      case Command::kBench: return cmd_bench(config, out);
    }
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const NumericalError& e) {
    err << "failure: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  }
  return kExitInputError;
}

}  // namespace rgfree
