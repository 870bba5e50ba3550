#ifndef LEXINT_ANALYSIS_HPP
#define LEXINT_ANALYSIS_HPP

// Verification and benchmark harness: references, global error, empirical
// orders, equal-cost step calibration, figure sweeps and linear stability.

#include "lexint/catalog.hpp"
#include "lexint/integrate.hpp"
#include "lexint/matfun.hpp"
#include "lexint/systems.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace lexint {

/// Reference state as a function of time.
using ReferenceFn = std::function<Vector(double)>;

inline ReferenceFn circular_reference(double radius) {
  circular_frequency(radius);  // validates R
  return [radius](double t) { return circular_orbit_state(radius, t); };
}

/// Euclidean distance between the final state of a run and the reference at t.
inline double global_error(const RunRecord& run, const ReferenceFn& reference, double t) {
  if (run.times.empty()) throw std::invalid_argument("global_error: empty run");
  if (std::abs(run.final_time() - t) > 1e-12 * std::max(1.0, std::abs(t))) {
    throw std::invalid_argument(fmt::format("global_error: run ends at t={} but the error is requested at t={}",
                                            run.final_time(), t));
  }
  return (run.final_state() - reference(t)).norm();
}

/// Romberg table over TR-SLEX runs at h, h/2, ..., h/2^(levels-1). TR-SLEX is
/// symmetric, so its error expands in even powers of h.
struct RichardsonReference {
  Vector state;
  double estimated_error = 0.0;  ///< gap between the two best extrapolants
  std::vector<double> steps;
};

inline RichardsonReference richardson_reference(const Problem& problem, const Vector& x0, double t_end, double h,
                                                int levels = 4, const SolverSettings& solver = {}) {
  if (levels < 2) throw std::invalid_argument("richardson_reference: need at least 2 levels");
  const SchemeSpec trs = SchemeSpec::one_step(Kernel::TR, Anchor::SLEX);
  RichardsonReference out;
  std::vector<std::vector<Vector>> table;
  for (int k = 0; k < levels; ++k) {
    const double hk = h / std::pow(2.0, k);
    out.steps.push_back(hk);
    RunRecord rec = integrate(trs, problem, x0, hk, t_end, solver, {false});
    if (!rec.ok()) throw NumericalError("richardson_reference: " + rec.message);
    std::vector<Vector> row{rec.final_state()};
    for (int j = 1; j <= k; ++j) {
      const double f = std::pow(4.0, j);
      row.push_back((f * row[j - 1] - table[k - 1][j - 1]) / (f - 1.0));
    }
    table.push_back(std::move(row));
  }
  out.state = table.back().back();
  out.estimated_error = (table.back().back() - table[levels - 2].back()).norm();
  return out;
}

/// Reference known only as a single state (e.g. a Richardson extrapolant at t_end).
inline ReferenceFn constant_reference(Vector state) {
  return [s = std::move(state)](double) { return s; };
}

struct OrderEstimate {
  std::string scheme;
  double slope = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> steps;
  std::vector<double> errors;
  std::vector<std::string> warnings;
};

/// Least-squares slope of log(error) against log(h). Errors under 1e-13 sit
/// at round-off level; those points are dropped with a warning.
inline double fit_log_slope(const std::vector<double>& steps, const std::vector<double>& errors) {
  const std::size_t n = steps.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::log(steps[i]);
    const double y = std::log(errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double dn = static_cast<double>(n);
  return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

inline constexpr double kErrorFloor = 1e-13;

inline OrderEstimate estimate_order(const SchemeSpec& spec, const Problem& problem, const Vector& x0,
                                    const ReferenceFn& reference, std::vector<double> steps, double t_end,
                                    const SolverSettings& solver = {}) {
  if (steps.size() < 4) throw std::invalid_argument("estimate_order: need at least 4 step sizes");
  std::sort(steps.begin(), steps.end(), std::greater<>());
  if (!(steps.back() > 0.0)) throw std::invalid_argument("estimate_order: steps must be > 0");
  if (std::log10(steps.front() / steps.back()) < 1.5 - 1e-9) {
    throw std::invalid_argument("estimate_order: steps must span at least 1.5 decades");
  }
  OrderEstimate out;
  out.scheme = spec.name();
  for (double h : steps) {
    RunRecord rec = integrate(spec, problem, x0, h, t_end, solver, {false});
    if (!rec.ok()) throw NumericalError(fmt::format("estimate_order: {} failed at h={}: {}", spec.name(), h, rec.message));
    const double e = global_error(rec, reference, t_end);
    if (e < kErrorFloor) {
      out.warnings.push_back(fmt::format("h={}: error {:.3g} below the round-off floor, point dropped", h, e));
      continue;
    }
    out.steps.push_back(h);
    out.errors.push_back(e);
  }
  if (out.steps.size() < 2) {
    throw NumericalError("estimate_order: fewer than 2 points above the round-off floor for " + spec.name());
  }
  out.slope = fit_log_slope(out.steps, out.errors);
  return out;
}

// ---------------------------------------------------------------------------
// Equal-cost calibration.

/// Cost-comparison group a scheme is calibrated against: the unmodified
/// scheme of its figure (EEU for the Euler kernels, IMP for midpoint and
/// trapezoidal, GR-SYM for the discrete gradients).
inline SchemeSpec family_baseline(const SchemeSpec& s) {
  if (s.is_gradient()) return SchemeSpec::discrete_gradient(GradientKind::SYM);
  if (s.kernel == Kernel::EEU || s.kernel == Kernel::IEU) return SchemeSpec::one_step(Kernel::EEU);
  return SchemeSpec::one_step(Kernel::IMP);
}

struct CalibrationRound {
  std::string scheme;
  int round = 0;
  double lambda = 0.0;
  double cost = 0.0;
  double ratio = 0.0;  ///< cost / baseline cost
};

struct CalibrationResult {
  std::string baseline;
  double h_tilde = 0.0;
  double baseline_cost = 0.0;
  std::map<std::string, double> lambda;
  std::map<std::string, bool> converged;
  std::vector<CalibrationRound> transcript;
  std::vector<std::string> warnings;
  /// Final run of every scheme at h = lambda h_tilde, baseline included.
  std::map<std::string, RunRecord> runs;
};

struct CalibrationSettings {
  double rel_tol = 0.01;
  int max_rounds = 40;
  int damping_after = 10;
  CostWeights weights{};
  SolverSettings solver{};
};

/// Iterate lambda <- lambda * cost(lambda h_tilde) / cost_baseline(h_tilde)
/// until the costs agree to rel_tol. Costs are piecewise constant in lambda
/// (integer step and iteration counts), so after damping_after rounds the
/// update is halved in log space and a warning recorded. If the tolerance is
/// never met, the closest lambda seen is kept.
inline CalibrationResult calibrate_lambda(const std::vector<SchemeSpec>& schemes, const SchemeSpec& baseline,
                                          const Problem& problem, const Vector& x0, double h_tilde, double t_end,
                                          const CalibrationSettings& cfg = {},
                                          const std::map<std::string, double>& initial_lambda = {}) {
  if (!(h_tilde > 0.0)) throw std::invalid_argument("calibrate_lambda: h_tilde must be > 0");
  if (!(cfg.rel_tol > 0.0) || cfg.max_rounds < 1) throw std::invalid_argument("calibrate_lambda: bad settings");
  const int d = static_cast<int>(problem.ode.dim());
  CalibrationResult out;
  out.baseline = baseline.name();
  out.h_tilde = h_tilde;

  RunRecord base = integrate(baseline, problem, x0, h_tilde, t_end, cfg.solver, {false});
  out.baseline_cost = cfg.weights.total(base.costs, d);
  out.lambda[baseline.name()] = 1.0;
  out.converged[baseline.name()] = true;
  out.runs.emplace(baseline.name(), std::move(base));
  if (!(out.baseline_cost > 0.0)) throw NumericalError("calibrate_lambda: baseline has zero cost");

  for (const auto& s : schemes) {
    const std::string name = s.name();
    if (s == baseline) continue;
    auto it = initial_lambda.find(name);
    double lambda = it != initial_lambda.end() ? it->second : 1.0;
    double best_gap = std::numeric_limits<double>::infinity();
    double best_lambda = lambda;
    std::optional<RunRecord> best_run;
    bool ok = false;
    bool warned = false;
    for (int round = 1; round <= cfg.max_rounds; ++round) {
      RunRecord rec = integrate(s, problem, x0, lambda * h_tilde, t_end, cfg.solver, {false});
      const double cost = cfg.weights.total(rec.costs, d);
      const double ratio = cost / out.baseline_cost;
      out.transcript.push_back({name, round, lambda, cost, ratio});
      const double gap = std::abs(ratio - 1.0);
      if (gap < best_gap) {
        best_gap = gap;
        best_lambda = lambda;
        best_run = std::move(rec);
      }
      if (gap <= cfg.rel_tol) {
        ok = true;
        break;
      }
      if (!(ratio > 0.0) || !std::isfinite(ratio)) break;
      if (round >= cfg.damping_after) {
        if (!warned) {
          out.warnings.push_back(
              fmt::format("{} at h_tilde={}: no 1% agreement after {} rounds, damping", name, h_tilde, round));
          warned = true;
        }
        lambda *= std::sqrt(ratio);
      } else {
        lambda *= ratio;
      }
    }
    if (!ok) {
      out.warnings.push_back(fmt::format("{} at h_tilde={}: best cost gap {:.3g} (lambda={:.6g})", name, h_tilde,
                                         best_gap, best_lambda));
    }
    out.lambda[name] = best_lambda;
    out.converged[name] = ok;
    out.runs.emplace(name, std::move(*best_run));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Figure sweeps.

struct BenchmarkConfig {
  std::string name;
  double radius = 1.0;
  double t_end = 12.5;
  std::vector<double> h_tilde;
  std::vector<SchemeSpec> schemes;
  CalibrationSettings calibration{};
};

/// Geometric grid from h_max down over `decades`, `per_decade` points each,
/// both ends included.
inline std::vector<double> geometric_grid(double h_max, int decades = 2, int per_decade = 8) {
  if (!(h_max > 0.0) || decades < 1 || per_decade < 1) throw std::invalid_argument("geometric_grid: bad arguments");
  std::vector<double> g;
  const int n = decades * per_decade;
  for (int k = 0; k <= n; ++k) g.push_back(h_max * std::pow(10.0, -static_cast<double>(k) / per_decade));
  return g;
}

inline std::vector<std::string> preset_names() {
  return {"euler-r0.2", "euler-r5", "midtrap-r0.2", "midtrap-r1", "grad-r0.2", "grad-r1"};
}

/// The six sweeps behind the paper's figures.
inline BenchmarkConfig benchmark_preset(const std::string& preset) {
  auto names = [](std::initializer_list<const char*> l) {
    std::vector<SchemeSpec> v;
    for (const char* n : l) v.push_back(parse_scheme(n));
    return v;
  };
  BenchmarkConfig c;
  c.name = preset;
  if (preset == "euler-r0.2" || preset == "euler-r5") {
    c.radius = preset == "euler-r5" ? 5.0 : 0.2;
    c.schemes = names({"EEU", "IEU", "EEU-LEX", "IEU-LEX", "IEU-ILEX"});
    c.h_tilde = geometric_grid(0.01);
  } else if (preset == "midtrap-r0.2" || preset == "midtrap-r1") {
    c.radius = preset == "midtrap-r1" ? 1.0 : 0.2;
    c.schemes = names({"IMP", "IMP-LEX", "IMP-SLEX", "TR", "TR-LEX", "TR-SLEX"});
    c.h_tilde = geometric_grid(0.01);
  } else if (preset == "grad-r0.2" || preset == "grad-r1") {
    c.radius = preset == "grad-r1" ? 1.0 : 0.2;
    c.schemes = names({"GR-IA", "GR-IA-LEX", "GR-IA-SLEX", "GR-SYM", "GR-SYM-LEX", "GR-SYM-SLEX"});
    c.h_tilde = geometric_grid(0.1);
  } else {
    std::string valid;
    for (const auto& n : preset_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown preset '" + preset + "'; valid: " + valid);
  }
  return c;
}

struct BenchmarkRow {
  std::string scheme;
  double radius = 0.0;
  double h_tilde = 0.0;
  double lambda = 0.0;
  double h = 0.0;
  double t_end = 0.0;
  double global_error = 0.0;
  double energy_drift = 0.0;
  double cost_units = 0.0;
  int fp_warnings = 0;
  std::string status;
};

/// Worker count for sweeps: LEXINT_THREADS if set and positive, otherwise the
/// hardware concurrency.
inline unsigned sweep_threads() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("LEXINT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) n = static_cast<unsigned>(v);
  }
  return n;
}

/// Run `task(i)` for i in [0, n) on up to sweep_threads() workers.
template <class Task>
void parallel_for(std::size_t n, Task&& task) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(sweep_threads(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          task(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

struct BenchmarkResult {
  std::vector<BenchmarkRow> rows;  ///< ordered by (scheme order in config, h_tilde order)
  std::vector<CalibrationResult> calibrations;  ///< one per h_tilde, per baseline family
  std::vector<std::string> warnings;
};

/// Equal-cost sweep on a circular orbit of the anharmonic benchmark. At each
/// h_tilde every scheme is calibrated against its family baseline, then its
/// error at t_end is taken from the calibrated run. Failed runs become rows
/// with status "failed: ..."; the sweep always completes.
inline BenchmarkResult benchmark_figure(const BenchmarkConfig& config) {
  if (config.schemes.empty()) throw std::invalid_argument("benchmark_figure: no schemes");
  if (config.h_tilde.empty()) throw std::invalid_argument("benchmark_figure: empty h_tilde grid");
  if (!(config.t_end > 0.0)) throw std::invalid_argument("benchmark_figure: t_end must be > 0");
  const Problem problem =
      Problem::from_hamiltonian("anharmonic2d", anharmonic2d(), circular_initial_state(config.radius));
  const ReferenceFn reference = circular_reference(config.radius);

  // Group schemes by family baseline, keeping first-appearance order.
  std::vector<SchemeSpec> baselines;
  std::map<std::string, std::vector<SchemeSpec>> members;
  for (const auto& s : config.schemes) {
    const SchemeSpec b = family_baseline(s);
    if (!members.count(b.name())) baselines.push_back(b);
    members[b.name()].push_back(s);
  }

  const std::size_t nh = config.h_tilde.size();
  std::vector<std::vector<CalibrationResult>> per_point(nh);
  parallel_for(nh, [&](std::size_t i) {
    for (const auto& b : baselines) {
      per_point[i].push_back(calibrate_lambda(members[b.name()], b, problem, problem.initial_state,
                                              config.h_tilde[i], config.t_end, config.calibration));
    }
  });

  BenchmarkResult out;
  const int d = static_cast<int>(problem.ode.dim());
  for (const auto& s : config.schemes) {
    const std::string name = s.name();
    const std::string base = family_baseline(s).name();
    for (std::size_t i = 0; i < nh; ++i) {
      const CalibrationResult* cal = nullptr;
      for (const auto& c : per_point[i]) {
        if (c.baseline == base) cal = &c;
      }
      const RunRecord& rec = cal->runs.at(name);
      BenchmarkRow row;
      row.scheme = name;
      row.radius = config.radius;
      row.h_tilde = config.h_tilde[i];
      row.lambda = cal->lambda.at(name);
      row.h = row.lambda * row.h_tilde;
      row.t_end = config.t_end;
      row.cost_units = config.calibration.weights.total(rec.costs, d);
      row.fp_warnings = rec.solver_warnings;
      row.energy_drift = rec.max_energy_drift;
      if (rec.ok()) {
        row.global_error = global_error(rec, reference, config.t_end);
        row.status = cal->converged.at(name) ? "ok" : "ok-cost-gap";
      } else {
        row.global_error = std::numeric_limits<double>::quiet_NaN();
        row.status = "failed: " + rec.message;
      }
      out.rows.push_back(std::move(row));
    }
  }
  for (auto& v : per_point) {
    for (auto& c : v) {
      out.warnings.insert(out.warnings.end(), c.warnings.begin(), c.warnings.end());
      c.runs.clear();
      out.calibrations.push_back(std::move(c));
    }
  }
  return out;
}

/// Shortest round-trip-exact decimal with 17 significant digits.
inline std::string format_number(double v) { return fmt::format("{:.17g}", v); }

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline void write_benchmark_csv(std::ostream& os, const std::vector<BenchmarkRow>& rows) {
  os << "scheme,R,h_tilde,lambda,h,t_end,global_error,energy_drift,cost_units,fp_warnings,status\n";
  for (const auto& r : rows) {
    os << csv_escape(r.scheme) << ',' << format_number(r.radius) << ',' << format_number(r.h_tilde) << ','
       << format_number(r.lambda) << ',' << format_number(r.h) << ',' << format_number(r.t_end) << ','
       << format_number(r.global_error) << ',' << format_number(r.energy_drift) << ','
       << format_number(r.cost_units) << ',' << r.fp_warnings << ',' << csv_escape(r.status) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Linear stability.

struct StabilityRow {
  double h = 0.0;
  int steps = 0;
  double first_step_rel_error = 0.0;  ///< |x_1 - e^{hA} x_0 - ...| / |exact x_1|
  double max_step_rel_error = 0.0;    ///< same, worst over all steps
  double max_deviation_ratio = 0.0;   ///< max_n |x_n - x*| / |x_0 - x*|
  double final_deviation_ratio = 0.0;
  bool diverged = false;
  std::string note;
};

struct StabilityReport {
  std::string scheme;
  std::vector<StabilityRow> rows;
};

/// Growth factor beyond which a run counts as diverged.
inline constexpr double kDivergenceRatio = 1e3;

/// Runs the scheme on x' = Ax + b for each h and compares every step with the
/// exact propagator e^{hA} x + h phi1(hA) b. Gradient schemes need the
/// quadratic Hamiltonian generating the system.
inline StabilityReport stability_audit(const SchemeSpec& spec, const LinearSystem& ls, const std::vector<double>& h_grid,
                                       int n_steps, const Vector& x0, const HamiltonianSystem* hs = nullptr,
                                       SolverSettings solver = {.form = IterationForm::Exponential}) {
  if (n_steps < 1) throw std::invalid_argument("stability_audit: n_steps must be >= 1");
  if (spec.is_gradient() && hs == nullptr) {
    throw std::invalid_argument("stability_audit: " + spec.name() + " needs a Hamiltonian");
  }
  const OdeSystem ode = ls.to_ode();
  const auto d = ls.a.rows();
  Vector fixed = Vector::Zero(d);
  if (ls.b.norm() > 0.0) fixed = solve_linear(ls.a, Vector(-ls.b));
  const double dev0 = std::max((x0 - fixed).norm(), std::numeric_limits<double>::min());

  StabilityReport rep;
  rep.scheme = spec.name();
  for (double h : h_grid) {
    StabilityRow row;
    row.h = h;
    const auto ep = detail::exp_phi1(h * ls.a);
    const Matrix& e = ep.exp;
    const Vector drift = h * (ep.phi1 * ls.b);
    Vector x = x0;
    try {
      for (int k = 1; k <= n_steps; ++k) {
        const Vector exact = e * x + drift;
        const StepResult r = take_step(spec, ode, hs, x, h, solver);
        const double scale = exact.norm();
        const double err = (r.state - exact).norm() / (scale > 0.0 ? scale : 1.0);
        if (k == 1) row.first_step_rel_error = err;
        row.max_step_rel_error = std::max(row.max_step_rel_error, err);
        x = r.state;
        row.steps = k;
        const double dev = (x - fixed).norm() / dev0;
        row.max_deviation_ratio = std::max(row.max_deviation_ratio, dev);
        row.final_deviation_ratio = dev;
        if (!std::isfinite(dev) || dev > kDivergenceRatio) {
          row.diverged = true;
          row.note = fmt::format("diverged at step {}", k);
          break;
        }
      }
    } catch (const NumericalError& ex) {
      row.diverged = true;
      row.note = ex.what();
    }
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Orbit period.

/// Time of the first full revolution of (y^1, y^2) about the origin, found by
/// unwrapping the polar angle along the trajectory and interpolating linearly
/// where it reaches 2 pi.
inline double period_by_angle(const RunRecord& run) {
  if (run.states.size() < 2 || run.states.front().size() < 2) {
    throw std::invalid_argument("period_by_angle: need a trajectory of planar states");
  }
  const double two_pi = 2.0 * std::numbers::pi;
  auto angle = [](const Vector& y) { return std::atan2(y(1), y(0)); };
  double prev = angle(run.states.front());
  double unwrapped = 0.0;
  for (std::size_t k = 1; k < run.states.size(); ++k) {
    const double a = angle(run.states[k]);
    double step = a - prev;
    step -= two_pi * std::round(step / two_pi);
    const double next = unwrapped + step;
    if (std::abs(next) >= two_pi) {
      const double frac = (two_pi - std::abs(unwrapped)) / std::abs(step);
      return run.times[k - 1] + frac * (run.times[k] - run.times[k - 1]);
    }
    unwrapped = next;
    prev = a;
  }
  throw NumericalError("period_by_angle: trajectory does not complete a revolution");
}

}  // namespace lexint

#endif  // LEXINT_ANALYSIS_HPP
