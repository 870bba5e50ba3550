#ifndef LEXINT_TOOLS_CLI_HPP
#define LEXINT_TOOLS_CLI_HPP

// Batch front end: integrate, benchmark, order, stability, calibrate.
// Exit codes: 0 success, 2 invalid input, 3 numerical failure.

#include "lexint/analysis.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace lexint::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitNumerical = 3;

struct Options {
  std::vector<std::string> schemes;
  std::string system = "anharmonic2d";
  std::optional<double> radius;
  std::optional<double> step;
  std::vector<double> steps;
  double t_end = 12.5;
  double tol = SolverSettings{}.tol;
  int max_iter = SolverSettings{}.max_iter;
  std::string preset;
  std::string out = "-";
  std::string stability_case = "decay";
  int n_steps = 10;
  bool exponential_form = false;
};

class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline SolverSettings solver_from(const Options& o) {
  SolverSettings s;
  s.tol = o.tol;
  s.max_iter = o.max_iter;
  if (o.exponential_form) s.form = IterationForm::Exponential;
  s.validate();
  return s;
}

inline std::vector<SchemeSpec> schemes_from(const Options& o) {
  std::vector<SchemeSpec> v;
  for (const auto& n : o.schemes) v.push_back(parse_scheme(n));
  return v;
}

/// The named system; for anharmonic2d an explicit radius selects the circular
/// orbit of that radius as initial state.
inline Problem problem_from(const Options& o) {
  if (o.system == "anharmonic2d") {
    const double r = o.radius.value_or(1.0);
    if (!(r > 0.0 && r < 10.0)) throw InvalidInput("--radius must lie in (0, 10) for circular orbits");
    return Problem::from_hamiltonian("anharmonic2d", anharmonic2d(), circular_initial_state(r));
  }
  if (o.radius) throw InvalidInput("--radius applies to anharmonic2d only");
  return SystemRegistry::builtin().make(o.system);
}

inline bool is_circular(const Options& o) { return o.system == "anharmonic2d"; }

/// Writes to --out, or to the given stream for "-".
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) {
    if (path == "-") {
      os_ = &fallback;
    } else {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw InvalidInput("cannot open output file '" + path + "'");
      os_ = file_.get();
    }
  }
  std::ostream& stream() { return *os_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* os_ = nullptr;
};

inline void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw InvalidInput(std::string(what) + " must be a positive number");
}

inline int cmd_integrate(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.schemes.size() != 1) throw InvalidInput("integrate takes exactly one --scheme");
  if (!o.step) throw InvalidInput("integrate needs --step");
  require_positive(*o.step, "--step");
  require_positive(o.t_end, "--t-end");
  const SchemeSpec spec = parse_scheme(o.schemes.front());
  const Problem p = problem_from(o);
  if (spec.is_gradient() && !p.hamiltonian) throw InvalidInput(spec.name() + " needs a Hamiltonian system");
  const RunRecord rec = integrate(spec, p, p.initial_state, *o.step, o.t_end, solver_from(o));

  Sink sink(o.out, out);
  std::ostream& os = sink.stream();
  const auto d = p.ode.dim();
  os << 't';
  if (p.hamiltonian) {
    const int m = p.hamiltonian->dof();
    for (int i = 1; i <= m; ++i) os << ",x" << i;
    for (int i = 1; i <= m; ++i) os << ",p" << i;
  } else {
    for (Eigen::Index i = 1; i <= d; ++i) os << ",y" << i;
  }
  os << ",H,cost\n";
  const CostWeights w;
  for (std::size_t k = 0; k < rec.states.size(); ++k) {
    os << format_number(rec.times[k]);
    for (Eigen::Index i = 0; i < d; ++i) os << ',' << format_number(rec.states[k](i));
    os << ',' << (rec.energies.empty() ? std::string("nan") : format_number(rec.energies[k]));
    os << ',' << format_number(w.total(rec.cost_history[k], static_cast<int>(d))) << '\n';
  }
  if (!rec.ok()) {
    err << "integrate: " << rec.message << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}

inline int cmd_benchmark(const Options& o, std::ostream& out, std::ostream& err) {
  BenchmarkConfig cfg;
  if (!o.preset.empty()) {
    cfg = benchmark_preset(o.preset);
    if (!o.schemes.empty()) cfg.schemes = schemes_from(o);
    if (o.radius) cfg.radius = *o.radius;
    if (!o.steps.empty()) cfg.h_tilde = o.steps;
  } else {
    if (o.schemes.empty()) throw InvalidInput("benchmark needs --preset or at least one --scheme");
    cfg.name = "custom";
    cfg.schemes = schemes_from(o);
    cfg.radius = o.radius.value_or(1.0);
    cfg.h_tilde = o.steps.empty() ? geometric_grid(0.01) : o.steps;
  }
  if (o.system != "anharmonic2d") throw InvalidInput("benchmark runs on anharmonic2d circular orbits only");
  if (!(cfg.radius > 0.0 && cfg.radius < 10.0)) throw InvalidInput("--radius must lie in (0, 10)");
  for (double h : cfg.h_tilde) require_positive(h, "--steps entries");
  cfg.t_end = o.t_end;
  require_positive(cfg.t_end, "--t-end");
  cfg.calibration.solver = solver_from(o);

  const BenchmarkResult res = benchmark_figure(cfg);
  Sink sink(o.out, out);
  write_benchmark_csv(sink.stream(), res.rows);
  for (const auto& w : res.warnings) err << "warning: " << w << '\n';
  return kExitOk;
}

inline std::vector<double> default_order_steps(const std::string& system) {
  if (system == "anharmonic2d") return {0.08, 0.04, 0.02, 0.01, 0.005, 0.0025};
  return {0.2, 0.1, 0.05, 0.025, 0.0125, 0.00625};
}

inline int cmd_order(const Options& o, std::ostream& out) {
  if (o.schemes.empty()) throw InvalidInput("order needs at least one --scheme");
  require_positive(o.t_end, "--t-end");
  const auto specs = schemes_from(o);
  const Problem p = problem_from(o);
  for (const auto& s : specs) {
    if (s.is_gradient() && !p.hamiltonian) throw InvalidInput(s.name() + " needs a Hamiltonian system");
  }
  const std::vector<double> steps = o.steps.empty() ? default_order_steps(o.system) : o.steps;
  for (double h : steps) require_positive(h, "--steps entries");
  const SolverSettings solver = solver_from(o);

  ReferenceFn ref;
  std::string ref_note;
  if (is_circular(o)) {
    ref = circular_reference(o.radius.value_or(1.0));
    ref_note = "closed-form circular orbit";
  } else {
    const double h_min = *std::min_element(steps.begin(), steps.end());
    const RichardsonReference rr = richardson_reference(p, p.initial_state, o.t_end, h_min, 4, solver);
    ref = constant_reference(rr.state);
    ref_note = fmt::format("TR-SLEX Richardson, estimated error {:.3g}", rr.estimated_error);
  }

  Sink sink(o.out, out);
  std::ostream& os = sink.stream();
  fmt::print(os, "# system={} t_end={} reference: {}\n", o.system, o.t_end, ref_note);
  fmt::print(os, "{:<14} {:>8} {:>7}\n", "scheme", "slope", "points");
  for (const auto& s : specs) {
    const OrderEstimate est = estimate_order(s, p, p.initial_state, ref, steps, o.t_end, solver);
    fmt::print(os, "{:<14} {:>8.4f} {:>7}\n", s.name(), est.slope, est.steps.size());
    for (const auto& w : est.warnings) fmt::print(os, "#   {}\n", w);
  }
  return kExitOk;
}

struct StabilityCase {
  LinearSystem ls;
  Vector x0;
  std::optional<HamiltonianSystem> hs;
};

inline StabilityCase stability_case(const std::string& name) {
  if (name == "decay") {
    return {LinearSystem(Matrix::Constant(1, 1, -1.0), Vector::Zero(1)), Vector::Ones(1), std::nullopt};
  }
  if (name == "rotation") {
    Matrix a(2, 2);
    a << 0.0, 1.0, -1.0, 0.0;
    Vector x0(2);
    x0 << 1.0, 0.0;
    return {LinearSystem(a, Vector::Zero(2)), x0, harmonic1d()};
  }
  if (name == "linear") {
    Matrix a(2, 2);
    a << -0.1, 1.0, -1.0, -0.1;
    Vector b(2);
    b << 0.5, 0.0;
    Vector x0(2);
    x0 << 1.0, 0.0;
    return {LinearSystem(a, b), x0, std::nullopt};
  }
  throw InvalidInput("unknown stability case '" + name + "'; valid: decay, rotation, linear");
}

inline int cmd_stability(const Options& o, std::ostream& out) {
  if (o.schemes.empty()) throw InvalidInput("stability needs at least one --scheme");
  if (o.n_steps < 1) throw InvalidInput("--n-steps must be >= 1");
  const auto specs = schemes_from(o);
  const StabilityCase sc = stability_case(o.stability_case);
  for (const auto& s : specs) {
    if (s.is_gradient() && !sc.hs) throw InvalidInput(s.name() + " needs a Hamiltonian case (rotation)");
  }
  const std::vector<double> grid = o.steps.empty() ? std::vector<double>{0.5, 1, 2, 5, 10, 100} : o.steps;
  for (double h : grid) require_positive(h, "--steps entries");
  SolverSettings solver = solver_from(o);
  solver.form = IterationForm::Exponential;

  Sink sink(o.out, out);
  std::ostream& os = sink.stream();
  fmt::print(os, "# case={} n_steps={}\n", o.stability_case, o.n_steps);
  fmt::print(os, "{:<14} {:>8} {:>12} {:>12} {:>12} {:>10}\n", "scheme", "h", "step1_err", "max_err", "max_dev",
             "verdict");
  for (const auto& s : specs) {
    const StabilityReport rep =
        stability_audit(s, sc.ls, grid, o.n_steps, sc.x0, sc.hs ? &*sc.hs : nullptr, solver);
    for (const auto& r : rep.rows) {
      fmt::print(os, "{:<14} {:>8.4g} {:>12.3e} {:>12.3e} {:>12.3e} {:>10}{}\n", rep.scheme, r.h,
                 r.first_step_rel_error, r.max_step_rel_error, r.max_deviation_ratio,
                 r.diverged ? "diverged" : "bounded", r.note.empty() ? "" : "  # " + r.note);
    }
  }
  return kExitOk;
}

inline int cmd_calibrate(const Options& o, std::ostream& out) {
  if (o.schemes.empty()) throw InvalidInput("calibrate needs at least one --scheme");
  if (o.system != "anharmonic2d") throw InvalidInput("calibrate runs on anharmonic2d circular orbits only");
  const double h_tilde = o.step.value_or(0.01);
  require_positive(h_tilde, "--step");
  require_positive(o.t_end, "--t-end");
  const auto specs = schemes_from(o);
  const Problem p = problem_from(o);
  CalibrationSettings cs;
  cs.solver = solver_from(o);

  // One calibration per family baseline, in order of first appearance.
  std::vector<SchemeSpec> baselines;
  for (const auto& s : specs) {
    const SchemeSpec b = family_baseline(s);
    if (std::find(baselines.begin(), baselines.end(), b) == baselines.end()) baselines.push_back(b);
  }
  Sink sink(o.out, out);
  std::ostream& os = sink.stream();
  fmt::print(os, "# R={} h_tilde={} t_end={}\n", o.radius.value_or(1.0), h_tilde, o.t_end);
  fmt::print(os, "{:<14} {:<10} {:>12} {:>10}\n", "scheme", "baseline", "lambda", "converged");
  for (const auto& b : baselines) {
    std::vector<SchemeSpec> members;
    for (const auto& s : specs) {
      if (family_baseline(s) == b) members.push_back(s);
    }
    const CalibrationResult res = calibrate_lambda(members, b, p, p.initial_state, h_tilde, o.t_end, cs);
    for (const auto& s : members) {
      fmt::print(os, "{:<14} {:<10} {:>12.6g} {:>10}\n", s.name(), b.name(), res.lambda.at(s.name()),
                 res.converged.at(s.name()) ? "yes" : "no");
    }
    for (const auto& r : res.transcript) {
      fmt::print(os, "#   {} round {}: lambda={:.6g} cost={:.6g} ratio={:.5f}\n", r.scheme, r.round, r.lambda, r.cost,
                 r.ratio);
    }
    for (const auto& w : res.warnings) fmt::print(os, "#   warning: {}\n", w);
  }
  return kExitOk;
}

/// Entry point shared by the executable and the tests.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Locally exact integrators: runs, benchmarks and verification"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value configuration file");
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scheme", o.schemes, "scheme name (repeatable)")->take_all();
    sub->add_option("--system", o.system, "system name")->capture_default_str();
    sub->add_option("--radius", o.radius, "circular orbit radius for anharmonic2d");
    sub->add_option("--t-end", o.t_end, "final time")->capture_default_str();
    sub->add_option("--tol", o.tol, "fixed-point tolerance (max-norm)")->capture_default_str();
    sub->add_option("--max-iter", o.max_iter, "fixed-point iteration cap")->capture_default_str();
    sub->add_option("--out", o.out, "output file, - for stdout")->capture_default_str();
  };

  CLI::App* integ = app.add_subcommand("integrate", "write a trajectory CSV (t, state, H, cost)");
  add_common(integ);
  integ->add_option("--step", o.step, "step size h");
  integ->add_flag("--exponential-form", o.exponential_form, "iterate locally exact steps in exponential form");

  CLI::App* bench = app.add_subcommand("benchmark", "equal-cost error sweep as CSV");
  add_common(bench);
  bench->add_option("--preset", o.preset, "euler-r0.2, euler-r5, midtrap-r0.2, midtrap-r1, grad-r0.2, grad-r1");
  bench->add_option("--steps", o.steps, "h_tilde grid")->delimiter(',');

  CLI::App* order = app.add_subcommand("order", "fit empirical convergence orders");
  add_common(order);
  order->add_option("--steps", o.steps, "step sizes (>= 4, >= 1.5 decades)")->delimiter(',');

  CLI::App* stab = app.add_subcommand("stability", "linear stability and exactness audit");
  add_common(stab);
  stab->add_option("--steps", o.steps, "step sizes")->delimiter(',');
  stab->add_option("--case", o.stability_case, "decay (x'=-x), rotation, linear")->capture_default_str();
  stab->add_option("--n-steps", o.n_steps, "steps per run")->capture_default_str();

  CLI::App* cal = app.add_subcommand("calibrate", "equal-cost step multipliers lambda");
  add_common(cal);
  cal->add_option("--step", o.step, "base step h_tilde (default 0.01)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }

  try {
    if (integ->parsed()) return cmd_integrate(o, out, err);
    if (bench->parsed()) return cmd_benchmark(o, out, err);
    if (order->parsed()) return cmd_order(o, out);
    if (stab->parsed()) return cmd_stability(o, out);
    if (cal->parsed()) return cmd_calibrate(o, out);
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  return kExitInvalid;
}

}  // namespace lexint::cli

#endif  // LEXINT_TOOLS_CLI_HPP
