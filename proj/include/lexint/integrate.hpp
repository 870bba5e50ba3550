#ifndef LEXINT_INTEGRATE_HPP
#define LEXINT_INTEGRATE_HPP

#include "lexint/catalog.hpp"
#include "lexint/gradschemes.hpp"
#include "lexint/schemes.hpp"
#include "lexint/systems.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lexint {

/// Cost of a run in scalar-evaluation units for state dimension d: F and
/// grad H cost d, H costs 1, F' and H_yy cost d(d+1)/2 (their distinct second
/// derivatives; F' = S H_yy for Hamiltonian fields), and one matrix function
/// (expm, phi1, tanhc with its solve) is priced like one vector field, d.
/// Each field scales its evaluation kind.
struct CostWeights {
  double f = 1.0;
  double jac = 1.0;
  double h = 1.0;
  double grad = 1.0;
  double hess = 1.0;
  double matfun = 1.0;

  double total(const CostTally& c, int d) const {
    const double vec = d;
    const double sym = 0.5 * d * (d + 1.0);
    auto n = [](std::uint64_t k) { return static_cast<double>(k); };
    return f * vec * n(c.f_evals) + jac * sym * n(c.jac_evals) + h * n(c.h_evals) + grad * vec * n(c.grad_evals) +
           hess * sym * n(c.hess_evals) + matfun * vec * n(c.matfun_evals);
  }
};

enum class RunStatus { Ok, Failed };

/// Trajectory and bookkeeping of one constant-step run.
struct RunRecord {
  std::string scheme;
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<double> energies;  ///< filled for Hamiltonian problems only
  CostTally costs;
  std::vector<CostTally> cost_history;  ///< cumulative counters at each stored state
  int solver_warnings = 0;
  double max_energy_drift = 0.0;  ///< max |H_n - H_0| / |H_0|
  RunStatus status = RunStatus::Ok;
  std::string message;

  bool ok() const { return status == RunStatus::Ok; }
  double final_time() const { return times.back(); }
  const Vector& final_state() const { return states.back(); }
};

struct RunOptions {
  bool keep_trajectory = true;  ///< otherwise keep only the first and last state
};

/// Grid t_k = k h for k < N and t_N = t_end, N = ceil(t_end / h).
inline std::int64_t step_count(double h, double t_end) {
  if (t_end <= 0.0) return 0;
  const double ratio = t_end / h;
  auto n = static_cast<std::int64_t>(std::ceil(ratio));
  // A grid point within round-off of t_end counts as landing on it.
  if (n > 1 && ratio - static_cast<double>(n - 1) < 1e-9) --n;
  return n;
}

/// Take one step of any catalog scheme on the problem.
inline StepResult take_step(const SchemeSpec& spec, const OdeSystem& ode, const HamiltonianSystem* hs,
                            const Vector& x, double h, const SolverSettings& solver) {
  if (spec.is_gradient()) {
    if (hs == nullptr) throw std::invalid_argument(spec.name() + " needs a Hamiltonian system");
    return gradient_step(spec.gradient, spec.anchor, *hs, x, h, solver);
  }
  return step(spec.kernel, spec.anchor, ode, x, h, solver);
}

/// Integrate from t = 0 to t_end with constant step h, shortening the last
/// step to land on t_end. Numerical failures end the run early with status
/// Failed; the record keeps everything computed up to that point.
inline RunRecord integrate(const SchemeSpec& spec, const Problem& problem, const Vector& x0, double h,
                           double t_end, const SolverSettings& solver = {}, const RunOptions& options = {}) {
  if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("integrate: step must be > 0");
  if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw std::invalid_argument("integrate: t_end must be >= 0");
  if (x0.size() != problem.ode.dim()) throw std::invalid_argument("integrate: initial state has wrong dimension");
  solver.validate();

  // Private copies so that counters belong to this run.
  OdeSystem ode = problem.ode;
  ode.reset_counters();
  std::optional<HamiltonianSystem> hs = problem.hamiltonian;
  if (hs) hs->reset_counters();
  const HamiltonianSystem* hs_ptr = hs ? &*hs : nullptr;

  RunRecord rec;
  rec.scheme = spec.name();
  rec.times.push_back(0.0);
  rec.states.push_back(x0);
  rec.cost_history.emplace_back();
  double h0 = 0.0;
  if (hs) {
    h0 = hs->energy_uncounted(x0);
    rec.energies.push_back(h0);
  }

  const std::int64_t n = step_count(h, t_end);
  Vector x = x0;
  std::uint64_t matfun = 0;
  double t = 0.0;
  for (std::int64_t k = 1; k <= n; ++k) {
    const double t_next = k == n ? t_end : static_cast<double>(k) * h;
    try {
      StepResult r = take_step(spec, ode, hs_ptr, x, t_next - t, solver);
      x = std::move(r.state);
      matfun += static_cast<std::uint64_t>(r.stats.matfun_evals);
      if (!r.stats.converged) ++rec.solver_warnings;
    } catch (const NumericalError& e) {
      rec.status = RunStatus::Failed;
      rec.message = "step " + std::to_string(k) + " at t=" + std::to_string(t) + ": " + e.what();
      break;
    }
    t = t_next;
    CostTally so_far = ode.counters();
    if (hs) so_far += hs->counters();
    so_far.matfun_evals += matfun;
    if (!options.keep_trajectory && rec.states.size() > 1) {
      rec.times.back() = t;
      rec.states.back() = x;
      rec.cost_history.back() = so_far;
    } else {
      rec.times.push_back(t);
      rec.states.push_back(x);
      rec.cost_history.push_back(so_far);
    }
    if (hs) {
      const double hk = hs->energy_uncounted(x);
      const double drift = std::abs(hk - h0) / std::max(std::abs(h0), std::numeric_limits<double>::min());
      rec.max_energy_drift = std::max(rec.max_energy_drift, drift);
      if (!options.keep_trajectory && rec.energies.size() > 1) {
        rec.energies.back() = hk;
      } else {
        rec.energies.push_back(hk);
      }
    }
  }

  rec.costs = rec.cost_history.back();
  return rec;
}

}  // namespace lexint

#endif  // LEXINT_INTEGRATE_HPP
