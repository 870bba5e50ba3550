#ifndef LEXINT_SCHEMES_HPP
#define LEXINT_SCHEMES_HPP

// One-step schemes of the form x_{n+1} - x_n = delta(xbar, h) Psi(x_n, x_{n+1})
// where Psi is one of four classical kernels and delta is either h I (the
// classical scheme) or the matrix that makes the scheme reproduce the exact
// discretization of the linearization at the anchor xbar.

#include "lexint/matfun.hpp"
#include "lexint/systems.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>

namespace lexint {

enum class Kernel { EEU, IEU, IMP, TR };

/// Where the vector field is linearized each step.
enum class Anchor {
  None,  ///< classical scheme, delta = h I
  LEX,   ///< xbar = x_n
  ILEX,  ///< xbar = x_{n+1}
  SLEX,  ///< xbar = (x_n + x_{n+1}) / 2
};

inline const char* to_string(Kernel k) {
  switch (k) {
    case Kernel::EEU: return "EEU";
    case Kernel::IEU: return "IEU";
    case Kernel::IMP: return "IMP";
    case Kernel::TR: return "TR";
  }
  return "?";
}

inline const char* to_string(Anchor a) {
  switch (a) {
    case Anchor::None: return "";
    case Anchor::LEX: return "LEX";
    case Anchor::ILEX: return "ILEX";
    case Anchor::SLEX: return "SLEX";
  }
  return "?";
}

/// How the implicit equation of a locally exact step is iterated.
enum class IterationForm {
  /// x <- x_n + delta Psi(x_n, x): the scheme as written.
  Increment,
  /// x <- e^{hJ} x_n + h phi1(hJ) r(x_n, x) with r the part of Psi that is
  /// nonlinear relative to J = F'(anchor). Same fixed point; contracts for any
  /// h on nearly linear problems and keeps e^{hJ} x_n free of cancellation.
  Exponential,
};

/// Fixed-point solver settings for implicit steps.
struct SolverSettings {
  double tol = 3e-16;
  int max_iter = 20;
  IterationForm form = IterationForm::Increment;

  void validate() const {
    if (!(tol > 0.0)) throw std::invalid_argument("SolverSettings: tol must be > 0");
    if (max_iter < 1) throw std::invalid_argument("SolverSettings: max_iter must be >= 1");
  }
};

struct StepStats {
  int iterations = 0;
  double residual = 0.0;  ///< max-norm of the last iterate update
  bool converged = true;
  int matfun_evals = 0;
};

struct StepResult {
  Vector state;
  StepStats stats;
};

/// Raised when a step cannot be taken at this h (singular delta bracket or a
/// diverging fixed-point iteration). Callers may retry with a smaller step.
class StepFailure : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

inline bool is_implicit(Kernel k) { return k != Kernel::EEU; }

inline bool anchor_allowed(Kernel k, Anchor a) {
  switch (a) {
    case Anchor::None:
    case Anchor::LEX: return true;
    case Anchor::ILEX: return is_implicit(k);
    case Anchor::SLEX: return k == Kernel::IMP || k == Kernel::TR;
  }
  return false;
}

/// Psi(x_n, x_{n+1}) of the kernel.
inline Vector psi(Kernel k, const OdeSystem& sys, const Vector& xn, const Vector& xn1) {
  switch (k) {
    case Kernel::EEU: return sys.f(xn);
    case Kernel::IEU: return sys.f(xn1);
    case Kernel::IMP: return sys.f(0.5 * (xn + xn1));
    case Kernel::TR: return 0.5 * (sys.f(xn) + sys.f(xn1));
  }
  throw std::logic_error("psi: unknown kernel");
}

/// Partial derivatives (Psi_1, Psi_2) on the diagonal, given F' there.
inline std::pair<Matrix, Matrix> psi_partials_at_diag(Kernel k, const Matrix& jac) {
  const Matrix zero = Matrix::Zero(jac.rows(), jac.cols());
  switch (k) {
    case Kernel::EEU: return {jac, zero};
    case Kernel::IEU: return {zero, jac};
    case Kernel::IMP:
    case Kernel::TR: return {0.5 * jac, 0.5 * jac};
  }
  throw std::logic_error("psi_partials_at_diag: unknown kernel");
}

/// delta = h phi1(hJ) (I + h Psi_2 phi1(hJ))^{-1} for Jacobian J at the anchor.
///
/// The bracket commutes with phi1(hJ), so the product is formed as a single
/// solve. A singular bracket surfaces as StepFailure.
inline Matrix delta_from_jacobian(Kernel k, const Matrix& jac, double h) {
  const auto n = jac.rows();
  const Matrix phi = phi1(h * jac);
  if (k == Kernel::EEU) return h * phi;
  const Matrix psi2 = psi_partials_at_diag(k, jac).second;
  const Matrix update = h * psi2 * phi;
  const Matrix bracket = Matrix::Identity(n, n) + update;
  try {
    return h * solve_linear(bracket, phi, 1.0 + detail::norm1(update));
  } catch (const SingularMatrix& e) {
    throw StepFailure(std::string("delta: singular bracket at this step size: ") + e.what());
  }
}

/// The same delta through tanhc(hJ/2) and (Psi_2 - Psi_1); an independent
/// algebraic route used to cross-check delta_from_jacobian.
inline Matrix delta_from_jacobian_tanhc(Kernel k, const Matrix& jac, double h) {
  const auto n = jac.rows();
  const Matrix t = tanhc_half(jac, h);
  const auto [p1, p2] = psi_partials_at_diag(k, jac);
  const Matrix update = 0.5 * h * (p2 - p1) * t;
  const Matrix bracket = Matrix::Identity(n, n) + update;
  try {
    return h * solve_linear(bracket, t, 1.0 + detail::norm1(update));
  } catch (const SingularMatrix& e) {
    throw StepFailure(std::string("delta: singular bracket at this step size: ") + e.what());
  }
}

inline Matrix delta_matrix(Kernel k, const OdeSystem& sys, const Vector& anchor, double h) {
  return delta_from_jacobian(k, sys.jac(anchor), h);
}

/// x + h phi1(hA)(Ax + b): the exact flow of x' = Ax + b over time h.
inline Vector exact_linear_step(const LinearSystem& ls, const Vector& x, double h) {
  return x + h * (phi1(h * ls.a) * (ls.a * x + ls.b));
}

/// x + h phi1(hF'(x)) F(x).
inline Vector exp_euler_step(const OdeSystem& sys, const Vector& x, double h) {
  const Matrix jac = sys.jac(x);
  return x + h * (phi1(h * jac) * sys.f(x));
}

namespace detail {

inline double max_abs_diff(const Vector& a, const Vector& b) { return (a - b).cwiseAbs().maxCoeff(); }

inline void require_finite_iterate(const Vector& v) {
  if (!v.allFinite()) throw StepFailure("fixed-point iteration produced a non-finite iterate");
}

// Splits Psi(x_n, x) = P1 x_n + P2 x + r with P1 + P2 = J = F'(anchor). The
// locally exact step then reads x = e^{hJ} x_n + h phi1(hJ) r.

inline StepResult step_exponential_form(Kernel k, Anchor a, const OdeSystem& sys, const Vector& x, double h,
                                        const SolverSettings& solver) {
  solver.validate();
  StepResult out;
  Matrix jac, expj, hphi, p1, p2;
  auto refresh = [&](const Vector& anchor) {
    jac = sys.jac(anchor);
    auto ep = exp_phi1(h * jac);
    require_finite_result(ep.exp, "step");
    expj = std::move(ep.exp);
    hphi = h * ep.phi1;
    std::tie(p1, p2) = psi_partials_at_diag(k, jac);
    ++out.stats.matfun_evals;
  };
  Vector fn;
  if (k == Kernel::EEU || k == Kernel::TR) fn = sys.f(x);
  auto propagate = [&](const Vector& xk) -> Vector {
    Vector r;
    switch (k) {
      case Kernel::EEU: r = fn; break;
      case Kernel::IEU: r = sys.f(xk); break;
      case Kernel::IMP: r = sys.f(0.5 * (x + xk)); break;
      case Kernel::TR: r = 0.5 * (fn + sys.f(xk)); break;
    }
    r -= p1 * x + p2 * xk;
    return expj * x + hphi * r;
  };

  if (a == Anchor::LEX) refresh(x);
  if (k == Kernel::EEU) {
    out.state = propagate(x);
    out.stats.iterations = 1;
    require_finite_iterate(out.state);
    return out;
  }
  Vector xk = x;
  out.stats.converged = false;
  for (int it = 1; it <= solver.max_iter; ++it) {
    if (a == Anchor::ILEX) refresh(xk);
    if (a == Anchor::SLEX) refresh(0.5 * (x + xk));
    Vector next = propagate(xk);
    require_finite_iterate(next);
    out.stats.residual = max_abs_diff(next, xk);
    out.stats.iterations = it;
    xk = std::move(next);
    if (out.stats.residual <= solver.tol) {
      out.stats.converged = true;
      break;
    }
  }
  out.state = std::move(xk);
  return out;
}

}  // namespace detail

/// One step of the (possibly modified) kernel scheme.
///
/// The implicit equation is solved by fixed-point iteration starting at x_n;
/// for ILEX and SLEX delta is refreshed from the current iterate every sweep.
/// Hitting max_iter is reported through StepStats, not thrown.
inline StepResult step(Kernel k, Anchor a, const OdeSystem& sys, const Vector& x, double h,
                       const SolverSettings& solver = {}) {
  if (!anchor_allowed(k, a)) {
    throw std::invalid_argument(std::string("anchor ") + to_string(a) + " is not defined for kernel " +
                                to_string(k));
  }
  if (a != Anchor::None && solver.form == IterationForm::Exponential) {
    return detail::step_exponential_form(k, a, sys, x, h, solver);
  }
  StepResult out;

  Matrix delta;
  auto refresh_delta = [&](const Vector& anchor) {
    delta = delta_matrix(k, sys, anchor, h);
    ++out.stats.matfun_evals;
  };
  auto apply_delta = [&](const Vector& v) -> Vector {
    if (a == Anchor::None) return h * v;
    return delta * v;
  };

  if (a == Anchor::LEX) refresh_delta(x);

  if (k == Kernel::EEU) {
    out.state = x + apply_delta(sys.f(x));
    out.stats.iterations = 1;
    detail::require_finite_iterate(out.state);
    return out;
  }

  // F(x_n) enters the trapezoidal kernel every sweep; evaluate it once.
  Vector fn;
  if (k == Kernel::TR) fn = sys.f(x);
  auto kernel_value = [&](const Vector& xk) -> Vector {
    switch (k) {
      case Kernel::IEU: return sys.f(xk);
      case Kernel::IMP: return sys.f(0.5 * (x + xk));
      case Kernel::TR: return 0.5 * (fn + sys.f(xk));
      case Kernel::EEU: break;
    }
    throw std::logic_error("unreachable");
  };

  solver.validate();
  Vector xk = x;
  out.stats.converged = false;
  for (int it = 1; it <= solver.max_iter; ++it) {
    if (a == Anchor::ILEX) refresh_delta(xk);
    if (a == Anchor::SLEX) refresh_delta(0.5 * (x + xk));
    Vector next = x + apply_delta(kernel_value(xk));
    detail::require_finite_iterate(next);
    out.stats.residual = detail::max_abs_diff(next, xk);
    out.stats.iterations = it;
    xk = std::move(next);
    if (out.stats.residual <= solver.tol) {
      out.stats.converged = true;
      break;
    }
  }
  out.state = std::move(xk);
  return out;
}

}  // namespace lexint

#endif  // LEXINT_SCHEMES_HPP
