#ifndef LEXINT_GRADSCHEMES_HPP
#define LEXINT_GRADSCHEMES_HPP

// Energy-preserving discrete gradient schemes y_{n+1} - y_n = theta S gradbar H
// for canonical Hamiltonian systems, with theta = h I (classical) or the
// locally exact theta built from F' = S H_yy at an anchor point.

#include "lexint/matfun.hpp"
#include "lexint/schemes.hpp"
#include "lexint/systems.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace lexint {

enum class GradientKind {
  IA,   ///< Itoh-Abe coordinate increment
  SYM,  ///< symmetrized Itoh-Abe
};

inline const char* to_string(GradientKind k) { return k == GradientKind::IA ? "GR-IA" : "GR-SYM"; }

/// Relative size below which a coordinate increment is treated as zero and the
/// difference quotient is replaced by the analytic partial derivative.
inline constexpr double kIncrementDegeneracy = 1e-12;

/// Increments below this relative size take the difference quotient as the
/// mean of dH/dy^j over the segment (3-point Gauss-Legendre) instead of
/// dividing an energy difference by a small number.
inline constexpr double kSmallIncrement = 1e-3;

/// Coordinate increment (Itoh-Abe) discrete gradient in the fixed ordering
/// y = (x^1..x^m, p^1..p^m).
///
/// Component j is [H(yhat^j) - H(yhat^{j-1})] / (y1^j - y^j) where yhat^j takes
/// its first j coordinates from y1 and the rest from y. For small increments
/// the same quantity is evaluated as the integral of dH/dy^j along the
/// segment, exact for H polynomial of degree <= 6 in y^j; the quotient form
/// loses about eps*|H|/|increment| there, which stalls the fixed-point
/// iteration and leaks energy.
inline Vector itoh_abe_gradient(const HamiltonianSystem& hs, const Vector& y, const Vector& y1) {
  const auto d = y.size();
  if (d != hs.dim() || y1.size() != d) throw std::invalid_argument("itoh_abe_gradient: state size mismatch");
  Vector g(d);
  Vector yhat = y;
  double h_prev = hs.energy(yhat);
  // Gradient at yhat, reused while yhat has not moved.
  Vector grad_cache;
  bool cache_valid = false;
  for (Eigen::Index j = 0; j < d; ++j) {
    const double diff = y1(j) - y(j);
    if (std::abs(diff) <= kIncrementDegeneracy * std::max(1.0, std::abs(y(j)))) {
      if (!cache_valid) {
        grad_cache = hs.gradient(yhat);
        cache_valid = true;
      }
      g(j) = grad_cache(j);
      if (diff != 0.0) {
        yhat(j) = y1(j);
        h_prev = hs.energy(yhat);
        cache_valid = false;
      }
      continue;
    }
    if (std::abs(diff) <= kSmallIncrement * std::max(1.0, std::abs(y(j)))) {
      constexpr double kNode = 0.38729833462074168852;  // sqrt(15)/10
      const double start = yhat(j);
      double mean = 0.0;
      for (const auto& [node, weight] : {std::pair{0.5 - kNode, 5.0 / 18.0}, std::pair{0.5, 8.0 / 18.0},
                                        std::pair{0.5 + kNode, 5.0 / 18.0}}) {
        yhat(j) = start + node * diff;
        mean += weight * hs.gradient(yhat)(j);
      }
      g(j) = mean;
      yhat(j) = y1(j);
      h_prev = hs.energy(yhat);
      cache_valid = false;
      continue;
    }
    yhat(j) = y1(j);
    const double h_next = hs.energy(yhat);
    g(j) = (h_next - h_prev) / diff;
    h_prev = h_next;
    cache_valid = false;
  }
  return g;
}

/// (gradbar H(y, y1) + gradbar H(y1, y)) / 2; symmetric in its arguments.
inline Vector symmetric_gradient(const HamiltonianSystem& hs, const Vector& y, const Vector& y1) {
  return 0.5 * (itoh_abe_gradient(hs, y, y1) + itoh_abe_gradient(hs, y1, y));
}

inline Vector discrete_gradient(GradientKind k, const HamiltonianSystem& hs, const Vector& y, const Vector& y1) {
  return k == GradientKind::IA ? itoh_abe_gradient(hs, y, y1) : symmetric_gradient(hs, y, y1);
}

/// Linearization of the Itoh-Abe gradient about ybar:
/// gradbar H(y_n, y_{n+1}) ~ H_y + A nu_{n+1} + B nu_n with nu = y - ybar.
struct LinearizationMatrices {
  Matrix a;  ///< lower triangle of H_yy with halved diagonal
  Matrix b;  ///< A^T
  Matrix r;  ///< A - B, skew-symmetric
};

inline LinearizationMatrices linearization_matrices_from_hessian(const Matrix& hyy) {
  const auto d = hyy.rows();
  Matrix a = Matrix::Zero(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    a(j, j) = 0.5 * hyy(j, j);
    for (Eigen::Index k = 0; k < j; ++k) a(j, k) = hyy(j, k);
  }
  Matrix b = a.transpose();
  Matrix r = a - b;
  return {std::move(a), std::move(b), std::move(r)};
}

inline LinearizationMatrices linearization_matrices(const HamiltonianSystem& hs, const Vector& ybar) {
  return linearization_matrices_from_hessian(hs.hessian(ybar));
}

/// A 2m x 2m step matrix replacing h I in the discrete gradient scheme. The
/// scheme conserves H whenever theta S is skew-symmetric.
struct ThetaMatrix {
  Matrix entries;

  /// max |theta^T - S^{-1} theta S|
  double structure_defect(const SymplecticForm& s) const {
    // S^{-1} = -S
    const Matrix rhs = -s.left_multiply(s.right_multiply(entries));
    return (entries.transpose() - rhs).cwiseAbs().maxCoeff();
  }
  /// max |theta S + (theta S)^T|
  double skew_defect(const SymplecticForm& s) const {
    const Matrix ts = s.right_multiply(entries);
    return (ts + ts.transpose()).cwiseAbs().maxCoeff();
  }
};

/// theta = h tanhc(hF'/2) for the symmetric gradient, F' = S H_yy at the anchor.
inline ThetaMatrix theta_sym_from_hessian(const Matrix& hyy, double h) {
  const SymplecticForm s(static_cast<int>(hyy.rows() / 2));
  return {h * tanhc_half(s.left_multiply(hyy), h)};
}

/// theta = h T (I + h S R T / 2)^{-1} with T = tanhc(hF'/2), for the Itoh-Abe
/// gradient. Equal to 2 (S R + F' coth(hF'/2))^{-1} when F' is invertible.
inline ThetaMatrix theta_ia_from_hessian(const Matrix& hyy, double h) {
  const auto d = hyy.rows();
  const SymplecticForm s(static_cast<int>(d / 2));
  const Matrix t = tanhc_half(s.left_multiply(hyy), h);
  const Matrix r = linearization_matrices_from_hessian(hyy).r;
  const Matrix update = 0.5 * h * s.left_multiply(r) * t;
  const Matrix bracket = Matrix::Identity(d, d) + update;
  try {
    // theta = h T bracket^{-1}  <=>  bracket^T theta^T = h T^T
    const Matrix theta_t =
        solve_linear(Matrix(bracket.transpose()), Matrix(t.transpose()), 1.0 + detail::norm1(update));
    return {h * theta_t.transpose()};
  } catch (const SingularMatrix& e) {
    throw StepFailure(std::string("theta_ia: singular bracket at this step size: ") + e.what());
  }
}

inline ThetaMatrix theta_sym(const HamiltonianSystem& hs, const Vector& ybar, double h) {
  return theta_sym_from_hessian(hs.hessian(ybar), h);
}

inline ThetaMatrix theta_ia(const HamiltonianSystem& hs, const Vector& ybar, double h) {
  return theta_ia_from_hessian(hs.hessian(ybar), h);
}

/// One step of a discrete gradient scheme, solved by fixed-point iteration
/// from y_n. Anchor::None gives GR-IA / GR-SYM; LEX and SLEX give the locally
/// exact variants, with theta refreshed every sweep for SLEX.
inline StepResult gradient_step(GradientKind kind, Anchor anchor, const HamiltonianSystem& hs, const Vector& y,
                                double h, const SolverSettings& solver = {}) {
  if (anchor == Anchor::ILEX) throw std::invalid_argument("gradient schemes support anchors None, LEX, SLEX");
  solver.validate();
  const SymplecticForm s(hs.dof());
  StepResult out;

  // Lambda = theta S; exactly skew in exact arithmetic, so only round-off is
  // removed by taking the skew part.
  Matrix lambda;
  auto refresh = [&](const Vector& ybar) {
    const Matrix hyy = hs.hessian(ybar);
    const ThetaMatrix th = kind == GradientKind::IA ? theta_ia_from_hessian(hyy, h) : theta_sym_from_hessian(hyy, h);
    const Matrix ts = s.right_multiply(th.entries);
    lambda = 0.5 * (ts - ts.transpose());
    ++out.stats.matfun_evals;
  };
  if (anchor == Anchor::LEX) refresh(y);

  Vector yk = y;
  out.stats.converged = false;
  for (int it = 1; it <= solver.max_iter; ++it) {
    if (anchor == Anchor::SLEX) refresh(0.5 * (y + yk));
    const Vector g = discrete_gradient(kind, hs, y, yk);
    Vector next = anchor == Anchor::None ? Vector(y + h * s.apply(g)) : Vector(y + lambda * g);
    detail::require_finite_iterate(next);
    out.stats.residual = detail::max_abs_diff(next, yk);
    out.stats.iterations = it;
    yk = std::move(next);
    if (out.stats.residual <= solver.tol) {
      out.stats.converged = true;
      break;
    }
  }
  out.state = std::move(yk);
  return out;
}

namespace detail {

// tan(sqrt(s))/sqrt(s) continued to s <= 0 as tanh(sqrt(-s))/sqrt(-s).
inline double tanc_sqrt(double s) {
  if (std::abs(s) < 1e-8) return 1.0 + s / 3.0;
  if (s > 0.0) {
    const double r = std::sqrt(s);
    return std::tan(r) / r;
  }
  const double r = std::sqrt(-s);
  return std::tanh(r) / r;
}

}  // namespace detail

/// Closed-form increment of GR-IA-LEX/SLEX for H = |p|^2/2 + V(x) with two
/// degrees of freedom, evaluated on a given pair (y_n, y_{n+1}):
///
///   x_{n+1} - x_n = h D pbar
///   p_{n+1} - p_n = -h D gradbar V - (h^2/2) det(D) V_12 J pbar,  J = [[0, 1], [-1, 0]]
///
/// with pbar = (p_n + p_{n+1})/2, D = tanc(h Omega / 2), Omega^2 = V_xx at the
/// anchor. Diagnostic only: it cross-checks the general theta path.
inline Vector separable_2dof_increment(const HamiltonianSystem& hs, const Vector& yn, const Vector& yn1,
                                       const Vector& anchor, double h) {
  if (hs.dof() != 2) throw std::invalid_argument("separable_2dof_increment: needs m = 2");
  const Matrix vxx = hs.hessian(anchor).topLeftCorner(2, 2);
  const Eigen::SelfAdjointEigenSolver<Matrix> es(vxx);
  Vector dvals(2);
  for (int i = 0; i < 2; ++i) dvals(i) = detail::tanc_sqrt(0.25 * h * h * es.eigenvalues()(i));
  const Matrix dmat = es.eigenvectors() * dvals.asDiagonal() * es.eigenvectors().transpose();

  const Vector pbar = 0.5 * (yn.tail(2) + yn1.tail(2));
  const Vector gradbar_v = itoh_abe_gradient(hs, yn, yn1).head(2);
  Matrix jrot(2, 2);
  jrot << 0.0, 1.0, -1.0, 0.0;

  Vector inc(4);
  inc.head(2) = h * dmat * pbar;
  inc.tail(2) = -h * dmat * gradbar_v - 0.5 * h * h * dmat.determinant() * vxx(0, 1) * jrot * pbar;
  return inc;
}

}  // namespace lexint

#endif  // LEXINT_GRADSCHEMES_HPP
