#ifndef LEXINT_MATFUN_HPP
#define LEXINT_MATFUN_HPP

// Dense real matrix functions used by the locally exact schemes: the
// exponential, phi1(z) = (e^z - 1)/z and tanhc(z) = tanh(z)/z. All of them are
// entire (or analytic near the origin) and are evaluated without ever
// inverting the argument, so a singular Jacobian is not a special case.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace lexint {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Base for every numerical failure raised by the library.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A matrix function result left the representable range.
class MatfunOverflow : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Linear solve against a matrix that is singular to working precision.
class SingularMatrix : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// e^{hM} + I is (nearly) singular, i.e. hM has an eigenvalue close to
/// i*pi*(2k+1). Carries the offending eigenvalue of hM.
class IllConditioned : public NumericalError {
 public:
  IllConditioned(const std::string& what, std::complex<double> eigenvalue)
      : NumericalError(what), eigenvalue_(eigenvalue) {}
  std::complex<double> eigenvalue() const { return eigenvalue_; }

 private:
  std::complex<double> eigenvalue_;
};

inline void require_square_finite(const Matrix& m, const char* who) {
  if (m.rows() < 1 || m.rows() != m.cols()) {
    throw std::invalid_argument(std::string(who) + ": matrix must be square with dim >= 1");
  }
  if (!m.allFinite()) {
    throw NumericalError(std::string(who) + ": non-finite matrix entry");
  }
}

namespace detail {

inline double norm1(const Matrix& m) { return m.cwiseAbs().colwise().sum().maxCoeff(); }

// Diagonal Pade coefficients b_k = (2q-k)! q! / ((2q)! k! (q-k)!), scaled so b_0 = 1.
inline double pade_coefficient(int q, int k) {
  long double c = 1.0L;
  for (int j = 1; j <= k; ++j) {
    c *= static_cast<long double>(q - j + 1) / static_cast<long double>((2 * q - j + 1) * j);
  }
  return static_cast<double>(c);
}

// Degrees and thresholds of Higham's scaling-and-squaring algorithm (2005).
inline constexpr int kPadeDegrees[] = {3, 5, 7, 9, 13};
inline constexpr double kPadeTheta[] = {1.495585217958292e-2, 2.539398330063230e-1,
                                        9.504178996162932e-1, 2.097847961257068e0,
                                        5.371920351148152e0};

inline Matrix pade_exp(const Matrix& a, int q) {
  const auto n = a.rows();
  const Matrix id = Matrix::Identity(n, n);
  const Matrix a2 = a * a;
  Matrix even_power = id;  // a^{2j}
  Matrix u_acc = Matrix::Zero(n, n);
  Matrix v_acc = Matrix::Zero(n, n);
  for (int k = 0; k <= q; k += 2) {
    v_acc += pade_coefficient(q, k) * even_power;
    if (k + 1 <= q) u_acc += pade_coefficient(q, k + 1) * even_power;
    even_power = even_power * a2;
  }
  const Matrix u = a * u_acc;
  const Matrix denom = v_acc - u;
  const Matrix numer = v_acc + u;
  return denom.partialPivLu().solve(numer);
}

struct ExpPhi {
  Matrix exp;
  Matrix phi1;
};

// phi1 by a truncated Taylor series on M/2^s followed by the doubling
// recurrences phi1(2X) = phi1(X)(e^X + I)/2 and e^{2X} = (e^X)^2.
inline ExpPhi exp_phi1(const Matrix& m) {
  const auto n = m.rows();
  const Matrix id = Matrix::Identity(n, n);
  const double nrm = norm1(m);
  int s = 0;
  if (nrm > 0.5) s = static_cast<int>(std::ceil(std::log2(nrm / 0.5)));
  const Matrix x = std::ldexp(1.0, -s) * m;

  // Horner: phi1(X) = sum_{k>=0} X^k/(k+1)!, 20 terms reach 0.5^20/21! < 1e-25.
  constexpr int kTerms = 20;
  Matrix phi = id / std::tgamma(kTerms + 2.0);
  for (int k = kTerms - 1; k >= 0; --k) {
    phi = id / std::tgamma(k + 2.0) + x * phi;
  }
  Matrix e = id + x * phi;
  for (int i = 0; i < s; ++i) {
    phi = 0.5 * phi * (e + id);
    e = e * e;
  }
  return {std::move(e), std::move(phi)};
}

inline void require_finite_result(const Matrix& r, const char* who) {
  if (!r.allFinite()) {
    throw MatfunOverflow(std::string(who) + ": result overflows double precision");
  }
}

}  // namespace detail

/// Matrix exponential by scaling and squaring with a diagonal Pade core.
inline Matrix expm(const Matrix& m) {
  require_square_finite(m, "expm");
  const double nrm = detail::norm1(m);
  Matrix r;
  for (int i = 0; i < 4; ++i) {
    if (nrm <= detail::kPadeTheta[i]) {
      r = detail::pade_exp(m, detail::kPadeDegrees[i]);
      detail::require_finite_result(r, "expm");
      return r;
    }
  }
  int s = 0;
  if (nrm > detail::kPadeTheta[4]) {
    s = static_cast<int>(std::ceil(std::log2(nrm / detail::kPadeTheta[4])));
  }
  r = detail::pade_exp(std::ldexp(1.0, -s) * m, 13);
  for (int i = 0; i < s; ++i) r = r * r;
  detail::require_finite_result(r, "expm");
  return r;
}

/// phi1(M) = sum M^k/(k+1)!; equals M^{-1}(e^M - I) whenever M is invertible.
inline Matrix phi1(const Matrix& m) {
  require_square_finite(m, "phi1");
  auto r = detail::exp_phi1(m);
  detail::require_finite_result(r.phi1, "phi1");
  return std::move(r.phi1);
}

/// Solve M X = B by LU with partial pivoting.
///
/// Throws SingularMatrix when the reciprocal condition estimate of M falls
/// below machine epsilon.
///
/// When m is a sum of terms of norm up to term_scale (e.g. I + X), a nonzero
/// term_scale also rejects m whose inverse is large on that scale, which
/// rcond alone cannot see when m is uniformly tiny.
template <typename Rhs>
auto solve_linear(const Matrix& m, const Eigen::MatrixBase<Rhs>& b, double term_scale = 0.0) {
  require_square_finite(m, "solve_linear");
  if (b.rows() != m.rows()) {
    throw std::invalid_argument("solve_linear: right-hand side does not conform");
  }
  using Result = typename Rhs::PlainObject;
  const Eigen::PartialPivLU<Matrix> lu(m);
  const double rcond = lu.rcond();
  if (!(rcond >= std::numeric_limits<double>::epsilon())) {
    throw SingularMatrix("solve_linear: matrix is singular to working precision (rcond=" +
                         std::to_string(rcond) + ")");
  }
  if (term_scale > 0.0) {
    const double inv_norm = 1.0 / (rcond * detail::norm1(m));
    if (!(inv_norm * term_scale * 64.0 * std::numeric_limits<double>::epsilon() <= 1.0)) {
      throw SingularMatrix("solve_linear: matrix is singular relative to the size of its terms");
    }
  }
  Result x = lu.solve(b.derived());
  if (!x.allFinite()) throw SingularMatrix("solve_linear: non-finite solution");
  return x;
}

/// tanhc(hM/2), with tanhc(z) = tanh(z)/z and tanhc(0) = 1.
///
/// Uses tanhc(Z) = 2 (e^{2Z} + I)^{-1} phi1(2Z), which needs no inverse of M.
/// Fails with IllConditioned when hM has an eigenvalue near i*pi*(2k+1).
inline Matrix tanhc_half(const Matrix& m, double h) {
  require_square_finite(m, "tanhc_half");
  if (!std::isfinite(h)) throw NumericalError("tanhc_half: non-finite step");
  const auto n = m.rows();
  if (h == 0.0) return Matrix::Identity(n, n);

  const Matrix hm = h * m;
  auto ep = detail::exp_phi1(hm);
  detail::require_finite_result(ep.exp, "tanhc_half");
  const Matrix bracket = ep.exp + Matrix::Identity(n, n);
  const Eigen::PartialPivLU<Matrix> lu(bracket);
  // ||bracket^{-1}|| measured against the size of its terms: e^{hM} + I can be
  // tiny yet perfectly conditioned on its own scale (e.g. near -I).
  const double inv_norm = 1.0 / (lu.rcond() * detail::norm1(bracket));
  const double scale = detail::norm1(ep.exp) + 1.0;
  if (!(inv_norm * scale * 64.0 * std::numeric_limits<double>::epsilon() <= 1.0)) {
    const Eigen::EigenSolver<Matrix> es(hm, false);
    std::complex<double> worst = es.eigenvalues()(0);
    double worst_gap = std::abs(std::exp(worst) + 1.0);
    for (Eigen::Index i = 1; i < es.eigenvalues().size(); ++i) {
      const auto ev = es.eigenvalues()(i);
      const double gap = std::abs(std::exp(ev) + 1.0);
      if (gap < worst_gap) {
        worst_gap = gap;
        worst = ev;
      }
    }
    throw IllConditioned("tanhc_half: e^{hM} + I is singular to working precision near eigenvalue (" +
                             std::to_string(worst.real()) + ", " + std::to_string(worst.imag()) +
                             ") of hM",
                         worst);
  }
  Matrix t = 2.0 * lu.solve(ep.phi1);
  detail::require_finite_result(t, "tanhc_half");
  return t;
}

}  // namespace lexint

#endif  // LEXINT_MATFUN_HPP
