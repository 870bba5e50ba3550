#ifndef LEXINT_SYSTEMS_HPP
#define LEXINT_SYSTEMS_HPP

#include "lexint/matfun.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lexint {

/// Evaluation counts accumulated over one run.
struct CostTally {
  std::uint64_t f_evals = 0;
  std::uint64_t jac_evals = 0;
  std::uint64_t h_evals = 0;
  std::uint64_t grad_evals = 0;
  std::uint64_t hess_evals = 0;
  std::uint64_t matfun_evals = 0;

  CostTally& operator+=(const CostTally& o) {
    f_evals += o.f_evals;
    jac_evals += o.jac_evals;
    h_evals += o.h_evals;
    grad_evals += o.grad_evals;
    hess_evals += o.hess_evals;
    matfun_evals += o.matfun_evals;
    return *this;
  }
  friend bool operator==(const CostTally&, const CostTally&) = default;
};

/// Autonomous system x' = F(x) with an analytic Jacobian.
///
/// Copies share the evaluators but carry their own counters, so concurrent
/// runs should each work on a copy.
class OdeSystem {
 public:
  using Field = std::function<Vector(const Vector&)>;
  using Jacobian = std::function<Matrix(const Vector&)>;

  OdeSystem(int dim, Field f, Jacobian jac) : dim_(dim), f_(std::move(f)), jac_(std::move(jac)) {
    if (dim_ < 1) throw std::invalid_argument("OdeSystem: dim must be >= 1");
  }

  int dim() const { return dim_; }

  Vector f(const Vector& x) const {
    ++tally_.f_evals;
    return f_(x);
  }
  Matrix jac(const Vector& x) const {
    ++tally_.jac_evals;
    return jac_(x);
  }

  const CostTally& counters() const { return tally_; }
  void reset_counters() const { tally_ = {}; }

 private:
  int dim_;
  Field f_;
  Jacobian jac_;
  mutable CostTally tally_;
};

/// x' = A x + b.
struct LinearSystem {
  Matrix a;
  Vector b;

  LinearSystem(Matrix a_in, Vector b_in) : a(std::move(a_in)), b(std::move(b_in)) {
    if (a.rows() != a.cols() || a.rows() != b.size() || a.rows() < 1) {
      throw std::invalid_argument("LinearSystem: dimensions do not conform");
    }
  }
  explicit LinearSystem(Matrix a_in) : LinearSystem(a_in, Vector::Zero(a_in.rows())) {}

  int dim() const { return static_cast<int>(a.rows()); }

  OdeSystem to_ode() const {
    return OdeSystem(
        dim(), [a = a, b = b](const Vector& x) -> Vector { return a * x + b; },
        [a = a](const Vector&) -> Matrix { return a; });
  }
};

/// The canonical form S = [[0, I], [-I, 0]] on y = (x, p).
class SymplecticForm {
 public:
  explicit SymplecticForm(int m) : m_(m) {
    if (m_ < 1) throw std::invalid_argument("SymplecticForm: m must be >= 1");
  }
  int dof() const { return m_; }

  Matrix matrix() const {
    Matrix s = Matrix::Zero(2 * m_, 2 * m_);
    s.topRightCorner(m_, m_).setIdentity();
    s.bottomLeftCorner(m_, m_) = -Matrix::Identity(m_, m_);
    return s;
  }
  // S v = (v_p, -v_x)
  Vector apply(const Vector& v) const {
    Vector r(2 * m_);
    r.head(m_) = v.tail(m_);
    r.tail(m_) = -v.head(m_);
    return r;
  }
  // M S, column-block shuffle without a product.
  Matrix right_multiply(const Matrix& mat) const {
    Matrix r(mat.rows(), 2 * m_);
    r.leftCols(m_) = -mat.rightCols(m_);
    r.rightCols(m_) = mat.leftCols(m_);
    return r;
  }
  // S M
  Matrix left_multiply(const Matrix& mat) const {
    Matrix r(2 * m_, mat.cols());
    r.topRows(m_) = mat.bottomRows(m_);
    r.bottomRows(m_) = -mat.topRows(m_);
    return r;
  }

 private:
  int m_;
};

struct HessianBlocks {
  Matrix xx, xp, px, pp;
};

/// Canonical Hamiltonian system with m degrees of freedom. All evaluators
/// take the packed state y = (x^1..x^m, p^1..p^m).
class HamiltonianSystem {
 public:
  using Energy = std::function<double(const Vector&)>;
  using Gradient = std::function<Vector(const Vector&)>;
  using Hessian = std::function<Matrix(const Vector&)>;

  HamiltonianSystem(int m, Energy h, Gradient grad, Hessian hess)
      : m_(m), h_(std::move(h)), grad_(std::move(grad)), hess_(std::move(hess)) {
    if (m_ < 1) throw std::invalid_argument("HamiltonianSystem: m must be >= 1");
  }

  int dof() const { return m_; }
  int dim() const { return 2 * m_; }
  SymplecticForm symplectic() const { return SymplecticForm(m_); }

  double energy(const Vector& y) const {
    ++tally_.h_evals;
    return h_(y);
  }
  double energy(const Vector& x, const Vector& p) const { return energy(pack(x, p)); }
  Vector gradient(const Vector& y) const {
    ++tally_.grad_evals;
    return grad_(y);
  }
  Matrix hessian(const Vector& y) const {
    ++tally_.hess_evals;
    return hess_(y);
  }
  HessianBlocks hessian_blocks(const Vector& y) const {
    const Matrix hyy = hessian(y);
    return {hyy.topLeftCorner(m_, m_), hyy.topRightCorner(m_, m_), hyy.bottomLeftCorner(m_, m_),
            hyy.bottomRightCorner(m_, m_)};
  }

  // Diagnostic evaluation that does not count towards the run cost.
  double energy_uncounted(const Vector& y) const { return h_(y); }

  const CostTally& counters() const { return tally_; }
  void reset_counters() const { tally_ = {}; }

  Vector pack(const Vector& x, const Vector& p) const {
    Vector y(2 * m_);
    y << x, p;
    return y;
  }

  /// The induced vector field F = S grad H with Jacobian F' = S H_yy.
  /// Counts land on the returned OdeSystem, not on this object.
  friend OdeSystem hamiltonian_to_ode(const HamiltonianSystem& hs) {
    const SymplecticForm s(hs.m_);
    return OdeSystem(
        hs.dim(), [s, grad = hs.grad_](const Vector& y) -> Vector { return s.apply(grad(y)); },
        [s, hess = hs.hess_](const Vector& y) -> Matrix { return s.left_multiply(hess(y)); });
  }

 private:
  int m_;
  Energy h_;
  Gradient grad_;
  Hessian hess_;
  mutable CostTally tally_;
};

OdeSystem hamiltonian_to_ode(const HamiltonianSystem& hs);

/// Affine model of sys about the anchor: A = F'(anchor), b = F(anchor) - A anchor.
inline LinearSystem linearize(const OdeSystem& sys, const Vector& anchor) {
  Matrix a = sys.jac(anchor);
  Vector b = sys.f(anchor) - a * anchor;
  return LinearSystem(std::move(a), std::move(b));
}

// ---------------------------------------------------------------------------
// Built-in problems

/// H = |p|^2/2 + |x|^2/2 - |x|^3/30 on R^2 x R^2.
inline HamiltonianSystem anharmonic2d() {
  auto energy = [](const Vector& y) {
    const double r = y.head(2).norm();
    return 0.5 * y.tail(2).squaredNorm() + 0.5 * r * r - r * r * r / 30.0;
  };
  auto grad = [](const Vector& y) -> Vector {
    const double r = y.head(2).norm();
    Vector g(4);
    g.head(2) = (1.0 - 0.1 * r) * y.head(2);
    g.tail(2) = y.tail(2);
    return g;
  };
  // The Hessian of -r^3/30 is -(r I + x x^T / r)/10, which tends to 0 at x = 0.
  auto hess = [](const Vector& y) -> Matrix {
    const Vector x = y.head(2);
    const double r = x.norm();
    Matrix h = Matrix::Identity(4, 4);
    if (r > 0.0) {
      h.topLeftCorner(2, 2) -= 0.1 * (r * Matrix::Identity(2, 2) + x * x.transpose() / r);
    }
    return h;
  };
  return HamiltonianSystem(2, energy, grad, hess);
}

/// H = (x^2 + p^2)/2.
inline HamiltonianSystem harmonic1d() {
  return HamiltonianSystem(
      1, [](const Vector& y) { return 0.5 * y.squaredNorm(); }, [](const Vector& y) -> Vector { return y; },
      [](const Vector&) -> Matrix { return Matrix::Identity(2, 2); });
}

/// H = p^2/2 + x^2/2 + eps x^4/4.
inline HamiltonianSystem quartic1d(double eps = 1.0) {
  return HamiltonianSystem(
      1,
      [eps](const Vector& y) {
        const double x = y(0), p = y(1);
        return 0.5 * p * p + 0.5 * x * x + 0.25 * eps * x * x * x * x;
      },
      [eps](const Vector& y) -> Vector {
        Vector g(2);
        g << y(0) + eps * y(0) * y(0) * y(0), y(1);
        return g;
      },
      [eps](const Vector& y) -> Matrix {
        Matrix h = Matrix::Zero(2, 2);
        h(0, 0) = 1.0 + 3.0 * eps * y(0) * y(0);
        h(1, 1) = 1.0;
        return h;
      });
}

/// H = y^T Q y / 2 + c^T y for symmetric Q; its flow is linear.
inline HamiltonianSystem quadratic_hamiltonian(Matrix q, Vector c) {
  if (q.rows() != q.cols() || q.rows() % 2 != 0 || c.size() != q.rows()) {
    throw std::invalid_argument("quadratic_hamiltonian: Q must be 2m x 2m and symmetric");
  }
  const int m = static_cast<int>(q.rows() / 2);
  Matrix qs = 0.5 * (q + q.transpose());
  return HamiltonianSystem(
      m, [qs, c](const Vector& y) { return 0.5 * y.dot(qs * y) + c.dot(y); },
      [qs, c](const Vector& y) -> Vector { return qs * y + c; }, [qs](const Vector&) -> Matrix { return qs; });
}

/// Angular frequency of the circular orbit of radius R of anharmonic2d.
inline double circular_frequency(double radius) {
  if (!(radius > 0.0 && radius < 10.0)) {
    throw std::invalid_argument("circular orbits exist only for 0 < R < 10");
  }
  return std::sqrt(1.0 - 0.1 * radius);
}

inline double circular_period(double radius) { return 2.0 * std::numbers::pi / circular_frequency(radius); }

/// x0 = (R, 0), p0 = (0, R sqrt(1 - R/10)).
inline Vector circular_initial_state(double radius) {
  Vector y(4);
  y << radius, 0.0, 0.0, radius * circular_frequency(radius);
  return y;
}

/// Closed-form state on the circular orbit of radius R at time t.
inline Vector circular_orbit_state(double radius, double t) {
  const double w = circular_frequency(radius);
  Vector y(4);
  y << radius * std::cos(w * t), radius * std::sin(w * t), -radius * w * std::sin(w * t),
      radius * w * std::cos(w * t);
  return y;
}

/// A system bundle: the vector field, and its Hamiltonian when there is one.
struct Problem {
  std::string name;
  OdeSystem ode;
  std::optional<HamiltonianSystem> hamiltonian;
  Vector initial_state;

  static Problem from_hamiltonian(std::string name, HamiltonianSystem hs, Vector y0) {
    OdeSystem ode = hamiltonian_to_ode(hs);
    return Problem{std::move(name), std::move(ode), std::move(hs), std::move(y0)};
  }
  static Problem from_ode(std::string name, OdeSystem ode, Vector x0) {
    return Problem{std::move(name), std::move(ode), std::nullopt, std::move(x0)};
  }
};

/// Named problem factories. Users may register their own.
class SystemRegistry {
 public:
  using Factory = std::function<Problem()>;

  void add(const std::string& name, Factory factory) { factories_[name] = std::move(factory); }

  bool contains(const std::string& name) const { return factories_.count(name) != 0; }

  Problem make(const std::string& name) const {
    auto it = factories_.find(name);
    if (it == factories_.end()) {
      std::string valid;
      for (const auto& [k, v] : factories_) valid += (valid.empty() ? "" : ", ") + k;
      throw std::invalid_argument("unknown system '" + name + "'; valid: " + valid);
    }
    return it->second();
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : factories_) out.push_back(k);
    return out;
  }

  static SystemRegistry builtin() {
    SystemRegistry reg;
    reg.add("anharmonic2d",
            [] { return Problem::from_hamiltonian("anharmonic2d", anharmonic2d(), circular_initial_state(1.0)); });
    reg.add("harmonic1d", [] {
      Vector y0(2);
      y0 << 1.0, 0.0;
      return Problem::from_hamiltonian("harmonic1d", harmonic1d(), y0);
    });
    reg.add("quartic1d", [] {
      Vector y0(2);
      y0 << 1.0, 0.0;
      return Problem::from_hamiltonian("quartic1d", quartic1d(), y0);
    });
    // Lightly damped forced rotation.
    reg.add("linear", [] {
      Matrix a(2, 2);
      a << -0.1, 1.0, -1.0, -0.1;
      Vector b(2);
      b << 0.5, 0.0;
      Vector x0(2);
      x0 << 1.0, 0.0;
      return Problem::from_ode("linear", LinearSystem(a, b).to_ode(), x0);
    });
    return reg;
  }

 private:
  std::map<std::string, Factory> factories_;
};

}  // namespace lexint

#endif  // LEXINT_SYSTEMS_HPP
