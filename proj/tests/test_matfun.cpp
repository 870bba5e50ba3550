#include "lexint/matfun.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace lexint;
using namespace lexint::testing;

namespace {

constexpr double kPi = std::numbers::pi;

TEST(Expm, ZeroIsIdentity) { EXPECT_EQ(expm(Matrix::Zero(2, 2)), Matrix::Identity(2, 2)); }

TEST(Expm, HalfTurnRotation) {
  const Matrix e = expm(kPi * rotation_generator());
  EXPECT_LT(max_abs(e + Matrix::Identity(2, 2)), 1e-14);
  EXPECT_LT(max_abs(e - expm_series(kPi * rotation_generator())), 1e-14);
}

TEST(Expm, ScalarLog2) {
  const Matrix e = expm(Matrix::Constant(1, 1, std::log(2.0)));
  EXPECT_NEAR(e(0, 0), 2.0, 4e-16);
}

TEST(Expm, MatchesSeriesOracleAcrossNorms) {
  std::mt19937_64 rng(11);
  for (double scale : {1e-3, 0.1, 1.0, 3.0, 10.0}) {
    for (int n = 1; n <= 6; ++n) {
      const Matrix m = random_matrix(rng, n, scale / n);
      EXPECT_LT(rel_diff(expm(m), expm_series(m)), 1e-13) << "scale " << scale << " n " << n;
    }
  }
}

TEST(Expm, LargeNormDiagonalizable) {
  // ||M|| up to 50: compare with V e^D V^-1 from a well-conditioned basis.
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 4;
    Matrix q = Eigen::HouseholderQR<Matrix>(random_matrix(rng, n)).householderQ();
    Vector d = random_vector(rng, n, 15.0);
    const Matrix m = q * d.asDiagonal() * q.transpose();
    const Matrix exact = q * d.array().exp().matrix().asDiagonal() * q.transpose();
    EXPECT_LT(rel_diff(expm(m), exact), 1e-13);
  }
}

TEST(Expm, InverseProperty) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 8;
    std::uniform_real_distribution<double> u(0.0, 5.0);
    Matrix m = random_matrix(rng, n);
    m *= u(rng) / m.norm();
    EXPECT_LT(max_abs(expm(m) * expm(-m) - Matrix::Identity(n, n)), 1e-12);
  }
}

TEST(Expm, SkewGivesOrthogonal) {
  std::mt19937_64 rng(2);
  for (int n = 2; n <= 8; ++n) {
    const Matrix a = random_matrix(rng, n, 2.0);
    const Matrix skew = a - a.transpose();
    const Matrix e = expm(skew);
    EXPECT_LT(max_abs(e.transpose() * e - Matrix::Identity(n, n)), 1e-12);
  }
}

TEST(Expm, OverflowIsExplicit) {
  EXPECT_THROW(expm(Matrix::Constant(1, 1, 1000.0)), MatfunOverflow);
  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 1) = std::nan("");
  EXPECT_THROW(expm(bad), NumericalError);
}

TEST(Phi1, ZeroIsIdentity) { EXPECT_EQ(phi1(Matrix::Zero(3, 3)), Matrix::Identity(3, 3)); }

TEST(Phi1, ScalarOne) {
  const Matrix p = phi1(Matrix::Constant(1, 1, 1.0));
  EXPECT_NEAR(p(0, 0), std::exp(1.0) - 1.0, 4e-16);
  EXPECT_NEAR(p(0, 0), phi1_series(Matrix::Constant(1, 1, 1.0))(0, 0), 4e-16);
}

TEST(Phi1, HalfTurnRotation) {
  const Matrix m = kPi * rotation_generator();
  const Matrix expected = (2.0 / kPi) * rotation_generator();
  EXPECT_LT(max_abs(phi1(m) - expected), 1e-14);
  EXPECT_LT(max_abs(phi1_series(m) - expected), 1e-14);
}

TEST(Phi1, MatchesSeriesOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 1 + trial % 6;
    const Matrix m = random_matrix(rng, n, 1.5 / n);
    EXPECT_LT(rel_diff(phi1(m), phi1_series(m)), 1e-13);
  }
}

TEST(Phi1, DefiningIdentityIncludingSingular) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 8;
    std::uniform_real_distribution<double> u(0.0, 5.0);
    Matrix m = random_matrix(rng, n);
    m *= u(rng) / m.norm();
    if (trial % 10 == 0) m.col(0).setZero();  // singular
    if (trial % 25 == 0) m.setZero();
    EXPECT_LT(max_abs(m * phi1(m) - (expm(m) - Matrix::Identity(n, n))), 1e-12);
  }
}

TEST(Phi1, NilpotentHasNoInverse) {
  Matrix n = Matrix::Zero(2, 2);
  n(0, 1) = 3.0;
  Matrix expected = Matrix::Identity(2, 2);
  expected(0, 1) = 1.5;  // I + N/2
  EXPECT_LT(max_abs(phi1(n) - expected), 1e-15);
}

TEST(TanhcHalf, ZeroStep) {
  std::mt19937_64 rng(6);
  EXPECT_EQ(tanhc_half(random_matrix(rng, 3), 0.0), Matrix::Identity(3, 3));
}

TEST(TanhcHalf, Scalar) {
  const Matrix t = tanhc_half(Matrix::Constant(1, 1, 2.0), 1.0);
  EXPECT_NEAR(t(0, 0), std::tanh(1.0), 1e-15);
}

TEST(TanhcHalf, SkewBlockGivesTan) {
  for (double omega : {0.3, 1.0, 2.5}) {
    const double h = 1.0 / omega;  // h omega = 1
    const Matrix t = tanhc_half(omega * rotation_generator(), h);
    const double expected = std::tan(0.5) / 0.5;
    EXPECT_LT(max_abs(t - expected * Matrix::Identity(2, 2)), 1e-14);
  }
}

TEST(TanhcHalf, SeriesRoute) {
  // tanhc(Z) = 2 (e^{2Z} + I)^{-1} phi1(2Z) evaluated with the naive oracles.
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 5;
    const Matrix m = random_matrix(rng, n, 1.0 / n);
    const double h = 0.7;
    const Matrix hm = h * m;
    const Matrix oracle =
        2.0 * (expm_series(hm) + Matrix::Identity(n, n)).partialPivLu().solve(phi1_series(hm));
    EXPECT_LT(rel_diff(tanhc_half(m, h), oracle), 1e-13);
  }
}

TEST(TanhcHalf, CommutesWithArgument) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + trial % 6;
    const Matrix m = random_matrix(rng, n, 1.0);
    const Matrix t = tanhc_half(m, 0.5);
    EXPECT_LT(max_abs(m * t - t * m), 1e-12);
  }
}

TEST(TanhcHalf, PoleIsReported) {
  // h M with eigenvalues +-i pi makes e^{hM} + I singular.
  try {
    tanhc_half(rotation_generator(), kPi);
    FAIL() << "expected IllConditioned";
  } catch (const IllConditioned& e) {
    EXPECT_NEAR(std::abs(e.eigenvalue().imag()), kPi, 1e-9);
    EXPECT_NEAR(e.eigenvalue().real(), 0.0, 1e-9);
  }
}

TEST(SolveLinear, Trivial) {
  std::mt19937_64 rng(9);
  const Matrix b = random_matrix(rng, 3);
  EXPECT_EQ(solve_linear(Matrix::Identity(3, 3), b), b);
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 2.0;
  d(1, 1) = 4.0;
  Vector rhs(2);
  rhs << 1.0, 2.0;
  const Vector x = solve_linear(d, rhs);
  EXPECT_DOUBLE_EQ(x(0), 0.5);
  EXPECT_DOUBLE_EQ(x(1), 0.5);
}

TEST(SolveLinear, ResidualWellConditioned) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix m = random_matrix(rng, 6) + 4.0 * Matrix::Identity(6, 6);
    const Vector b = random_vector(rng, 6);
    const Vector x = solve_linear(m, b);
    EXPECT_LE((m * x - b).norm(), 1e-12 * b.norm());
  }
}

TEST(SolveLinear, SingularIsExplicit) {
  Matrix m = Matrix::Ones(3, 3);
  EXPECT_THROW(solve_linear(m, Vector::Ones(3)), SingularMatrix);
  EXPECT_THROW(solve_linear(Matrix::Identity(2, 2), Vector::Ones(3)), std::invalid_argument);
}

TEST(Matfun, Deterministic) {
  std::mt19937_64 rng(12);
  const Matrix m = random_matrix(rng, 5, 3.0);
  EXPECT_EQ(expm(m), expm(m));
  EXPECT_EQ(phi1(m), phi1(m));
  EXPECT_EQ(tanhc_half(m, 0.3), tanhc_half(m, 0.3));
}

}  // namespace
