#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "mltcn/core_math.hpp"
#include "mltcn/rng.hpp"

using namespace mltcn;

TEST(Sigmoid, SymmetryPoint) { EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5); }

TEST(Sigmoid, Saturates) {
  EXPECT_NEAR(sigmoid(50.0), 1.0, 1e-12);
  EXPECT_NEAR(sigmoid(-50.0), 0.0, 1e-12);
  EXPECT_GE(sigmoid(-1000.0), 1e-12);
  EXPECT_LE(sigmoid(1000.0), 1.0 - 1e-12);
}

TEST(Sigmoid, MatchesDirectFormula) {
  EXPECT_NEAR(sigmoid(2.0), 1.0 / (1.0 + std::exp(-2.0)), 1e-15);
  EXPECT_NEAR(sigmoid(2.0), 0.8807970779778823, 1e-15);
}

TEST(Sigmoid, ComplementIdentity) {
  Rng rng(11);
  for (int k = 0; k < 2000; ++k) {
    const double x = rng.uniform(-40.0, 40.0);
    EXPECT_NEAR(sigmoid(x) + sigmoid(-x), 1.0, 1e-12) << x;
  }
}

TEST(LogSigmoid, StableInTails) {
  EXPECT_NEAR(log_sigmoid(0.0), std::log(0.5), 1e-15);
  EXPECT_NEAR(log_sigmoid(-800.0), -800.0, 1e-12);
  EXPECT_NEAR(log_sigmoid(800.0), 0.0, 1e-15);
  EXPECT_NEAR(log_sigmoid(3.0), std::log(1.0 / (1.0 + std::exp(-3.0))), 1e-14);
}

TEST(JaakkolaB, LimitAtZero) {
  EXPECT_DOUBLE_EQ(jaakkola_b(0.0), -0.125);
  EXPECT_LE(std::abs(jaakkola_b(1e-7) + 0.125), 1e-6);
  // Taylor: B(x) = -1/8 + x^2/96 + O(x^4).
  EXPECT_NEAR(jaakkola_b(1e-3), -0.125 + 1e-6 / 96.0, 1e-12);
}

TEST(JaakkolaB, DirectEvaluationAtOne) {
  const double direct = (0.5 - 1.0 / (1.0 + std::exp(-1.0))) / 2.0;
  EXPECT_NEAR(jaakkola_b(1.0), direct, 1e-15);
  EXPECT_NEAR(jaakkola_b(1.0), -0.11552928931500245, 1e-15);
}

TEST(JaakkolaB, EvenAndStrictlyNegative) {
  Rng rng(5);
  for (int k = 0; k < 2000; ++k) {
    const double x = rng.uniform(-60.0, 60.0);
    EXPECT_EQ(jaakkola_b(x), jaakkola_b(-x));
    EXPECT_LT(jaakkola_b(x), 0.0);
  }
  EXPECT_LT(jaakkola_b(1e6), 0.0);
}

TEST(XiTerms, AgreesWithSeparateFormulas) {
  for (double xi : {0.0, 1e-8, 1e-3, 0.5, 1.0, 3.0, 20.0, 200.0}) {
    const auto t = xi_terms(xi);
    const double b = jaakkola_b(xi);
    EXPECT_NEAR(t.b, b, 1e-15 + 1e-13 * std::abs(b)) << xi;
    const double constant = log_sigmoid(xi) - xi / 2.0 - b * xi * xi;
    EXPECT_NEAR(t.constant, constant, 1e-12 * (1.0 + std::abs(constant))) << xi;
  }
}

TEST(LogSumExp, Examples) {
  const std::vector<double> one{0.0};
  EXPECT_DOUBLE_EQ(log_sum_exp(one), 0.0);
  const std::vector<double> two{std::log(2.0), std::log(3.0)};
  EXPECT_NEAR(log_sum_exp(two), std::log(5.0), 1e-15);
  const std::vector<double> tiny{-1000.0, -1000.0};
  EXPECT_NEAR(log_sum_exp(tiny), -1000.0 + std::log(2.0), 1e-12);
  EXPECT_NEAR(log_sum_exp(-1000.0, -1000.0), -1000.0 + std::log(2.0), 1e-12);
}

TEST(LogSumExp, ShiftInvariance) {
  Rng rng(3);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> v(1 + rng.below(6));
    for (auto& x : v) x = rng.uniform(-50.0, 50.0);
    const double c = rng.uniform(-500.0, 500.0);
    std::vector<double> shifted = v;
    for (auto& x : shifted) x += c;
    EXPECT_NEAR(log_sum_exp(shifted), log_sum_exp(v) + c, 1e-10 * (1.0 + std::abs(c)));
  }
}

TEST(SolveSpd, Identity) {
  const Vector b = Vector::LinSpaced(3, -1.0, 2.0);
  const auto s = solve_spd(Matrix::Identity(3, 3), b);
  EXPECT_TRUE(s.x.isApprox(b));
  EXPECT_NEAR(s.log_det, 0.0, 1e-15);
}

TEST(SolveSpd, ScalarMatrix) {
  Vector b(2);
  b << 4.0, 6.0;
  const auto s = solve_spd(2.0 * Matrix::Identity(2, 2), b);
  EXPECT_NEAR(s.x[0], 2.0, 1e-15);
  EXPECT_NEAR(s.x[1], 3.0, 1e-15);
  EXPECT_NEAR(s.log_det, 2.0 * std::log(2.0), 1e-15);
}

TEST(SolveSpd, RandomResidual) {
  Rng rng(17);
  for (int k = 0; k < 50; ++k) {
    Matrix a(3, 3);
    for (Eigen::Index i = 0; i < 3; ++i)
      for (Eigen::Index j = 0; j < 3; ++j) a(i, j) = rng.normal();
    const Matrix spd = a * a.transpose() + 0.1 * Matrix::Identity(3, 3);
    Vector b(3);
    for (Eigen::Index i = 0; i < 3; ++i) b[i] = rng.normal();
    const auto s = solve_spd(spd, b);
    EXPECT_LE((spd * s.x - b).norm(), 1e-10);
    EXPECT_NEAR(s.log_det, std::log(spd.determinant()), 1e-9);
  }
}

TEST(SolveSpd, RejectsIndefiniteWithContext) {
  Matrix a(2, 2);
  a << 1.0, 2.0, 2.0, 1.0;
  try {
    solve_spd(a, Vector::Ones(2), "iteration 7");
    FAIL() << "expected NumericalBreakdown";
  } catch (const NumericalBreakdown& e) {
    EXPECT_NE(std::string(e.what()).find("iteration 7"), std::string::npos);
  }
  SpdFactor f;
  EXPECT_FALSE(f.compute(-Matrix::Identity(2, 2)));
  EXPECT_FALSE(f.compute(Matrix::Identity(2, 3)));
}

TEST(Rng, DeterministicAndSplittable) {
  Rng a(42), b(42);
  for (int k = 0; k < 100; ++k) EXPECT_EQ(a.next_u64(), b.next_u64());
  Rng s1 = Rng(42).split(3), s2 = Rng(42).split(3), s3 = Rng(42).split(4);
  EXPECT_EQ(s1.next_u64(), s2.next_u64());
  EXPECT_NE(Rng(42).split(3).next_u64(), s3.next_u64());
}

TEST(Rng, UniformAndNormalMoments) {
  Rng rng(8);
  const int n = 200000;
  double su = 0.0, sn = 0.0, sn2 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 5 * std::sqrt(1.0 / 12.0 / n));
  EXPECT_NEAR(sn / n, 0.0, 5 / std::sqrt(n));
  EXPECT_NEAR(sn2 / n, 1.0, 5 * std::sqrt(2.0 / n));
}

TEST(Rng, BelowIsInRangeAndUnbiased) {
  Rng rng(9);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int k = 0; k < n; ++k) ++counts[rng.below(7)];
  for (int c : counts) EXPECT_NEAR(c, n / 7.0, 5 * std::sqrt(n / 7.0));
}
