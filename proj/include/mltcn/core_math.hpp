#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <span>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "mltcn/errors.hpp"

namespace mltcn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kProbFloor = 1e-12;
inline constexpr double kXiZero = 1e-6;

inline double clamp_probability(double p) {
  return std::clamp(p, kProbFloor, 1.0 - kProbFloor);
}

// Logistic function, clamped to [1e-12, 1 - 1e-12] so downstream logs stay finite.
inline double sigmoid(double x) {
  double p;
  if (x >= 0.0) {
    p = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    p = e / (1.0 + e);
  }
  return clamp_probability(p);
}

// Unclamped log sigma(x) = -log(1 + exp(-x)).
inline double log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

// Coefficient of the quadratic logistic bound, (1/2 - sigma(xi)) / (2 xi).
// Even in xi, strictly negative, with limit -1/8 at the origin.
inline double jaakkola_b(double xi) {
  const double a = std::abs(xi);
  if (a < kXiZero) return -0.125;
  // 1/2 - sigma(a) = -tanh(a/2)/2; tanh keeps precision for small a.
  return -std::tanh(0.5 * a) / (4.0 * a);
}

// B(xi) and the xi-only part of the logistic bound, log sig(xi) - xi/2 - B xi^2,
// sharing one exponential.
struct XiTerms {
  double b;
  double constant;
};

inline XiTerms xi_terms(double xi) {
  const double a = std::abs(xi);
  if (a < kXiZero) return {-0.125, log_sigmoid(a) - 0.5 * a + 0.125 * a * a};
  const double em = std::expm1(-a);            // exp(-a) - 1
  const double b = (em / (2.0 + em)) / (4.0 * a);  // -tanh(a/2) / (4a)
  return {b, -std::log1p(1.0 + em) - 0.5 * a - b * a * a};
}

// log(sum(exp(values))) with max shifting. Requires a non-empty input.
inline double log_sum_exp(std::span<const double> values) {
  assert(!values.empty());
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : values) hi = std::max(hi, v);
  if (values.size() == 1) return values[0];
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

inline double log_sum_exp(double a, double b) {
  const double hi = std::max(a, b);
  if (!std::isfinite(hi)) return hi;
  return hi + std::log(std::exp(a - hi) + std::exp(b - hi));
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

// Cholesky factor of a small symmetric positive definite matrix. Solves and
// the log-determinant share the same factorization.
class SpdFactor {
 public:
  SpdFactor() = default;

  explicit SpdFactor(const Matrix& a, const std::string& context = {}) {
    if (!compute(a)) throw NumericalBreakdown("matrix is not positive definite" + suffix(context));
  }

  // Non-throwing factorization; false when `a` is not numerically positive definite.
  bool compute(const Matrix& a) {
    if (a.rows() != a.cols()) return false;
    llt_.compute(a);
    if (llt_.info() != Eigen::Success) return false;
    const auto diag = llt_.matrixLLT().diagonal();
    log_det_ = 0.0;
    for (Eigen::Index k = 0; k < diag.size(); ++k) {
      if (!(diag[k] > 0.0) || !std::isfinite(diag[k])) return false;
      log_det_ += 2.0 * std::log(diag[k]);
    }
    return true;
  }

  Vector solve(const Vector& b) const { return llt_.solve(b); }
  Matrix solve(const Matrix& b) const { return llt_.solve(b); }
  Matrix inverse() const {
    const auto n = llt_.matrixLLT().rows();
    return llt_.solve(Matrix::Identity(n, n));
  }
  double log_det() const { return log_det_; }

 private:
  static std::string suffix(const std::string& context) {
    return context.empty() ? std::string{} : " (" + context + ")";
  }

  Eigen::LLT<Matrix> llt_;
  double log_det_ = 0.0;
};

struct SpdSolution {
  Vector x;
  double log_det;
};

inline SpdSolution solve_spd(const Matrix& a, const Vector& b,
                             const std::string& context = {}) {
  const SpdFactor f(a, context);
  return {f.solve(b), f.log_det()};
}

}  // namespace mltcn
