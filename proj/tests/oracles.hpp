#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Written directly from the definitions, sharing no code with the library
// beyond basic types.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

// Rand index by enumerating every pair.
inline double rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size();
  std::int64_t agree = 0, total = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      ++total;
      agree += ((a[i] == a[j]) == (b[i] == b[j])) ? 1 : 0;
    }
  return static_cast<double>(agree) / static_cast<double>(total);
}

// Adjusted Rand index from pair counts gathered by enumeration:
//   (both - ea*eb/total) / ((ea + eb)/2 - ea*eb/total),
// with 0/0 read as 1.
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size();
  double both = 0, ea = 0, eb = 0, total = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      ++total;
      const bool sa = a[i] == a[j], sb = b[i] == b[j];
      ea += sa;
      eb += sb;
      both += sa && sb;
    }
  const double expected = ea * eb / total;
  const double max = 0.5 * (ea + eb);
  if (max - expected == 0.0) return 1.0;
  return (both - expected) / (max - expected);
}

// Golden-section search for the maximum of a unimodal f on [lo, hi].
inline double golden_section_max(const std::function<double(double)>& f, double lo, double hi,
                                 double tol = 1e-12) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol * (1.0 + std::abs(a) + std::abs(b))) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// Expected complete-data log-likelihood terms in eta for one component.
inline double eta_objective(double s, double t, double d, double eta) {
  return -0.5 * d * s * std::log(eta) - t / (2.0 * eta);
}

// Plain variational latent trait model for a single component with
// observation weights: the standard N(0, I) latent prior, no contamination.
struct PlainLatentTrait {
  using Mat = Eigen::MatrixXd;
  using Vec = Eigen::VectorXd;

  Mat x;       // n x M
  Vec weight;  // n
  Vec alpha;   // M
  Mat w;       // M x D
  Mat xi;      // n x M
  std::vector<Mat> sigma;
  Mat mu;  // n x D

  static double lambda(double xi) {
    // B(xi) = (1/2 - sigma(xi)) / (2 xi), limit -1/8.
    if (std::abs(xi) < 1e-6) return -0.125;
    return (0.5 - 1.0 / (1.0 + std::exp(-xi))) / (2.0 * xi);
  }

  void moments() {
    const auto n = x.rows(), M = x.cols(), D = w.cols();
    sigma.assign(static_cast<std::size_t>(n), Mat());
    mu.resize(n, D);
    for (Eigen::Index i = 0; i < n; ++i) {
      Mat prec = Mat::Identity(D, D);
      Vec rhs = Vec::Zero(D);
      for (Eigen::Index m = 0; m < M; ++m) {
        const double b = lambda(xi(i, m));
        prec -= 2.0 * b * w.row(m).transpose() * w.row(m);
        rhs += (x(i, m) - 0.5 + 2.0 * b * alpha[m]) * w.row(m).transpose();
      }
      sigma[static_cast<std::size_t>(i)] = prec.inverse();
      mu.row(i) = (sigma[static_cast<std::size_t>(i)] * rhs).transpose();
    }
  }

  void update_xi() {
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index m = 0; m < x.cols(); ++m) {
        const Vec wm = w.row(m).transpose();
        const Mat second = sigma[static_cast<std::size_t>(i)] + mu.row(i).transpose() * mu.row(i);
        const double v = wm.dot(second * wm) + 2.0 * alpha[m] * wm.dot(mu.row(i).transpose()) + alpha[m] * alpha[m];
        xi(i, m) = std::sqrt(std::max(v, 0.0));
      }
  }

  void update_loadings() {
    const auto D = w.cols();
    for (Eigen::Index m = 0; m < x.cols(); ++m) {
      Mat h = Mat::Zero(D + 1, D + 1);
      Vec b = Vec::Zero(D + 1);
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        Vec ym(D + 1);
        ym.head(D) = mu.row(i).transpose();
        ym[D] = 1.0;
        Mat second = ym * ym.transpose();
        second.topLeftCorner(D, D) += sigma[static_cast<std::size_t>(i)];
        h += -2.0 * weight[i] * lambda(xi(i, m)) * second;
        b += weight[i] * (x(i, m) - 0.5) * ym;
      }
      const Vec sol = h.inverse() * b;
      w.row(m) = sol.head(D).transpose();
      alpha[m] = sol[D];
    }
  }
};

}  // namespace oracle
