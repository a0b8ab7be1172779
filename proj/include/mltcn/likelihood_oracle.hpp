#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include <Eigen/Eigenvalues>

#include "mltcn/core_math.hpp"
#include "mltcn/model.hpp"
#include "mltcn/rng.hpp"

namespace mltcn {

// Numerical evaluation of the exact mixture log-likelihood, integrating the
// latent variable out directly. Used to check the variational bound; it is far
// too slow for fitting.

enum class OracleMethod { quadrature, monte_carlo };

struct OracleResult {
  double log_likelihood = 0.0;
  double std_error = 0.0;  // zero for quadrature
};

struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> log_weights;
};

// Physicists' Gauss-Hermite rule (weight exp(-t^2)) by the Golub-Welsch
// eigenvalue method.
inline GaussHermiteRule gauss_hermite(std::size_t count) {
  const auto n = static_cast<Eigen::Index>(count);
  Matrix jacobi = Matrix::Zero(n, n);
  for (Eigen::Index k = 1; k < n; ++k) {
    const double off = std::sqrt(static_cast<double>(k) / 2.0);
    jacobi(k, k - 1) = off;
    jacobi(k - 1, k) = off;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(jacobi);
  GaussHermiteRule rule;
  rule.nodes.resize(count);
  rule.log_weights.resize(count);
  const double log_mass = 0.5 * std::log(std::numbers::pi);
  for (Eigen::Index k = 0; k < n; ++k) {
    rule.nodes[static_cast<std::size_t>(k)] = solver.eigenvalues()[k];
    const double v0 = solver.eigenvectors()(0, k);
    rule.log_weights[static_cast<std::size_t>(k)] = log_mass + 2.0 * std::log(std::abs(v0));
  }
  return rule;
}

namespace detail {

inline double log_conditional(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                              const MltcnParams& p, std::size_t g, const Vector& y) {
  const auto& w = p.w[g];
  double acc = 0.0;
  for (Eigen::Index m = 0; m < x.size(); ++m) {
    const double a = p.alpha(static_cast<Eigen::Index>(g), m) + w.row(m).dot(y);
    acc += x[m] == 1.0 ? log_sigmoid(a) : log_sigmoid(-a);
  }
  return acc;
}

}  // namespace detail

inline OracleResult true_log_likelihood_oracle(const BinaryDataset& data,
                                               const MltcnParams& params,
                                               OracleMethod method,
                                               std::size_t resolution,
                                               std::uint64_t seed = 1) {
  params.validate();
  const std::size_t G = params.groups();
  const std::size_t D = params.latent_dim();
  const auto N = static_cast<Eigen::Index>(data.n());
  OracleResult out;

  if (method == OracleMethod::quadrature) {
    if (D > 2) throw UnsupportedDimension("quadrature oracle supports D <= 2");
    const auto rule = gauss_hermite(resolution);
    // Tensor grid of standard-normal abscissae t*sqrt(2) with log weights.
    std::vector<Vector> points;
    std::vector<double> log_w;
    const double norm = -0.5 * static_cast<double>(D) * std::log(std::numbers::pi);
    const std::size_t total = D == 0 ? 1 : (D == 1 ? resolution : resolution * resolution);
    for (std::size_t k = 0; k < total; ++k) {
      Vector t(static_cast<Eigen::Index>(D));
      double lw = norm;
      std::size_t rem = k;
      for (std::size_t d = 0; d < D; ++d) {
        const std::size_t j = rem % resolution;
        rem /= resolution;
        t[static_cast<Eigen::Index>(d)] = std::sqrt(2.0) * rule.nodes[j];
        lw += rule.log_weights[j];
      }
      points.push_back(std::move(t));
      log_w.push_back(lw);
    }
    std::vector<double> terms(points.size());
    std::vector<double> comp(2 * G);
    for (Eigen::Index i = 0; i < N; ++i) {
      const auto x = data.responses.row(i);
      for (std::size_t g = 0; g < G; ++g) {
        const auto Gi = static_cast<Eigen::Index>(g);
        for (int branch = 0; branch < 2; ++branch) {
          const double scale = branch == 1 ? 1.0 : std::sqrt(params.eta[Gi]);
          for (std::size_t k = 0; k < points.size(); ++k)
            terms[k] = log_w[k] + detail::log_conditional(x, params, g, scale * points[k]);
          const double prior = branch == 1 ? params.tau[Gi] : 1.0 - params.tau[Gi];
          comp[2 * g + static_cast<std::size_t>(branch)] =
              std::log(params.pi[Gi]) + std::log(prior) + log_sum_exp(terms);
        }
      }
      out.log_likelihood += log_sum_exp(comp);
    }
    return out;
  }

  // Monte Carlo: independent draws per (observation, component, branch); the
  // standard error of log p_i follows from the delta method.
  if (resolution < 1000) throw ParameterDomain("Monte Carlo oracle needs at least 1000 draws");
  const Rng root(seed);
  const auto R = static_cast<double>(resolution);
  double variance = 0.0;
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto x = data.responses.row(i);
    Rng rng = root.split(static_cast<std::uint64_t>(i));
    std::vector<double> log_terms;
    std::vector<double> log_second;
    for (std::size_t g = 0; g < G; ++g) {
      const auto Gi = static_cast<Eigen::Index>(g);
      for (int branch = 0; branch < 2; ++branch) {
        const double scale = branch == 1 ? 1.0 : std::sqrt(params.eta[Gi]);
        const double prior = branch == 1 ? params.tau[Gi] : 1.0 - params.tau[Gi];
        std::vector<double> draws(resolution);
        Vector y(static_cast<Eigen::Index>(D));
        for (std::size_t r = 0; r < resolution; ++r) {
          for (Eigen::Index d = 0; d < y.size(); ++d) y[d] = scale * rng.normal();
          draws[r] = detail::log_conditional(x, params, g, y);
        }
        const double log_mean = log_sum_exp(draws) - std::log(R);
        std::vector<double> sq(resolution);
        for (std::size_t r = 0; r < resolution; ++r) sq[r] = 2.0 * draws[r];
        const double log_mean_sq = log_sum_exp(sq) - std::log(R);
        const double coef = std::log(params.pi[Gi]) + std::log(prior);
        log_terms.push_back(coef + log_mean);
        // Var of the mean estimate: (E[f^2] - E[f]^2) / R, scaled by coef^2.
        const double rel = std::max(0.0, std::exp(log_mean_sq - 2.0 * log_mean) - 1.0);
        log_second.push_back(2.0 * (coef + log_mean) + std::log(rel / R + 1e-300));
      }
    }
    const double log_p = log_sum_exp(log_terms);
    out.log_likelihood += log_p;
    variance += std::exp(log_sum_exp(log_second) - 2.0 * log_p);
  }
  out.std_error = std::sqrt(variance);
  return out;
}

}  // namespace mltcn
