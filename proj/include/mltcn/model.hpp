#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "mltcn/core_math.hpp"
#include "mltcn/errors.hpp"
#include "mltcn/rng.hpp"

namespace mltcn {

// n x M matrix of 0/1 responses. Entries are stored as doubles because every
// consumer does arithmetic on them.
struct BinaryDataset {
  Matrix responses;
  std::optional<std::vector<std::string>> labels;
  std::vector<std::string> variable_names;

  std::size_t n() const { return static_cast<std::size_t>(responses.rows()); }
  std::size_t m() const { return static_cast<std::size_t>(responses.cols()); }

  void validate() const {
    if (responses.rows() < 1 || responses.cols() < 1)
      throw ParameterDomain("dataset must have at least one row and one column");
    for (Eigen::Index i = 0; i < responses.rows(); ++i)
      for (Eigen::Index j = 0; j < responses.cols(); ++j) {
        const double v = responses(i, j);
        if (v != 0.0 && v != 1.0)
          throw ParameterDomain("response (" + std::to_string(i + 1) + ", " +
                                std::to_string(j + 1) + ") is not 0 or 1");
      }
    if (labels && labels->size() != n())
      throw ParameterDomain("label count does not match row count");
    if (!variable_names.empty() && variable_names.size() != m())
      throw ParameterDomain("variable name count does not match column count");
  }
};

// Parameters of a G-component mixture of latent trait models whose latent
// variables follow tau * N(0, I) + (1 - tau) * N(0, eta I).
struct MltcnParams {
  Vector pi;               // G mixing weights
  Matrix alpha;            // G x M intercepts
  std::vector<Matrix> w;   // G slope matrices, each M x D
  Vector tau;              // G prior probabilities of the normal branch
  Vector eta;              // G variance inflation factors

  std::size_t groups() const { return static_cast<std::size_t>(pi.size()); }
  std::size_t variables() const { return static_cast<std::size_t>(alpha.cols()); }
  std::size_t latent_dim() const {
    return w.empty() ? 0 : static_cast<std::size_t>(w.front().cols());
  }

  static MltcnParams zeros(std::size_t g, std::size_t m, std::size_t d) {
    MltcnParams p;
    const auto G = static_cast<Eigen::Index>(g);
    p.pi = Vector::Constant(G, 1.0 / static_cast<double>(g));
    p.alpha = Matrix::Zero(G, static_cast<Eigen::Index>(m));
    p.w.assign(g, Matrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d)));
    p.tau = Vector::Constant(G, 0.9);
    p.eta = Vector::Constant(G, 2.0);
    return p;
  }

  void validate() const {
    const auto G = pi.size();
    if (G < 1) throw ParameterDomain("at least one component is required");
    if (alpha.rows() != G || tau.size() != G || eta.size() != G ||
        static_cast<Eigen::Index>(w.size()) != G)
      throw ParameterDomain("inconsistent component count across parameters");
    double total = 0.0;
    for (Eigen::Index g = 0; g < G; ++g) {
      if (!(pi[g] > 0.0)) throw ParameterDomain("pi must be strictly positive");
      total += pi[g];
      if (!(tau[g] > 0.5 && tau[g] < 1.0)) throw ParameterDomain("tau must lie in (0.5, 1)");
      if (!(eta[g] > 1.0) || !std::isfinite(eta[g]))
        throw ParameterDomain("eta must be finite and greater than 1");
      if (w[g].rows() != alpha.cols() || w[g].cols() != w.front().cols())
        throw ParameterDomain("slope matrix has the wrong shape");
      if (!w[g].allFinite()) throw ParameterDomain("slopes must be finite");
    }
    if (std::abs(total - 1.0) > 1e-10) throw ParameterDomain("pi must sum to 1");
    if (!alpha.allFinite()) throw ParameterDomain("intercepts must be finite");
  }
};

// Component responsibilities and contamination weights, plus the simulated
// truth when the data came from sample_mltcn.
struct LatentAssignment {
  Matrix z;  // n x G
  Matrix c;  // n x G
  Matrix y;  // n x D latent draws; empty unless simulated
  std::vector<int> group;           // true component, simulation only
  std::vector<std::uint8_t> normal; // 1 = normal branch, simulation only
};

inline double response_probability(double alpha_m, const Vector& w_m, const Vector& y) {
  return sigmoid(alpha_m + w_m.dot(y));
}

// Density of N(0, v I) in D dimensions at a point with squared norm r2.
inline double spherical_normal_density(double r2, double v, std::size_t d) {
  const double dd = static_cast<double>(d);
  return std::exp(-0.5 * r2 / v - 0.5 * dd * std::log(2.0 * std::numbers::pi * v));
}

inline double latent_density(const Vector& y, double tau, double eta) {
  const double r2 = y.squaredNorm();
  const auto d = static_cast<std::size_t>(y.size());
  return tau * spherical_normal_density(r2, 1.0, d) +
         (1.0 - tau) * spherical_normal_density(r2, eta, d);
}

// Draws n observations. Observation i uses substream split(i) of the seed, so
// the output does not depend on evaluation order.
inline std::pair<BinaryDataset, LatentAssignment> sample_mltcn(const MltcnParams& params,
                                                                std::size_t n,
                                                                std::uint64_t seed) {
  params.validate();
  if (n < 1) throw ParameterDomain("n must be at least 1");
  const std::size_t G = params.groups();
  const std::size_t M = params.variables();
  const std::size_t D = params.latent_dim();
  const auto N = static_cast<Eigen::Index>(n);

  BinaryDataset data;
  data.responses = Matrix::Zero(N, static_cast<Eigen::Index>(M));
  LatentAssignment truth;
  truth.z = Matrix::Zero(N, static_cast<Eigen::Index>(G));
  truth.c = Matrix::Zero(N, static_cast<Eigen::Index>(G));
  truth.y = Matrix::Zero(N, static_cast<Eigen::Index>(D));
  truth.group.resize(n);
  truth.normal.resize(n);
  std::vector<std::string> labels(n);

  const Rng root(seed);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = root.split(i);
    const auto I = static_cast<Eigen::Index>(i);
    double u = rng.uniform();
    std::size_t g = 0;
    while (g + 1 < G && u >= params.pi[static_cast<Eigen::Index>(g)]) {
      u -= params.pi[static_cast<Eigen::Index>(g)];
      ++g;
    }
    const auto Gi = static_cast<Eigen::Index>(g);
    const bool normal = rng.bernoulli(params.tau[Gi]);
    const double scale = normal ? 1.0 : std::sqrt(params.eta[Gi]);
    Vector y(static_cast<Eigen::Index>(D));
    for (std::size_t d = 0; d < D; ++d) y[static_cast<Eigen::Index>(d)] = scale * rng.normal();
    for (std::size_t m = 0; m < M; ++m) {
      const auto Mi = static_cast<Eigen::Index>(m);
      const double p = response_probability(params.alpha(Gi, Mi), params.w[g].row(Mi).transpose(), y);
      data.responses(I, Mi) = rng.bernoulli(p) ? 1.0 : 0.0;
    }
    truth.z(I, Gi) = 1.0;
    truth.c.row(I).setConstant(normal ? 1.0 : 0.0);
    truth.y.row(I) = y.transpose();
    truth.group[i] = static_cast<int>(g);
    truth.normal[i] = normal ? 1 : 0;
    labels[i] = std::to_string(g + 1);
  }
  data.labels = std::move(labels);
  data.variable_names.reserve(M);
  for (std::size_t m = 0; m < M; ++m) data.variable_names.push_back("V" + std::to_string(m + 1));
  return {std::move(data), std::move(truth)};
}

// Settings of the simulation study. Intercepts and slopes are not given by the
// design and are drawn per component: alpha ~ U(-alpha_range, alpha_range),
// each slope ~ U(-slope_range, slope_range).
struct SimulationDesign {
  std::size_t m = 25;
  std::size_t g = 2;
  std::size_t d = 2;
  std::vector<double> pi;  // empty: equal weights
  std::vector<double> tau{0.8};
  std::vector<double> eta{2.5};
  double alpha_range = 3.0;
  double slope_range = 1.0;
};

inline MltcnParams make_simulation_params(const SimulationDesign& design, std::uint64_t seed) {
  const auto G = static_cast<Eigen::Index>(design.g);
  const auto M = static_cast<Eigen::Index>(design.m);
  const auto D = static_cast<Eigen::Index>(design.d);
  auto expand = [&](const std::vector<double>& v, const char* name) {
    Vector out(G);
    if (v.size() == 1) {
      out.setConstant(v[0]);
    } else if (static_cast<Eigen::Index>(v.size()) == G) {
      for (Eigen::Index g = 0; g < G; ++g) out[g] = v[static_cast<std::size_t>(g)];
    } else {
      throw ParameterDomain(std::string(name) + " needs 1 or G values");
    }
    return out;
  };
  MltcnParams p;
  p.pi = design.pi.empty() ? Vector::Constant(G, 1.0 / static_cast<double>(G)) : expand(design.pi, "pi");
  p.tau = expand(design.tau, "tau");
  p.eta = expand(design.eta, "eta");
  p.alpha = Matrix(G, M);
  p.w.assign(design.g, Matrix(M, D));
  Rng rng = Rng(seed).split(0x5eed);
  for (Eigen::Index g = 0; g < G; ++g)
    for (Eigen::Index m = 0; m < M; ++m) {
      p.alpha(g, m) = rng.uniform(-design.alpha_range, design.alpha_range);
      for (Eigen::Index d = 0; d < D; ++d)
        p.w[static_cast<std::size_t>(g)](m, d) = rng.uniform(-design.slope_range, design.slope_range);
    }
  p.validate();
  return p;
}

}  // namespace mltcn
