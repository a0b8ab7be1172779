#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mltcn/core_math.hpp"
#include "mltcn/criteria.hpp"
#include "mltcn/errors.hpp"
#include "mltcn/model.hpp"
#include "mltcn/parallel.hpp"
#include "mltcn/rng.hpp"

namespace mltcn {

// Index of the latent branch: the inflated N(0, eta I) branch is 0 and the
// N(0, I) branch is 1, matching c_ig = 1 for normal observations.
enum Branch : std::size_t { kExtreme = 0, kNormal = 1 };
inline constexpr std::array<std::size_t, 2> kBranches{kExtreme, kNormal};

template <typename T>
using PerBranch = std::array<T, 2>;

// Variational quantities for every (observation, component, branch).
//
// The Gaussian approximation N(mu, sigma) of the latent posterior and the
// branch bounds are only meaningful for the xi they were computed with;
// posterior_moments followed by lower_bound keeps them in sync.
struct VariationalState {
  PerBranch<std::vector<Matrix>> xi;                   // [k][g]: n x M, all >= 0
  PerBranch<std::vector<Matrix>> mu;                   // [k][g]: n x D
  PerBranch<std::vector<std::vector<Matrix>>> sigma;   // [k][g][i]: D x D
  PerBranch<std::vector<Matrix>> precision_mean;       // [k][g]: n x D, sigma^-1 mu
  PerBranch<std::vector<Vector>> log_det;              // [k][g]: n, log|sigma|
  // Per-xi quantities cached by posterior_moments: B(xi) and
  // log sig(xi) - xi/2 - B(xi) xi^2.
  PerBranch<std::vector<Matrix>> b_coef;               // [k][g]: n x M
  PerBranch<std::vector<Matrix>> xi_term;              // [k][g]: n x M
  PerBranch<Matrix> branch_bound;                      // [k]: n x G
  Matrix component_bound;                              // n x G
  Matrix z;                                            // n x G
  Matrix c;                                            // n x G

  std::size_t n() const { return static_cast<std::size_t>(z.rows()); }
  std::size_t groups() const { return static_cast<std::size_t>(z.cols()); }

  static VariationalState allocate(std::size_t n, std::size_t g, std::size_t m, std::size_t d,
                                   double xi0 = 1.0) {
    VariationalState s;
    const auto N = static_cast<Eigen::Index>(n);
    const auto M = static_cast<Eigen::Index>(m);
    const auto D = static_cast<Eigen::Index>(d);
    const auto G = static_cast<Eigen::Index>(g);
    for (std::size_t k : kBranches) {
      s.xi[k].assign(g, Matrix::Constant(N, M, xi0));
      s.mu[k].assign(g, Matrix::Zero(N, D));
      s.sigma[k].assign(g, std::vector<Matrix>(n, Matrix::Identity(D, D)));
      s.precision_mean[k].assign(g, Matrix::Zero(N, D));
      s.log_det[k].assign(g, Vector::Zero(N));
      s.b_coef[k].assign(g, Matrix::Zero(N, M));
      s.xi_term[k].assign(g, Matrix::Zero(N, M));
      s.branch_bound[k] = Matrix::Zero(N, G);
    }
    s.component_bound = Matrix::Zero(N, G);
    s.z = Matrix::Constant(N, G, 1.0 / static_cast<double>(g));
    s.c = Matrix::Constant(N, G, 1.0);
    return s;
  }
};

struct FitConfig {
  std::size_t groups = 1;
  std::size_t latent_dim = 1;
  std::size_t max_iter = 1000;
  double aitken_epsilon = 0.01;
  std::size_t restarts = 10;
  std::uint64_t seed = 0;
  double tau_floor = 0.5;
  double eta_ceiling = 1000.0;
  std::size_t inner_xi_sweeps = 1;
  bool bic_rotation_adjust = false;
  int threads = 1;  // restarts run concurrently; output does not depend on it

  void validate() const {
    if (groups < 1) throw ParameterDomain("G must be at least 1");
    if (latent_dim < 1) throw ParameterDomain("D must be at least 1");
    if (!(tau_floor >= 0.5 && tau_floor < 1.0)) throw ParameterDomain("tau floor must lie in [0.5, 1)");
    if (!(aitken_epsilon > 0.0)) throw ParameterDomain("Aitken epsilon must be positive");
    if (!(eta_ceiling > 1.0)) throw ParameterDomain("eta ceiling must exceed 1");
    if (restarts < 1) throw ParameterDomain("at least one restart is required");
    if (max_iter < 1) throw ParameterDomain("max_iter must be at least 1");
    if (inner_xi_sweeps < 1) throw ParameterDomain("at least one xi sweep is required");
  }
};

struct FitResult {
  MltcnParams params;
  VariationalState state;
  std::vector<double> bound_trace;
  bool converged = false;
  std::size_t iterations = 0;
  double bound = 0.0;
  double bic = 0.0;
  std::vector<int> map_labels;             // 0-based component per observation
  std::vector<std::uint8_t> extreme_flags; // c at the MAP component < 0.5
  std::vector<double> restart_bounds;      // NaN for failed restarts
  std::vector<std::string> restart_errors; // empty string for successful restarts
  std::size_t best_restart = 0;
  FitConfig config;

  std::size_t extreme_count() const {
    std::size_t k = 0;
    for (auto f : extreme_flags) k += f;
    return k;
  }
};

// ---------------------------------------------------------------------------
// Individual steps.

inline constexpr double kTauMargin = 1e-6;
inline constexpr Eigen::Index kMaxLatentDim = 16;
using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxLatentDim, kMaxLatentDim>;
using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxLatentDim, 1>;
inline constexpr double kEtaMargin = 1e-6;
inline constexpr double kEmptyWeight = 1e-10;

// Gaussian approximation of the latent posterior for each (i, g, branch):
//   sigma^-1 = I / v - 2 sum_m B(xi_m) w_m w_m'
//   mu       = sigma sum_m (x_m - 1/2 + 2 B(xi_m) alpha_m) w_m
// with prior variance v = 1 for the normal branch and eta_g for the other.
inline void posterior_moments(const BinaryDataset& data, const MltcnParams& params,
                              VariationalState& state) {
  const std::size_t G = params.groups();
  const auto M = static_cast<Eigen::Index>(params.variables());
  const auto D = static_cast<Eigen::Index>(params.latent_dim());
  const auto N = static_cast<Eigen::Index>(data.n());
  if (D > kMaxLatentDim) throw UnsupportedDimension("latent dimension above " + std::to_string(kMaxLatentDim));
  SmallMatrix precision(D, D);
  SmallMatrix sigma(D, D);
  SmallVector rhs(D);
  Eigen::LLT<SmallMatrix> llt(D);
  for (std::size_t g = 0; g < G; ++g) {
    const auto Gi = static_cast<Eigen::Index>(g);
    const Matrix& w = params.w[g];
    for (std::size_t k : kBranches) {
      const double prior_precision = k == kNormal ? 1.0 : 1.0 / params.eta[Gi];
      const Matrix& xi = state.xi[k][g];
      Matrix& bc = state.b_coef[k][g];
      Matrix& xt = state.xi_term[k][g];
      bc.resize(N, M);
      xt.resize(N, M);
      for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index m = 0; m < M; ++m) {
          const XiTerms t = xi_terms(xi(i, m));
          bc(i, m) = t.b;
          xt(i, m) = t.constant;
        }
      for (Eigen::Index i = 0; i < N; ++i) {
        precision.setZero();
        precision.diagonal().setConstant(prior_precision);
        rhs.setZero();
        for (Eigen::Index m = 0; m < M; ++m) {
          const double b = bc(i, m);
          const double coef = data.responses(i, m) - 0.5 + 2.0 * b * params.alpha(Gi, m);
          for (Eigen::Index r = 0; r < D; ++r) {
            const double wr = w(m, r);
            rhs[r] += coef * wr;
            for (Eigen::Index s2 = 0; s2 <= r; ++s2) precision(r, s2) -= 2.0 * b * wr * w(m, s2);
          }
        }
        llt.compute(precision);  // reads the lower triangle only
        const auto diag = llt.matrixLLT().diagonal();
        double log_det_precision = 0.0;
        bool ok = llt.info() == Eigen::Success;
        for (Eigen::Index r = 0; ok && r < D; ++r) {
          ok = diag[r] > 0.0 && std::isfinite(diag[r]);
          if (ok) log_det_precision += 2.0 * std::log(diag[r]);
        }
        if (!ok)
          throw NumericalBreakdown("posterior precision is not positive definite (observation " +
                                   std::to_string(i + 1) + ", component " + std::to_string(g + 1) + ")");
        sigma.setIdentity(D, D);
        llt.solveInPlace(sigma);
        state.sigma[k][g][static_cast<std::size_t>(i)] = sigma;
        state.mu[k][g].row(i).noalias() = (sigma * rhs).transpose();
        state.precision_mean[k][g].row(i) = rhs.transpose();
        state.log_det[k][g][i] = -log_det_precision;
      }
    }
  }
}

// xi^2 = E[(alpha + w'y)^2] = w' sigma w + (alpha + w' mu)^2 under the current
// Gaussian approximation.
inline void update_xi(const MltcnParams& params, VariationalState& state) {
  const std::size_t G = params.groups();
  const auto M = static_cast<Eigen::Index>(params.variables());
  const auto D = static_cast<Eigen::Index>(params.latent_dim());
  for (std::size_t g = 0; g < G; ++g) {
    const auto Gi = static_cast<Eigen::Index>(g);
    const Matrix& w = params.w[g];
    for (std::size_t k : kBranches) {
      Matrix& xi = state.xi[k][g];
      const Matrix& mu = state.mu[k][g];
      for (Eigen::Index i = 0; i < xi.rows(); ++i) {
        const Matrix& sigma = state.sigma[k][g][static_cast<std::size_t>(i)];
        for (Eigen::Index m = 0; m < M; ++m) {
          double mean = params.alpha(Gi, m);
          double quad = 0.0;
          for (Eigen::Index a = 0; a < D; ++a) {
            const double wa = w(m, a);
            mean += wa * mu(i, a);
            quad += wa * wa * sigma(a, a);
            for (Eigen::Index b = 0; b < a; ++b) quad += 2.0 * wa * w(m, b) * sigma(a, b);
          }
          xi(i, m) = std::sqrt(std::max(quad + mean * mean, 0.0));
        }
      }
    }
  }
}

// Branch bounds L(xi_igk), component bounds L_ig and the total bound
//   l = sum_i log sum_g pi_g exp(L_ig).
//
// L(xi_igk) is the log of the Gaussian integral of the quadratic logistic
// bound against the branch prior:
//   sum_m [log sig(xi) - xi/2 - B(xi) xi^2 + (x_m - 1/2) alpha_m + B(xi) alpha_m^2]
//   + log|sigma|/2 + mu' sigma^-1 mu / 2 - (D/2) log v.
// The intercept terms and the -(D/2) log eta normalizer of the inflated branch
// make exp(L) a lower bound on p(x_i | component, branch) itself. Requires the
// moments (and cached xi terms) from posterior_moments at the same xi.
inline double lower_bound(const BinaryDataset& data, const MltcnParams& params,
                          VariationalState& state) {
  const std::size_t G = params.groups();
  const auto M = static_cast<Eigen::Index>(params.variables());
  const double D = static_cast<double>(params.latent_dim());
  const auto N = static_cast<Eigen::Index>(data.n());
  double total = 0.0;
  std::vector<double> terms(G);
  for (Eigen::Index i = 0; i < N; ++i) {
    for (std::size_t g = 0; g < G; ++g) {
      const auto Gi = static_cast<Eigen::Index>(g);
      for (std::size_t k : kBranches) {
        const Matrix& bc = state.b_coef[k][g];
        const Matrix& xt = state.xi_term[k][g];
        double acc = 0.0;
        for (Eigen::Index m = 0; m < M; ++m) {
          const double a = params.alpha(Gi, m);
          acc += xt(i, m) + (data.responses(i, m) - 0.5) * a + bc(i, m) * a * a;
        }
        acc += 0.5 * state.log_det[k][g][i] +
               0.5 * state.mu[k][g].row(i).dot(state.precision_mean[k][g].row(i));
        if (k == kExtreme) acc -= 0.5 * D * std::log(params.eta[Gi]);
        state.branch_bound[k](i, Gi) = acc;
      }
      const double lig = log_sum_exp(std::log(params.tau[Gi]) + state.branch_bound[kNormal](i, Gi),
                                     std::log1p(-params.tau[Gi]) + state.branch_bound[kExtreme](i, Gi));
      state.component_bound(i, Gi) = lig;
      terms[g] = std::log(params.pi[Gi]) + lig;
    }
    total += log_sum_exp(terms);
  }
  return total;
}

// Responsibilities z and contamination weights c from the current bounds.
inline void e_step(const MltcnParams& params, VariationalState& state) {
  const std::size_t G = params.groups();
  const auto N = state.component_bound.rows();
  std::vector<double> terms(G);
  for (Eigen::Index i = 0; i < N; ++i) {
    for (std::size_t g = 0; g < G; ++g) {
      const auto Gi = static_cast<Eigen::Index>(g);
      const double l1 = state.branch_bound[kNormal](i, Gi);
      const double l0 = state.branch_bound[kExtreme](i, Gi);
      const double lig = state.component_bound(i, Gi);
      if (std::isnan(l1) || std::isnan(l0) || std::isnan(lig))
        throw NumericalBreakdown("NaN bound at observation " + std::to_string(i + 1) +
                                 ", component " + std::to_string(g + 1));
      const double log_normal = std::log(params.tau[Gi]) + l1;
      const double log_extreme = std::log1p(-params.tau[Gi]) + l0;
      state.c(i, Gi) = std::exp(log_normal - log_sum_exp(log_normal, log_extreme));
      terms[g] = std::log(params.pi[Gi]) + lig;
    }
    const double norm = log_sum_exp(terms);
    for (std::size_t g = 0; g < G; ++g)
      state.z(i, static_cast<Eigen::Index>(g)) = std::exp(terms[g] - norm);
  }
}

inline Vector update_mixing(const Matrix& z) {
  return z.colwise().mean().transpose();
}

// Maximizer of sum_i z_ig [c_ig log t + (1 - c_ig) log(1 - t)] over
// (tau_floor, 1). The objective is concave with stationary point at the
// z-weighted mean of c, so the constrained maximizer is that mean clamped.
inline Vector update_tau(const Matrix& z, const Matrix& c, double tau_floor) {
  const auto G = z.cols();
  Vector tau(G);
  for (Eigen::Index g = 0; g < G; ++g) {
    const double mass = z.col(g).sum();
    if (!(mass > 0.0))
      throw EmptyComponent(static_cast<std::size_t>(g),
                           "component " + std::to_string(g + 1) + " has no weight");
    const double mean = z.col(g).dot(c.col(g)) / mass;
    const double hi = 1.0 - kTauMargin;
    tau[g] = std::clamp(mean, std::min(tau_floor + kTauMargin, hi), hi);
  }
  return tau;
}

// The (D+1)-dimensional normal equations for (w_mg', alpha_mg)'.
struct LoadingSystem {
  Matrix h;  // symmetric positive definite
  Vector b;
};

// H = -2 sum_i z_ig sum_k r_igk B(xi_imgk) E[y~ y~'], b = sum_i z_ig (x_im - 1/2)
// sum_k r_igk mu~_igk, where y~ = (y', 1)', r_ig1 = c_ig and r_ig0 = 1 - c_ig.
// The two branch terms add: each is the expected Hessian of the bound under
// its own branch, weighted by the branch posterior.
inline LoadingSystem loading_system(const BinaryDataset& data, const VariationalState& state,
                                    std::size_t g, std::size_t m) {
  const auto Gi = static_cast<Eigen::Index>(g);
  const auto Mi = static_cast<Eigen::Index>(m);
  const Eigen::Index D = state.mu[kNormal][g].cols();
  LoadingSystem sys{Matrix::Zero(D + 1, D + 1), Vector::Zero(D + 1)};
  for (Eigen::Index i = 0; i < state.z.rows(); ++i) {
    const double zig = state.z(i, Gi);
    if (zig == 0.0) continue;
    const double resid = data.responses(i, Mi) - 0.5;
    for (std::size_t k : kBranches) {
      const double r = k == kNormal ? state.c(i, Gi) : 1.0 - state.c(i, Gi);
      const double weight = zig * r;
      if (weight == 0.0) continue;
      const auto mu = state.mu[k][g].row(i);
      const Matrix& sigma = state.sigma[k][g][static_cast<std::size_t>(i)];
      const double hw = -2.0 * weight * state.b_coef[k][g](i, Mi);
      // E[y~ y~'] = [[sigma + mu mu', mu], [mu', 1]]
      for (Eigen::Index a = 0; a < D; ++a) {
        for (Eigen::Index b = 0; b < D; ++b) sys.h(a, b) += hw * (sigma(a, b) + mu[a] * mu[b]);
        sys.h(a, D) += hw * mu[a];
        sys.h(D, a) += hw * mu[a];
        sys.b[a] += weight * resid * mu[a];
      }
      sys.h(D, D) += hw;
      sys.b[D] += weight * resid;
    }
  }
  return sys;
}

// Intercepts and slopes maximizing the expected bound, one linear solve per
// (variable, component).
inline void update_loadings(const BinaryDataset& data, const VariationalState& state,
                            MltcnParams& params) {
  const std::size_t G = params.groups();
  const std::size_t M = params.variables();
  const auto D = static_cast<Eigen::Index>(params.latent_dim());
  for (std::size_t g = 0; g < G; ++g)
    for (std::size_t m = 0; m < M; ++m) {
      const LoadingSystem sys = loading_system(data, state, g, m);
      SpdFactor f;
      if (!f.compute(sys.h))
        throw NumericalBreakdown("loading system is singular (variable " + std::to_string(m + 1) +
                                 ", component " + std::to_string(g + 1) + ")");
      const Vector x = f.solve(sys.b);
      if (!x.allFinite())
        throw NumericalBreakdown("non-finite loadings, variable " + std::to_string(m + 1) +
                                 ", component " + std::to_string(g + 1));
      params.w[g].row(static_cast<Eigen::Index>(m)) = x.head(D).transpose();
      params.alpha(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(m)) = x[D];
    }
}

// Maximizer over eta > 1 of -(D/2) S log eta - T / (2 eta), with
// S = sum_i z_ig (1 - c_ig) and T = sum_i z_ig (1 - c_ig) tr E[y y'] under the
// inflated branch. The objective increases up to T / (D S) and decreases after.
inline Vector update_eta(const Matrix& z, const Matrix& c, const VariationalState& state,
                         std::size_t latent_dim, double eta_ceiling, const Vector& previous) {
  const auto G = z.cols();
  Vector eta = previous;
  const double D = static_cast<double>(latent_dim);
  for (Eigen::Index g = 0; g < G; ++g) {
    const auto gs = static_cast<std::size_t>(g);
    double s = 0.0;
    double t = 0.0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const double weight = z(i, g) * (1.0 - c(i, g));
      s += weight;
      t += weight * (state.sigma[kExtreme][gs][static_cast<std::size_t>(i)].trace() +
                     state.mu[kExtreme][gs].row(i).squaredNorm());
    }
    if (s < 1e-10) continue;
    eta[g] = std::clamp(t / (D * s), 1.0 + kEtaMargin, eta_ceiling);
  }
  return eta;
}

// Aitken acceleration on three successive bound values.
struct AitkenEstimate {
  double acceleration = 0.0;
  double limit = 0.0;
  bool plateau = false;
};

inline AitkenEstimate aitken_estimate(double l_prev2, double l_prev, double l_curr) {
  AitkenEstimate e;
  const double denom = l_prev - l_prev2;
  if (std::abs(denom) < 1e-14) {
    e.plateau = true;
    e.limit = l_curr;
    return e;
  }
  e.acceleration = (l_curr - l_prev) / denom;
  const double gap = 1.0 - e.acceleration;
  if (std::abs(gap) < 1e-14) {
    e.limit = std::numeric_limits<double>::infinity();
    return e;
  }
  e.limit = l_prev + (l_curr - l_prev) / gap;
  return e;
}

struct AitkenCheck {
  bool converged = false;
  AitkenEstimate estimate;
};

// Converged when the asymptotic estimate moved by less than epsilon since the
// previous check, or when the sequence has stopped moving.
inline AitkenCheck aitken_converged(double l_prev2, double l_prev, double l_curr, double epsilon,
                                    std::optional<double> previous_limit = std::nullopt) {
  AitkenCheck check;
  check.estimate = aitken_estimate(l_prev2, l_prev, l_curr);
  if (check.estimate.plateau) {
    check.converged = true;
  } else if (previous_limit && std::isfinite(check.estimate.limit) && std::isfinite(*previous_limit)) {
    check.converged = std::abs(check.estimate.limit - *previous_limit) < epsilon;
  }
  return check;
}

// ---------------------------------------------------------------------------
// Driver.

struct Initialization {
  MltcnParams params;
  VariationalState state;
};

inline Initialization initialize(const BinaryDataset& data, const FitConfig& config,
                                 std::size_t restart_index) {
  config.validate();
  const std::size_t n = data.n();
  const std::size_t M = data.m();
  const std::size_t G = config.groups;
  const std::size_t D = config.latent_dim;
  const auto N = static_cast<Eigen::Index>(n);
  const auto Gn = static_cast<Eigen::Index>(G);
  Rng rng = Rng(config.seed).split(restart_index);

  Matrix z = Matrix::Zero(N, Gn);
  bool filled = false;
  for (int attempt = 0; attempt < 100 && !filled; ++attempt) {
    z.setZero();
    for (Eigen::Index i = 0; i < N; ++i) z(i, static_cast<Eigen::Index>(rng.below(G))) = 1.0;
    filled = (z.colwise().sum().array() > 0.0).all();
  }
  if (!filled)
    throw EmptyComponent(0, "random initialization left a component empty after 100 attempts");

  Initialization init;
  MltcnParams& p = init.params;
  p = MltcnParams::zeros(G, M, D);
  p.pi = update_mixing(z);
  const double tau0 = config.tau_floor < 0.9 ? 0.9 : 0.5 * (config.tau_floor + 1.0);
  p.tau.setConstant(tau0);
  p.eta.setConstant(std::min(2.0, 0.5 * (1.0 + config.eta_ceiling)));
  for (std::size_t g = 0; g < G; ++g) {
    const auto Gi = static_cast<Eigen::Index>(g);
    const double mass = z.col(Gi).sum();
    for (std::size_t m = 0; m < M; ++m) {
      const auto Mi = static_cast<Eigen::Index>(m);
      const double mean = z.col(Gi).dot(data.responses.col(Mi)) / mass;
      p.alpha(Gi, Mi) = logit(std::clamp(mean, 1e-3, 1.0 - 1e-3));
      for (std::size_t d = 0; d < D; ++d) p.w[g](Mi, static_cast<Eigen::Index>(d)) = 0.1 * rng.normal();
    }
  }
  init.state = VariationalState::allocate(n, G, M, D, 1.0);
  init.state.z = z;
  init.state.c.setConstant(tau0);
  return init;
}

struct RestartOutcome {
  MltcnParams params;
  VariationalState state;
  std::vector<double> trace;
  bool converged = false;
  std::size_t iterations = 0;
};

// Recomputes moments and bounds for the current (params, xi); returns l.
inline double refresh(const BinaryDataset& data, const MltcnParams& params,
                      VariationalState& state) {
  posterior_moments(data, params, state);
  const double l = lower_bound(data, params, state);
  if (!std::isfinite(l)) throw NumericalBreakdown("lower bound is not finite");
  return l;
}

// One ECM cycle from a state whose moments and bounds match (params, xi):
// xi sweeps, E-step for z and c, then the parameter CM-step for pi, tau,
// (alpha, w) and eta. Returns the bound at the new parameters.
inline double ecm_iteration(const BinaryDataset& data, const FitConfig& config,
                            MltcnParams& params, VariationalState& state) {
  for (std::size_t s = 0; s < config.inner_xi_sweeps; ++s) {
    update_xi(params, state);
    refresh(data, params, state);
  }
  e_step(params, state);
  const Vector mass = state.z.colwise().sum().transpose();
  for (Eigen::Index g = 0; g < mass.size(); ++g)
    if (mass[g] < kEmptyWeight)
      throw EmptyComponent(static_cast<std::size_t>(g),
                           "component " + std::to_string(g + 1) + " lost all its weight");
  params.pi = update_mixing(state.z);
  params.tau = update_tau(state.z, state.c, config.tau_floor);
  update_loadings(data, state, params);
  params.eta = update_eta(state.z, state.c, state, params.latent_dim(), config.eta_ceiling, params.eta);
  return refresh(data, params, state);
}

inline RestartOutcome run_restart(const BinaryDataset& data, const FitConfig& config,
                                  std::size_t restart_index) {
  Initialization init = initialize(data, config, restart_index);
  RestartOutcome out{std::move(init.params), std::move(init.state), {}, false, 0};
  out.trace.push_back(refresh(data, out.params, out.state));
  std::optional<double> previous_limit;
  for (std::size_t it = 1; it <= config.max_iter; ++it) {
    out.trace.push_back(ecm_iteration(data, config, out.params, out.state));
    out.iterations = it;
    const std::size_t t = out.trace.size();
    if (t >= 3) {
      const auto check = aitken_converged(out.trace[t - 3], out.trace[t - 2], out.trace[t - 1],
                                          config.aitken_epsilon, previous_limit);
      previous_limit = check.estimate.limit;
      if (check.converged) {
        out.converged = true;
        break;
      }
    }
  }
  // Final responsibilities at the returned parameters.
  e_step(out.params, out.state);
  return out;
}

// Runs every restart and keeps the one with the highest final bound.
inline FitResult fit(const BinaryDataset& data, const FitConfig& config) {
  config.validate();
  data.validate();
  if (data.n() <= config.groups) throw ParameterDomain("need more observations than components");

  std::vector<std::optional<RestartOutcome>> outcomes(config.restarts);
  std::vector<std::string> errors(config.restarts);
  parallel_for(config.restarts, resolve_threads(config.threads), [&](std::size_t r) {
    try {
      outcomes[r] = run_restart(data, config, r);
    } catch (const Error& e) {
      errors[r] = e.what();
    }
  });

  FitResult result;
  result.config = config;
  result.restart_bounds.assign(config.restarts, std::numeric_limits<double>::quiet_NaN());
  result.restart_errors = errors;
  std::optional<std::size_t> best;
  for (std::size_t r = 0; r < config.restarts; ++r) {
    if (!outcomes[r]) continue;
    result.restart_bounds[r] = outcomes[r]->trace.back();
    if (!best || outcomes[r]->trace.back() > outcomes[*best]->trace.back()) best = r;
  }
  if (!best) {
    std::string msg = "all " + std::to_string(config.restarts) + " restarts failed:";
    for (std::size_t r = 0; r < config.restarts; ++r)
      msg += "\n  restart " + std::to_string(r) + ": " + errors[r];
    throw FitFailed(msg);
  }

  RestartOutcome& chosen = *outcomes[*best];
  result.best_restart = *best;
  result.params = std::move(chosen.params);
  result.state = std::move(chosen.state);
  result.bound_trace = std::move(chosen.trace);
  result.converged = chosen.converged;
  result.iterations = chosen.iterations;
  result.bound = result.bound_trace.back();
  result.bic = bic(result.bound,
                   count_parameters(config.groups, config.latent_dim, data.m(), config.bic_rotation_adjust),
                   data.n());
  const auto N = static_cast<Eigen::Index>(data.n());
  result.map_labels.resize(data.n());
  result.extreme_flags.resize(data.n());
  for (Eigen::Index i = 0; i < N; ++i) {
    Eigen::Index g = 0;
    result.state.z.row(i).maxCoeff(&g);
    result.map_labels[static_cast<std::size_t>(i)] = static_cast<int>(g);
    result.extreme_flags[static_cast<std::size_t>(i)] = result.state.c(i, g) < 0.5 ? 1 : 0;
  }
  return result;
}

// Reorders components: new component j is old component order[j].
inline MltcnParams permute_components(const MltcnParams& p, const std::vector<std::size_t>& order) {
  MltcnParams q = p;
  for (std::size_t j = 0; j < order.size(); ++j) {
    const auto J = static_cast<Eigen::Index>(j);
    const auto O = static_cast<Eigen::Index>(order[j]);
    q.pi[J] = p.pi[O];
    q.alpha.row(J) = p.alpha.row(O);
    q.w[j] = p.w[order[j]];
    q.tau[J] = p.tau[O];
    q.eta[J] = p.eta[O];
  }
  return q;
}

inline VariationalState permute_components(const VariationalState& s,
                                           const std::vector<std::size_t>& order) {
  VariationalState t = s;
  for (std::size_t j = 0; j < order.size(); ++j) {
    const auto J = static_cast<Eigen::Index>(j);
    const auto O = static_cast<Eigen::Index>(order[j]);
    for (std::size_t k : kBranches) {
      t.xi[k][j] = s.xi[k][order[j]];
      t.mu[k][j] = s.mu[k][order[j]];
      t.sigma[k][j] = s.sigma[k][order[j]];
      t.precision_mean[k][j] = s.precision_mean[k][order[j]];
      t.log_det[k][j] = s.log_det[k][order[j]];
      t.branch_bound[k].col(J) = s.branch_bound[k].col(O);
    }
    t.component_bound.col(J) = s.component_bound.col(O);
    t.z.col(J) = s.z.col(O);
    t.c.col(J) = s.c.col(O);
  }
  return t;
}

}  // namespace mltcn
