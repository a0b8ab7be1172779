#pragma once

#include <cmath>
#include <cstddef>

namespace mltcn {

// Free parameters: G-1 mixing weights, then per component M intercepts, M*D
// slopes, tau and eta. With rotation_adjust the D(D-1)/2 rotational degrees of
// freedom of each slope matrix are subtracted.
inline std::size_t count_parameters(std::size_t groups, std::size_t latent_dim,
                                    std::size_t variables, bool rotation_adjust = false) {
  std::size_t k = (groups - 1) + groups * (variables + variables * latent_dim + 2);
  if (rotation_adjust && latent_dim > 1) k -= groups * latent_dim * (latent_dim - 1) / 2;
  return k;
}

// -2 l + k log n. Smaller is better.
inline double bic(double log_likelihood, std::size_t k, std::size_t n) {
  return -2.0 * log_likelihood + static_cast<double>(k) * std::log(static_cast<double>(n));
}

}  // namespace mltcn
