#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mltcn/core_math.hpp"
#include "mltcn/criteria.hpp"
#include "mltcn/ecm.hpp"
#include "mltcn/errors.hpp"
#include "mltcn/parallel.hpp"
#include "mltcn/rng.hpp"

namespace mltcn {

// ---------------------------------------------------------------------------
// Partitions.

// Maps arbitrary labels to 0-based codes in order of first appearance.
template <typename Label>
std::vector<int> encode_labels(std::span<const Label> labels, std::vector<Label>* names = nullptr) {
  std::vector<int> codes(labels.size());
  std::vector<Label> seen;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = std::find(seen.begin(), seen.end(), labels[i]);
    if (it == seen.end()) {
      seen.push_back(labels[i]);
      it = seen.end() - 1;
    }
    codes[i] = static_cast<int>(it - seen.begin());
  }
  if (names) *names = std::move(seen);
  return codes;
}

inline std::vector<int> encode_labels(const std::vector<std::string>& labels,
                                      std::vector<std::string>* names = nullptr) {
  return encode_labels<std::string>(std::span<const std::string>(labels), names);
}

// Argmax per row; ties go to the lowest index.
inline std::vector<int> map_classify(const Matrix& z) {
  std::vector<int> labels(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index g = 1; g < z.cols(); ++g)
      if (z(i, g) > z(i, best)) best = g;
    labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return labels;
}

// Counts n_ab of observations with label a in the first partition and b in
// the second. Labels may be any integers.
struct Contingency {
  std::vector<int> row_labels;
  std::vector<int> col_labels;
  std::vector<std::vector<std::int64_t>> counts;
};

inline Contingency contingency_table(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ParameterDomain("partitions have different lengths");
  Contingency t;
  t.row_labels.assign(a.begin(), a.end());
  std::sort(t.row_labels.begin(), t.row_labels.end());
  t.row_labels.erase(std::unique(t.row_labels.begin(), t.row_labels.end()), t.row_labels.end());
  t.col_labels.assign(b.begin(), b.end());
  std::sort(t.col_labels.begin(), t.col_labels.end());
  t.col_labels.erase(std::unique(t.col_labels.begin(), t.col_labels.end()), t.col_labels.end());
  t.counts.assign(t.row_labels.size(), std::vector<std::int64_t>(t.col_labels.size(), 0));
  auto index = [](const std::vector<int>& v, int x) {
    return static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), x) - v.begin());
  };
  for (std::size_t i = 0; i < a.size(); ++i) ++t.counts[index(t.row_labels, a[i])][index(t.col_labels, b[i])];
  return t;
}

inline std::int64_t choose2(std::int64_t k) { return k * (k - 1) / 2; }

// Pair counts derived from a contingency table.
struct PairCounts {
  std::int64_t together_both = 0;  // sum_ab C(n_ab, 2)
  std::int64_t together_a = 0;     // sum_a C(n_a., 2)
  std::int64_t together_b = 0;     // sum_b C(n_.b, 2)
  std::int64_t total = 0;          // C(n, 2)
};

inline PairCounts pair_counts(std::span<const int> a, std::span<const int> b) {
  const Contingency t = contingency_table(a, b);
  PairCounts p;
  std::vector<std::int64_t> col_sum(t.col_labels.size(), 0);
  for (const auto& row : t.counts) {
    std::int64_t row_sum = 0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      p.together_both += choose2(row[j]);
      row_sum += row[j];
      col_sum[j] += row[j];
    }
    p.together_a += choose2(row_sum);
  }
  for (auto s : col_sum) p.together_b += choose2(s);
  p.total = choose2(static_cast<std::int64_t>(a.size()));
  return p;
}

// Fraction of pairs on which the partitions agree (together in both or apart in both).
inline double rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ParameterDomain("partitions have different lengths");
  if (a.size() < 2) throw ParameterDomain("at least two observations are required");
  const PairCounts p = pair_counts(a, b);
  const std::int64_t agree = p.total - p.together_a - p.together_b + 2 * p.together_both;
  return static_cast<double>(agree) / static_cast<double>(p.total);
}

// Hubert-Arabie adjusted Rand index. The degenerate case where the maximum
// equals the expected index (e.g. both partitions all singletons) returns 1.
inline double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ParameterDomain("partitions have different lengths");
  if (a.size() < 2) throw ParameterDomain("at least two observations are required");
  const PairCounts p = pair_counts(a, b);
  const double index = static_cast<double>(p.together_both);
  const double expected = static_cast<double>(p.together_a) * static_cast<double>(p.together_b) /
                          static_cast<double>(p.total);
  const double maximum = 0.5 * static_cast<double>(p.together_a + p.together_b);
  if (maximum == expected) return 1.0;
  return (index - expected) / (maximum - expected);
}

// Largest number of observations that agree under a one-to-one matching of
// the first partition's labels to the second's. Exact search over matchings;
// intended for the handful of labels a clustering has.
inline std::int64_t max_matching_agreement(const Contingency& t) {
  const std::size_t rows = t.counts.size();
  const std::size_t cols = t.col_labels.size();
  if (cols > 20) throw UnsupportedDimension("too many labels for exact matching");
  std::vector<std::int64_t> best(std::size_t{1} << cols, -1);
  best[0] = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<std::int64_t> next = best;  // row r left unmatched
    for (std::size_t mask = 0; mask < best.size(); ++mask) {
      if (best[mask] < 0) continue;
      for (std::size_t c = 0; c < cols; ++c) {
        if (mask & (std::size_t{1} << c)) continue;
        const std::size_t m2 = mask | (std::size_t{1} << c);
        next[m2] = std::max(next[m2], best[mask] + t.counts[r][c]);
      }
    }
    best = std::move(next);
  }
  return *std::max_element(best.begin(), best.end());
}

// ---------------------------------------------------------------------------
// Model selection over (G, D).

struct GridCell {
  std::size_t groups = 0;
  std::size_t latent_dim = 0;
  std::optional<FitResult> fit;
  std::string error;
  double ari = std::numeric_limits<double>::quiet_NaN();  // against known labels, if any
};

struct SelectionGrid {
  std::vector<GridCell> cells;  // G-major order
  std::size_t best = 0;         // index into cells

  const GridCell& best_cell() const { return cells.at(best); }
};

struct IndexRange {
  std::size_t lo = 1;
  std::size_t hi = 1;

  std::vector<std::size_t> values() const {
    std::vector<std::size_t> v;
    for (std::size_t x = lo; x <= hi; ++x) v.push_back(x);
    return v;
  }
};

// Fits every (G, D) cell. Each cell draws its restarts from a substream keyed
// by (G, D), so a cell's result does not depend on the rest of the grid.
// Failed cells are recorded and skipped when picking the minimum BIC.
inline SelectionGrid grid_select(const BinaryDataset& data, const IndexRange& g_range,
                                 const IndexRange& d_range, const FitConfig& base) {
  const auto gs = g_range.values();
  const auto ds = d_range.values();
  if (gs.empty() || ds.empty()) throw ParameterDomain("empty G or D range");
  SelectionGrid grid;
  for (auto g : gs)
    for (auto d : ds) grid.cells.push_back(GridCell{g, d, std::nullopt, {}});

  std::optional<std::vector<int>> truth;
  if (data.labels) truth = encode_labels(*data.labels);

  // Cells run concurrently; restarts inside a cell then run serially.
  const std::size_t threads = resolve_threads(base.threads);
  parallel_for(grid.cells.size(), threads, [&](std::size_t idx) {
    GridCell& cell = grid.cells[idx];
    FitConfig config = base;
    config.groups = cell.groups;
    config.latent_dim = cell.latent_dim;
    config.seed = Rng(base.seed).split(cell.groups, cell.latent_dim).seed();
    config.threads = 1;
    try {
      cell.fit = fit(data, config);
      if (truth) cell.ari = adjusted_rand_index(*truth, cell.fit->map_labels);
    } catch (const Error& e) {
      cell.error = e.what();
    }
  });

  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < grid.cells.size(); ++i) {
    if (!grid.cells[i].fit) continue;
    if (!best || grid.cells[i].fit->bic < grid.cells[*best].fit->bic) best = i;
  }
  if (!best) {
    std::string msg = "every grid cell failed:";
    for (const auto& c : grid.cells)
      msg += "\n  G=" + std::to_string(c.groups) + " D=" + std::to_string(c.latent_dim) + ": " + c.error;
    throw SelectionFailed(msg);
  }
  grid.best = *best;
  return grid;
}

// ---------------------------------------------------------------------------
// Reporting.

// Response probability of the median individual (y = 0) per component and
// variable, alongside the observed response rates of the component's normal
// and extreme members, weighted by z_ig c_ig and z_ig (1 - c_ig).
struct MedianProfiles {
  Matrix median;        // G x M, sigmoid(alpha)
  Matrix normal_rate;   // G x M
  Matrix extreme_rate;  // G x M, NaN when the component has no extreme weight
};

inline MedianProfiles median_profiles(const MltcnParams& params, const BinaryDataset& data,
                                      const Matrix& z, const Matrix& c) {
  const auto G = static_cast<Eigen::Index>(params.groups());
  const auto M = static_cast<Eigen::Index>(params.variables());
  MedianProfiles out;
  out.median = params.alpha.unaryExpr([](double a) { return sigmoid(a); });
  out.normal_rate = Matrix(G, M);
  out.extreme_rate = Matrix(G, M);
  for (Eigen::Index g = 0; g < G; ++g) {
    const Vector wn = z.col(g).cwiseProduct(c.col(g));
    const Vector we = z.col(g).cwiseProduct((1.0 - c.col(g).array()).matrix());
    const double sn = wn.sum();
    const double se = we.sum();
    for (Eigen::Index m = 0; m < M; ++m) {
      out.normal_rate(g, m) = sn > 0.0 ? wn.dot(data.responses.col(m)) / sn
                                       : std::numeric_limits<double>::quiet_NaN();
      out.extreme_rate(g, m) = se > 0.0 ? we.dot(data.responses.col(m)) / se
                                        : std::numeric_limits<double>::quiet_NaN();
    }
  }
  return out;
}

inline MedianProfiles median_profiles(const FitResult& fit, const BinaryDataset& data) {
  return median_profiles(fit.params, data, fit.state.z, fit.state.c);
}

struct EvaluationReport {
  std::vector<std::string> label_names;
  std::size_t groups = 0;
  // cross_tab[label][group] = {normal count, extreme count}
  std::vector<std::vector<std::array<std::size_t, 2>>> cross_tab;
  double rand = 0.0;
  double ari = 0.0;
  std::size_t n_extreme = 0;
  std::size_t n_misclassified = 0;
  std::size_t n = 0;
};

inline EvaluationReport evaluation_report(std::span<const int> map_labels,
                                          std::span<const std::uint8_t> extreme_flags,
                                          std::size_t groups,
                                          const std::vector<std::string>& labels) {
  if (labels.size() != map_labels.size() || extreme_flags.size() != map_labels.size())
    throw ParameterDomain("label count does not match the fitted observations");
  EvaluationReport r;
  r.n = labels.size();
  r.groups = groups;
  const std::vector<int> truth = encode_labels(labels, &r.label_names);
  r.cross_tab.assign(r.label_names.size(),
                     std::vector<std::array<std::size_t, 2>>(groups, {0, 0}));
  for (std::size_t i = 0; i < r.n; ++i) {
    const auto g = static_cast<std::size_t>(map_labels[i]);
    if (g >= groups) throw ParameterDomain("component index out of range");
    ++r.cross_tab[static_cast<std::size_t>(truth[i])][g][extreme_flags[i] ? 1 : 0];
    r.n_extreme += extreme_flags[i];
  }
  r.rand = rand_index(truth, map_labels);
  r.ari = adjusted_rand_index(truth, map_labels);
  const auto agree = max_matching_agreement(contingency_table(map_labels, truth));
  r.n_misclassified = r.n - static_cast<std::size_t>(agree);
  return r;
}

inline EvaluationReport evaluation_report(const FitResult& fit, const std::vector<std::string>& labels) {
  return evaluation_report(fit.map_labels, fit.extreme_flags, fit.params.groups(), labels);
}

}  // namespace mltcn
