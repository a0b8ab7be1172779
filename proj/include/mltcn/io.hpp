#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mltcn/ecm.hpp"
#include "mltcn/errors.hpp"
#include "mltcn/model.hpp"
#include "mltcn/selection.hpp"

namespace mltcn::io {

using nlohmann::json;

inline constexpr const char* kFitFormat = "mltcn-fit/1";
inline constexpr const char* kGridFormat = "mltcn-grid/1";
inline constexpr const char* kReportFormat = "mltcn-report/1";
inline constexpr const char* kTruthFormat = "mltcn-truth/1";

// ---------------------------------------------------------------------------
// Text helpers.

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return s;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

inline void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError("write failed for " + path);
}

// Shortest decimal form that reads back to the same double.
inline std::string format_real(double v) {
  if (std::isnan(v)) return "NA";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  const std::string full = os.str();
  for (int p = 1; p < 17; ++p) {
    std::ostringstream t;
    t << std::setprecision(p) << v;
    if (std::stod(t.str()) == v) return t.str();
  }
  return full;
}

// ---------------------------------------------------------------------------
// Binary CSV.

struct CsvOptions {
  bool has_header = true;
  // Name of the label column. Empty: use a column named "label" or "party"
  // (case-insensitive) when the header has one.
  std::string label_column;
};

// Position and name of the label column, kept so that datasets round-trip.
struct CsvLayout {
  std::optional<std::size_t> label_index;
  std::string label_name;
};

inline BinaryDataset read_binary_csv(const std::string& path, const CsvOptions& opts = {},
                                     CsvLayout* layout = nullptr) {
  const auto lines = read_lines(path);
  std::size_t first = 0;
  std::vector<std::string> header;
  if (opts.has_header) {
    if (lines.empty()) throw ParseError(1, 0, "missing header row");
    header = split_csv_line(lines[0]);
    first = 1;
  }
  std::optional<std::size_t> label_index;
  if (opts.has_header) {
    for (std::size_t j = 0; j < header.size(); ++j) {
      const std::string h = lower(header[j]);
      const bool match = opts.label_column.empty() ? (h == "label" || h == "party")
                                                   : header[j] == opts.label_column;
      if (match) {
        label_index = j;
        break;
      }
    }
    if (!opts.label_column.empty() && !label_index)
      throw ParseError(1, 0, "label column '" + opts.label_column + "' not found");
  }
  const std::size_t width = opts.has_header ? header.size()
                                            : (lines.empty() ? 0 : split_csv_line(lines[0]).size());
  const std::size_t n = lines.size() - first;
  if (n == 0) throw ParseError(first + 1, 0, "no data rows");
  const std::size_t m = width - (label_index ? 1 : 0);
  if (m == 0) throw ParseError(first + 1, 0, "no response columns");

  BinaryDataset data;
  data.responses = Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  std::vector<std::string> labels;
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t line_no = first + r + 1;
    const auto fields = split_csv_line(lines[first + r]);
    if (fields.size() != width)
      throw ParseError(line_no, 0, "expected " + std::to_string(width) + " fields, found " +
                                       std::to_string(fields.size()));
    std::size_t col = 0;
    for (std::size_t j = 0; j < width; ++j) {
      if (label_index && j == *label_index) {
        labels.push_back(fields[j]);
        continue;
      }
      double v;
      if (fields[j] == "0") {
        v = 0.0;
      } else if (fields[j] == "1") {
        v = 1.0;
      } else {
        throw ParseError(line_no, j + 1, "expected 0 or 1, found '" + fields[j] + "'");
      }
      data.responses(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col++)) = v;
    }
  }
  if (label_index) data.labels = std::move(labels);
  if (opts.has_header) {
    for (std::size_t j = 0; j < width; ++j)
      if (!label_index || j != *label_index) data.variable_names.push_back(header[j]);
  }
  if (layout) {
    layout->label_index = label_index;
    layout->label_name = label_index ? header[*label_index] : std::string{};
  }
  return data;
}

// Header row of variable names (V1..VM when unnamed); labels, when present, go
// in column `layout.label_index` (default first) under `layout.label_name`
// (default "label").
inline void write_binary_csv(const BinaryDataset& data, const std::string& path,
                             const CsvLayout& layout = {}) {
  data.validate();
  const std::size_t m = data.m();
  std::vector<std::string> names = data.variable_names;
  if (names.empty())
    for (std::size_t j = 0; j < m; ++j) names.push_back("V" + std::to_string(j + 1));
  const bool has_labels = data.labels.has_value();
  const std::size_t label_at = std::min(layout.label_index.value_or(0), m);
  const std::string label_name = layout.label_name.empty() ? "label" : layout.label_name;

  auto out = open_output(path);
  auto emit_row = [&](auto&& cell_text, const std::string& label) {
    std::size_t var = 0;
    const std::size_t width = m + (has_labels ? 1 : 0);
    for (std::size_t j = 0; j < width; ++j) {
      if (j) out << ',';
      if (has_labels && j == label_at) {
        out << label;
      } else {
        out << cell_text(var++);
      }
    }
    out << '\n';
  };
  emit_row([&](std::size_t j) { return names[j]; }, label_name);
  for (std::size_t i = 0; i < data.n(); ++i)
    emit_row([&](std::size_t j) {
      return data.responses(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) == 1.0 ? "1" : "0";
    }, has_labels ? (*data.labels)[i] : std::string{});
  finish(out, path);
}

// ---------------------------------------------------------------------------
// Roll-call votes.

enum class Vote : std::uint8_t { no = 0, yes = 1, undecided = 2 };

struct RawVoteTable {
  std::vector<std::vector<Vote>> votes;  // n x Q
  std::optional<std::vector<std::string>> party;
  std::vector<std::string> issue_names;

  std::size_t n() const { return votes.size(); }
  std::size_t issues() const { return issue_names.size(); }
};

// "y" and "n" (any case, surrounding blanks ignored); "?", "undecided" and
// the empty cell all mean undecided.
inline std::optional<Vote> parse_vote(std::string_view cell) {
  const std::string v = lower(trim(cell));
  if (v == "y") return Vote::yes;
  if (v == "n") return Vote::no;
  if (v == "?" || v == "undecided" || v.empty()) return Vote::undecided;
  return std::nullopt;
}

// Reads a vote table with a header row. A column named "party" (any case)
// holds the labels; every other column is an issue.
inline RawVoteTable read_vote_csv(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw ParseError(1, 0, "missing header row");
  const auto header = split_csv_line(lines[0]);
  std::optional<std::size_t> party_index;
  RawVoteTable t;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (!party_index && lower(header[j]) == "party") {
      party_index = j;
    } else {
      t.issue_names.push_back(header[j]);
    }
  }
  if (t.issue_names.empty()) throw ParseError(1, 0, "no issue columns");
  std::vector<std::string> party;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = split_csv_line(lines[r]);
    if (fields.size() != header.size())
      throw ParseError(r + 1, 0, "expected " + std::to_string(header.size()) + " fields, found " +
                                     std::to_string(fields.size()));
    std::vector<Vote> row;
    row.reserve(t.issue_names.size());
    for (std::size_t j = 0; j < fields.size(); ++j) {
      if (party_index && j == *party_index) {
        party.push_back(fields[j]);
        continue;
      }
      const auto v = parse_vote(fields[j]);
      if (!v) throw ParseError(r + 1, j + 1, "unrecognized vote '" + fields[j] + "'");
      row.push_back(*v);
    }
    t.votes.push_back(std::move(row));
  }
  if (t.votes.empty()) throw ParseError(2, 0, "no data rows");
  if (party_index) t.party = std::move(party);
  return t;
}

// Two binary variables per issue q, in the order qA, qB:
//   A = 1 when a yes or no vote was cast, 0 when undecided;
//   B = 1 for a yes vote, 0 for no or undecided.
inline BinaryDataset encode_votes(const RawVoteTable& raw) {
  const std::size_t n = raw.n();
  const std::size_t q = raw.issues();
  BinaryDataset data;
  data.responses = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(2 * q));
  for (std::size_t i = 0; i < n; ++i) {
    if (raw.votes[i].size() != q) throw ParseError(i + 2, 0, "row has the wrong number of votes");
    for (std::size_t j = 0; j < q; ++j) {
      const Vote v = raw.votes[i][j];
      const auto I = static_cast<Eigen::Index>(i);
      data.responses(I, static_cast<Eigen::Index>(2 * j)) = v == Vote::undecided ? 0.0 : 1.0;
      data.responses(I, static_cast<Eigen::Index>(2 * j + 1)) = v == Vote::yes ? 1.0 : 0.0;
    }
  }
  for (std::size_t j = 0; j < q; ++j) {
    data.variable_names.push_back(std::to_string(j + 1) + "A");
    data.variable_names.push_back(std::to_string(j + 1) + "B");
  }
  data.labels = raw.party;
  return data;
}

// ---------------------------------------------------------------------------
// JSON conversion. Reals are stored with round-trip precision; NaN becomes null.

inline json real_to_json(double v) { return std::isnan(v) ? json(nullptr) : json(v); }
inline double real_from_json(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(real_to_json(v[i]));
  return a;
}

inline json to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(real_to_json(m(i, j)));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline Vector vector_from_json(const json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = real_from_json(j[i]);
  return v;
}

// `cols` is used when there are no rows to infer it from.
inline Matrix matrix_from_json(const json& j, Eigen::Index cols = 0) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows > 0) cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& r = j[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(r.size()) != cols) throw ParseError(0, 0, "ragged matrix in JSON");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = real_from_json(r[static_cast<std::size_t>(k)]);
  }
  return m;
}

inline json params_to_json(const MltcnParams& p) {
  json w = json::array();
  for (const auto& wg : p.w) w.push_back(to_json(wg));
  return {{"groups", p.groups()},     {"variables", p.variables()}, {"latent_dim", p.latent_dim()},
          {"pi", to_json(p.pi)},      {"alpha", to_json(p.alpha)},  {"w", w},
          {"tau", to_json(p.tau)},    {"eta", to_json(p.eta)}};
}

inline MltcnParams params_from_json(const json& j) {
  MltcnParams p;
  const auto M = j.at("variables").get<Eigen::Index>();
  const auto D = j.at("latent_dim").get<Eigen::Index>();
  p.pi = vector_from_json(j.at("pi"));
  p.alpha = matrix_from_json(j.at("alpha"), M);
  for (const auto& wg : j.at("w")) {
    Matrix m = matrix_from_json(wg, D);
    if (m.rows() == 0) m.resize(M, D);
    p.w.push_back(std::move(m));
  }
  p.tau = vector_from_json(j.at("tau"));
  p.eta = vector_from_json(j.at("eta"));
  return p;
}

inline json config_to_json(const FitConfig& c) {
  return {{"groups", c.groups},
          {"latent_dim", c.latent_dim},
          {"max_iter", c.max_iter},
          {"aitken_epsilon", c.aitken_epsilon},
          {"restarts", c.restarts},
          {"seed", c.seed},
          {"tau_floor", c.tau_floor},
          {"eta_ceiling", c.eta_ceiling},
          {"inner_xi_sweeps", c.inner_xi_sweeps},
          {"bic_rotation_adjust", c.bic_rotation_adjust}};
}

inline FitConfig config_from_json(const json& j) {
  FitConfig c;
  c.groups = j.at("groups").get<std::size_t>();
  c.latent_dim = j.at("latent_dim").get<std::size_t>();
  c.max_iter = j.at("max_iter").get<std::size_t>();
  c.aitken_epsilon = j.at("aitken_epsilon").get<double>();
  c.restarts = j.at("restarts").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.tau_floor = j.at("tau_floor").get<double>();
  c.eta_ceiling = j.at("eta_ceiling").get<double>();
  c.inner_xi_sweeps = j.at("inner_xi_sweeps").get<std::size_t>();
  c.bic_rotation_adjust = j.at("bic_rotation_adjust").get<bool>();
  return c;
}

inline json state_to_json(const VariationalState& s) {
  json branches = json::array();
  for (std::size_t k : kBranches) {
    json comps = json::array();
    for (std::size_t g = 0; g < s.xi[k].size(); ++g) {
      json sig = json::array();
      for (const auto& m : s.sigma[k][g]) sig.push_back(to_json(m));
      comps.push_back({{"xi", to_json(s.xi[k][g])},
                       {"mu", to_json(s.mu[k][g])},
                       {"sigma", sig},
                       {"precision_mean", to_json(s.precision_mean[k][g])},
                       {"log_det", to_json(s.log_det[k][g])},
                       {"b_coef", to_json(s.b_coef[k][g])},
                       {"xi_term", to_json(s.xi_term[k][g])}});
    }
    branches.push_back({{"branch", k == kNormal ? "normal" : "extreme"},
                        {"components", comps},
                        {"bound", to_json(s.branch_bound[k])}});
  }
  return {{"z", to_json(s.z)},
          {"c", to_json(s.c)},
          {"component_bound", to_json(s.component_bound)},
          {"branches", branches}};
}

inline VariationalState state_from_json(const json& j, Eigen::Index m, Eigen::Index d) {
  VariationalState s;
  s.z = matrix_from_json(j.at("z"));
  s.c = matrix_from_json(j.at("c"), s.z.cols());
  s.component_bound = matrix_from_json(j.at("component_bound"), s.z.cols());
  const auto& branches = j.at("branches");
  if (branches.size() != 2) throw ParseError(0, 0, "state must have two branches");
  for (std::size_t k : kBranches) {
    const auto& b = branches[k];
    s.branch_bound[k] = matrix_from_json(b.at("bound"), s.z.cols());
    for (const auto& comp : b.at("components")) {
      s.xi[k].push_back(matrix_from_json(comp.at("xi"), m));
      s.mu[k].push_back(matrix_from_json(comp.at("mu"), d));
      std::vector<Matrix> sig;
      for (const auto& sm : comp.at("sigma")) {
        Matrix mm = matrix_from_json(sm, d);
        if (mm.rows() == 0) mm.resize(d, d);
        sig.push_back(std::move(mm));
      }
      s.sigma[k].push_back(std::move(sig));
      s.precision_mean[k].push_back(matrix_from_json(comp.at("precision_mean"), d));
      s.log_det[k].push_back(vector_from_json(comp.at("log_det")));
      s.b_coef[k].push_back(matrix_from_json(comp.at("b_coef"), m));
      s.xi_term[k].push_back(matrix_from_json(comp.at("xi_term"), m));
    }
  }
  return s;
}

inline json fit_to_json(const FitResult& r) {
  json restarts = json::array();
  for (std::size_t i = 0; i < r.restart_bounds.size(); ++i)
    restarts.push_back({{"bound", real_to_json(r.restart_bounds[i])},
                        {"error", i < r.restart_errors.size() ? r.restart_errors[i] : std::string{}}});
  json trace = json::array();
  for (double v : r.bound_trace) trace.push_back(real_to_json(v));
  std::vector<int> extreme(r.extreme_flags.begin(), r.extreme_flags.end());
  return {{"format_version", kFitFormat},
          {"config", config_to_json(r.config)},
          {"seed", r.config.seed},
          {"params", params_to_json(r.params)},
          {"bound", real_to_json(r.bound)},
          {"bic", real_to_json(r.bic)},
          {"converged", r.converged},
          {"iterations", r.iterations},
          {"bound_trace", trace},
          {"map_labels", r.map_labels},
          {"extreme_flags", extreme},
          {"best_restart", r.best_restart},
          {"restarts", restarts},
          {"state", state_to_json(r.state)}};
}

inline void check_version(const json& j, const char* expected) {
  const auto it = j.find("format_version");
  if (it == j.end() || !it->is_string() || it->get<std::string>() != expected)
    throw VersionError(std::string("expected format_version ") + expected + ", found " +
                       (it == j.end() ? std::string("none") : it->dump()));
}

inline FitResult fit_from_json(const json& j) {
  check_version(j, kFitFormat);
  FitResult r;
  r.config = config_from_json(j.at("config"));
  r.params = params_from_json(j.at("params"));
  r.bound = real_from_json(j.at("bound"));
  r.bic = real_from_json(j.at("bic"));
  r.converged = j.at("converged").get<bool>();
  r.iterations = j.at("iterations").get<std::size_t>();
  for (const auto& v : j.at("bound_trace")) r.bound_trace.push_back(real_from_json(v));
  r.map_labels = j.at("map_labels").get<std::vector<int>>();
  for (int f : j.at("extreme_flags").get<std::vector<int>>()) r.extreme_flags.push_back(f ? 1 : 0);
  r.best_restart = j.at("best_restart").get<std::size_t>();
  for (const auto& rs : j.at("restarts")) {
    r.restart_bounds.push_back(real_from_json(rs.at("bound")));
    r.restart_errors.push_back(rs.at("error").get<std::string>());
  }
  r.state = state_from_json(j.at("state"), static_cast<Eigen::Index>(r.params.variables()),
                            static_cast<Eigen::Index>(r.params.latent_dim()));
  return r;
}

inline void write_json(const json& j, const std::string& path) {
  auto out = open_output(path);
  out << j.dump(1) << '\n';
  finish(out, path);
}

inline json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(0, 0, std::string("invalid JSON in ") + path + ": " + e.what());
  }
}

inline void write_fit(const FitResult& r, const std::string& path) { write_json(fit_to_json(r), path); }

inline FitResult read_fit(const std::string& path) {
  try {
    return fit_from_json(read_json(path));
  } catch (const json::exception& e) {
    throw ParseError(0, 0, std::string("malformed fit document ") + path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Selection grid.

inline json grid_to_json(const SelectionGrid& grid, bool include_fits = false) {
  json cells = json::array();
  for (const auto& c : grid.cells) {
    json cell = {{"groups", c.groups}, {"latent_dim", c.latent_dim}, {"ok", c.fit.has_value()}};
    if (c.fit) {
      cell["bic"] = real_to_json(c.fit->bic);
      cell["bound"] = real_to_json(c.fit->bound);
      cell["converged"] = c.fit->converged;
      cell["iterations"] = c.fit->iterations;
      cell["extreme_count"] = c.fit->extreme_count();
      cell["params"] = params_to_json(c.fit->params);
      if (include_fits) cell["fit"] = fit_to_json(*c.fit);
    } else {
      cell["error"] = c.error;
    }
    if (!std::isnan(c.ari)) cell["ari"] = c.ari;
    cells.push_back(std::move(cell));
  }
  const auto& b = grid.best_cell();
  return {{"format_version", kGridFormat},
          {"cells", cells},
          {"best", {{"groups", b.groups}, {"latent_dim", b.latent_dim}, {"bic", real_to_json(b.fit->bic)}}}};
}

inline void write_grid(const SelectionGrid& grid, const std::string& path) {
  write_json(grid_to_json(grid), path);
}

// BIC table: one row per D, one column per G, "NA" for failed cells.
inline void write_grid_csv(const SelectionGrid& grid, const std::string& path) {
  std::vector<std::size_t> gs, ds;
  for (const auto& c : grid.cells) {
    if (std::find(gs.begin(), gs.end(), c.groups) == gs.end()) gs.push_back(c.groups);
    if (std::find(ds.begin(), ds.end(), c.latent_dim) == ds.end()) ds.push_back(c.latent_dim);
  }
  std::sort(gs.begin(), gs.end());
  std::sort(ds.begin(), ds.end());
  auto out = open_output(path);
  out << "D";
  for (auto g : gs) out << ",G=" << g;
  out << '\n';
  for (auto d : ds) {
    out << d;
    for (auto g : gs) {
      out << ',';
      const auto it = std::find_if(grid.cells.begin(), grid.cells.end(),
                                   [&](const GridCell& c) { return c.groups == g && c.latent_dim == d; });
      out << (it != grid.cells.end() && it->fit ? format_real(it->fit->bic) : std::string("NA"));
    }
    out << '\n';
  }
  finish(out, path);
}

// BIC and ARI against G for one latent dimension, for plotting.
inline void write_series_csv(const SelectionGrid& grid, std::size_t latent_dim, const std::string& path) {
  auto out = open_output(path);
  out << "G,bic,ari\n";
  for (const auto& c : grid.cells) {
    if (c.latent_dim != latent_dim) continue;
    out << c.groups << ',' << (c.fit ? format_real(c.fit->bic) : "NA") << ',' << format_real(c.ari) << '\n';
  }
  finish(out, path);
}

// ---------------------------------------------------------------------------
// Evaluation report and median profiles.

inline json report_to_json(const EvaluationReport& r) {
  json table = json::array();
  for (std::size_t l = 0; l < r.label_names.size(); ++l) {
    json groups = json::array();
    for (std::size_t g = 0; g < r.groups; ++g)
      groups.push_back({{"group", g + 1}, {"normal", r.cross_tab[l][g][0]}, {"extreme", r.cross_tab[l][g][1]}});
    table.push_back({{"label", r.label_names[l]}, {"groups", groups}});
  }
  return {{"format_version", kReportFormat},
          {"n", r.n},
          {"rand", r.rand},
          {"ari", r.ari},
          {"n_extreme", r.n_extreme},
          {"n_misclassified", r.n_misclassified},
          {"cross_tab", table}};
}

inline EvaluationReport report_from_json(const json& j) {
  check_version(j, kReportFormat);
  EvaluationReport r;
  r.n = j.at("n").get<std::size_t>();
  r.rand = j.at("rand").get<double>();
  r.ari = j.at("ari").get<double>();
  r.n_extreme = j.at("n_extreme").get<std::size_t>();
  r.n_misclassified = j.at("n_misclassified").get<std::size_t>();
  for (const auto& row : j.at("cross_tab")) {
    r.label_names.push_back(row.at("label").get<std::string>());
    std::vector<std::array<std::size_t, 2>> groups;
    for (const auto& g : row.at("groups"))
      groups.push_back({g.at("normal").get<std::size_t>(), g.at("extreme").get<std::size_t>()});
    r.groups = groups.size();
    r.cross_tab.push_back(std::move(groups));
  }
  return r;
}

inline void write_report(const EvaluationReport& r, const std::string& path) {
  write_json(report_to_json(r), path);
}

// Cross-tabulation: one row per label, a total/normal/extreme triple per group.
inline void write_report_csv(const EvaluationReport& r, const std::string& path) {
  auto out = open_output(path);
  out << "label";
  for (std::size_t g = 0; g < r.groups; ++g)
    out << ",group" << g + 1 << ",group" << g + 1 << "_normal,group" << g + 1 << "_extreme";
  out << '\n';
  for (std::size_t l = 0; l < r.label_names.size(); ++l) {
    out << r.label_names[l];
    for (std::size_t g = 0; g < r.groups; ++g) {
      const auto& cell = r.cross_tab[l][g];
      out << ',' << cell[0] + cell[1] << ',' << cell[0] << ',' << cell[1];
    }
    out << '\n';
  }
  finish(out, path);
}

// One row per variable; per group the median-individual probability and the
// normal and extreme response rates.
inline void write_profiles_csv(const MedianProfiles& p, const std::vector<std::string>& names,
                               const std::string& path) {
  auto out = open_output(path);
  const auto G = p.median.rows();
  const auto M = p.median.cols();
  out << "variable";
  for (Eigen::Index g = 0; g < G; ++g)
    out << ",group" << g + 1 << "_median,group" << g + 1 << "_normal,group" << g + 1 << "_extreme";
  out << '\n';
  for (Eigen::Index m = 0; m < M; ++m) {
    out << (static_cast<std::size_t>(m) < names.size() ? names[static_cast<std::size_t>(m)]
                                                       : "V" + std::to_string(m + 1));
    for (Eigen::Index g = 0; g < G; ++g)
      out << ',' << format_real(p.median(g, m)) << ',' << format_real(p.normal_rate(g, m)) << ','
          << format_real(p.extreme_rate(g, m));
    out << '\n';
  }
  finish(out, path);
}

// ---------------------------------------------------------------------------
// Simulation truth.

inline json truth_to_json(const MltcnParams& params, const LatentAssignment& truth, std::uint64_t seed) {
  std::vector<int> labels;
  for (int g : truth.group) labels.push_back(g + 1);
  std::vector<int> normal(truth.normal.begin(), truth.normal.end());
  return {{"format_version", kTruthFormat},
          {"seed", seed},
          {"params", params_to_json(params)},
          {"labels", labels},
          {"normal", normal},
          {"latent", to_json(truth.y)}};
}

// Labels for evaluation: a truth JSON document, or a CSV whose label column
// is named "label"/"party" (or is the only column).
inline std::vector<std::string> read_labels(const std::string& path) {
  if (path.size() >= 5 && lower(path.substr(path.size() - 5)) == ".json") {
    const json j = read_json(path);
    check_version(j, kTruthFormat);
    std::vector<std::string> out;
    for (int l : j.at("labels").get<std::vector<int>>()) out.push_back(std::to_string(l));
    return out;
  }
  const auto lines = read_lines(path);
  if (lines.empty()) throw ParseError(1, 0, "empty label file");
  const auto header = split_csv_line(lines[0]);
  std::optional<std::size_t> col;
  for (std::size_t j = 0; j < header.size(); ++j) {
    const auto h = lower(header[j]);
    if (h == "label" || h == "party") {
      col = j;
      break;
    }
  }
  if (!col && header.size() == 1) col = 0;
  if (!col) throw ParseError(1, 0, "no label or party column");
  std::vector<std::string> out;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto f = split_csv_line(lines[r]);
    if (f.size() != header.size()) throw ParseError(r + 1, 0, "ragged row");
    out.push_back(f[*col]);
  }
  return out;
}

}  // namespace mltcn::io
