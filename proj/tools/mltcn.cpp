// Command-line front end: simulate, fit, select, encode, evaluate.
//
// Exit codes: 0 success, 1 failure, 2 fit finished without converging.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mltcn/io.hpp"

namespace {

using namespace mltcn;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitNotConverged = 2;

// Validates "lo:hi" (inclusive) or a single value.
IndexRange parse_range(const std::string& text, const char* flag) {
  const auto colon = text.find(':');
  try {
    std::size_t pos = 0;
    IndexRange r;
    if (colon == std::string::npos) {
      r.lo = r.hi = std::stoul(text, &pos);
      if (pos != text.size()) throw std::invalid_argument(text);
    } else {
      const std::string lo = text.substr(0, colon), hi = text.substr(colon + 1);
      r.lo = std::stoul(lo, &pos);
      if (pos != lo.size()) throw std::invalid_argument(text);
      r.hi = std::stoul(hi, &pos);
      if (pos != hi.size()) throw std::invalid_argument(text);
    }
    if (r.lo < 1 || r.hi < r.lo) throw std::invalid_argument(text);
    return r;
  } catch (const std::logic_error&) {
    throw CLI::ValidationError(flag, "expected lo:hi with 1 <= lo <= hi, got '" + text + "'");
  }
}

// Accepts reals strictly between lo and hi.
CLI::Validator open_interval(double lo, double hi) {
  return CLI::Validator(
      [lo, hi](std::string& text) -> std::string {
        double v = 0.0;
        if (!CLI::detail::lexical_cast(text, v)) return "'" + text + "' is not a number";
        if (!(v > lo && v < hi)) return "value " + text + " must lie in (" + io::format_real(lo) + ", " + io::format_real(hi) + ")";
        return {};
      },
      "(" + io::format_real(lo) + ", " + io::format_real(hi) + ")");
}

std::string with_suffix(const std::string& path, const std::string& ext) {
  std::filesystem::path p(path);
  p.replace_extension(ext);
  return p.string();
}

struct FitFlags {
  std::string data;
  std::string label_column;
  bool no_header = false;
  std::size_t restarts = 10;
  std::size_t max_iter = 1000;
  double epsilon = 0.01;
  double tau_floor = 0.5;
  double eta_ceiling = 1000.0;
  std::size_t xi_sweeps = 1;
  std::uint64_t seed = 0;
  bool rotation_adjust = false;
  std::string out;
};

void add_fit_flags(CLI::App* cmd, FitFlags& f) {
  cmd->add_option("--data", f.data, "Binary CSV dataset")->required()->check(CLI::ExistingFile);
  cmd->add_option("--label-column", f.label_column, "Name of the label column (default: label or party)");
  cmd->add_flag("--no-header", f.no_header, "The CSV has no header row");
  cmd->add_option("--restarts", f.restarts, "Random restarts")->check(CLI::PositiveNumber);
  cmd->add_option("--max-iter", f.max_iter, "Iteration cap per restart")->check(CLI::PositiveNumber);
  cmd->add_option("--epsilon", f.epsilon, "Aitken stopping tolerance")->check(CLI::PositiveNumber);
  cmd->add_option("--tau-floor", f.tau_floor, "Lower bound on tau")->check(CLI::Range(0.5, 0.999999));
  cmd->add_option("--eta-ceiling", f.eta_ceiling, "Upper bound on eta")
      ->check(open_interval(1.0, std::numeric_limits<double>::infinity()));
  cmd->add_option("--xi-sweeps", f.xi_sweeps, "Variational sweeps per iteration")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.seed, "Base seed");
  cmd->add_flag("--bic-rotation-adjust", f.rotation_adjust,
                "Subtract the rotational freedom of the slopes from the parameter count");
  cmd->add_option("--out", f.out, "Output path")->required();
}

FitConfig to_config(const FitFlags& f, int threads) {
  FitConfig c;
  c.restarts = f.restarts;
  c.max_iter = f.max_iter;
  c.aitken_epsilon = f.epsilon;
  c.tau_floor = f.tau_floor;
  c.eta_ceiling = f.eta_ceiling;
  c.inner_xi_sweeps = f.xi_sweeps;
  c.seed = f.seed;
  c.bic_rotation_adjust = f.rotation_adjust;
  c.threads = threads;
  return c;
}

BinaryDataset load(const FitFlags& f) {
  io::CsvOptions opts;
  opts.has_header = !f.no_header;
  opts.label_column = f.label_column;
  return io::read_binary_csv(f.data, opts);
}

void report_restart_errors(const FitResult& r) {
  for (std::size_t i = 0; i < r.restart_errors.size(); ++i)
    if (!r.restart_errors[i].empty())
      std::cerr << "restart " << i << " failed: " << r.restart_errors[i] << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixtures of latent trait models with contaminated-normal latent variables"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: LTR_THREADS or all cores)")
      ->check(CLI::NonNegativeNumber);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Draw a dataset from the simulation design");
  std::size_t sim_n = 500;
  SimulationDesign design;
  std::uint64_t sim_seed = 0;
  std::string sim_out;
  sim->add_option("--n", sim_n, "Observations")->check(CLI::PositiveNumber);
  sim->add_option("--m", design.m, "Binary variables")->check(CLI::PositiveNumber);
  sim->add_option("--g", design.g, "Components")->check(CLI::PositiveNumber);
  sim->add_option("--d", design.d, "Latent dimension")->check(CLI::Range(std::size_t{1}, std::size_t{16}));
  sim->add_option("--pi", design.pi, "Mixing weights (one or G values)")->delimiter(',');
  sim->add_option("--tau", design.tau, "Normal-branch probabilities in (0.5, 1)")
      ->delimiter(',')
      ->check(open_interval(0.5, 1.0));
  sim->add_option("--eta", design.eta, "Variance inflation factors > 1")
      ->delimiter(',')
      ->check(open_interval(1.0, std::numeric_limits<double>::infinity()));
  sim->add_option("--alpha-range", design.alpha_range, "Intercepts ~ U(-a, a)")->check(CLI::NonNegativeNumber);
  sim->add_option("--slope-range", design.slope_range, "Slopes ~ U(-s, s)")->check(CLI::NonNegativeNumber);
  sim->add_option("--seed", sim_seed, "Seed");
  sim->add_option("--out", sim_out, "Dataset CSV; the truth goes to the same path with .json")->required();

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Fit one (G, D) model");
  FitFlags fit_flags;
  std::size_t fit_g = 2, fit_d = 2;
  add_fit_flags(fit_cmd, fit_flags);
  fit_cmd->add_option("--g", fit_g, "Components")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--d", fit_d, "Latent dimension")->check(CLI::Range(std::size_t{1}, std::size_t{16}));

  // select
  auto* sel = app.add_subcommand("select", "Fit a (G, D) grid and pick the minimum BIC");
  FitFlags sel_flags;
  std::string g_range_text = "1:4", d_range_text = "1:4";
  add_fit_flags(sel, sel_flags);
  sel->add_option("--g-range", g_range_text, "Components, lo:hi inclusive");
  sel->add_option("--d-range", d_range_text, "Latent dimensions, lo:hi inclusive");

  // encode
  auto* enc = app.add_subcommand("encode", "Encode a y/n/? vote table as binary A/B variables");
  std::string raw_path, enc_out;
  enc->add_option("--raw", raw_path, "Vote CSV")->required()->check(CLI::ExistingFile);
  enc->add_option("--out", enc_out, "Binary CSV")->required();

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Compare a fit with known labels");
  std::string eval_fit, eval_labels, eval_out, eval_data;
  eval->add_option("--fit", eval_fit, "Fit JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--labels", eval_labels, "Label CSV or simulation truth JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", eval_data, "Dataset CSV; adds response-profile tables")->check(CLI::ExistingFile);
  eval->add_option("--out", eval_out, "Report JSON; CSV tables are written alongside")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitFailure;
  }

  try {
    if (*sim) {
      const MltcnParams params = make_simulation_params(design, sim_seed);
      auto [data, truth] = sample_mltcn(params, sim_n, Rng(sim_seed).split(1).seed());
      io::write_binary_csv(data, sim_out);
      const std::string truth_path = with_suffix(sim_out, ".json");
      io::write_json(io::truth_to_json(params, truth, sim_seed), truth_path);
      std::size_t normal = 0;
      for (auto v : truth.normal) normal += v;
      std::cout << "simulated n=" << data.n() << " M=" << data.m() << " G=" << params.groups()
                << " D=" << params.latent_dim() << " extreme=" << data.n() - normal << " -> " << sim_out
                << ", " << truth_path << '\n';
      return kExitOk;
    }

    if (*fit_cmd) {
      const BinaryDataset data = load(fit_flags);
      FitConfig config = to_config(fit_flags, threads);
      config.groups = fit_g;
      config.latent_dim = fit_d;
      FitResult r;
      try {
        r = fit(data, config);
      } catch (const FitFailed& e) {
        std::cerr << "fit failed: " << e.what() << '\n';
        return kExitFailure;
      }
      report_restart_errors(r);
      io::write_fit(r, fit_flags.out);
      std::cout << "G=" << fit_g << " D=" << fit_d << " bound=" << io::format_real(r.bound)
                << " bic=" << io::format_real(r.bic) << " iterations=" << r.iterations
                << " converged=" << (r.converged ? "yes" : "no") << " extreme=" << r.extreme_count() << '\n';
      if (!r.converged) {
        std::cerr << "warning: best restart stopped at --max-iter " << config.max_iter << " without converging\n";
        return kExitNotConverged;
      }
      return kExitOk;
    }

    if (*sel) {
      const IndexRange gr = parse_range(g_range_text, "--g-range");
      const IndexRange dr = parse_range(d_range_text, "--d-range");
      const BinaryDataset data = load(sel_flags);
      SelectionGrid grid;
      try {
        grid = grid_select(data, gr, dr, to_config(sel_flags, threads));
      } catch (const SelectionFailed& e) {
        std::cerr << e.what() << '\n';
        return kExitFailure;
      }
      for (const auto& c : grid.cells)
        if (!c.fit) std::cerr << "cell G=" << c.groups << " D=" << c.latent_dim << " failed: " << c.error << '\n';
      io::write_grid(grid, sel_flags.out);
      io::write_grid_csv(grid, with_suffix(sel_flags.out, ".csv"));
      const auto& best = grid.best_cell();
      io::write_series_csv(grid, best.latent_dim, with_suffix(sel_flags.out, ".series.csv"));
      std::cout << "best G=" << best.groups << " D=" << best.latent_dim << " bic=" << io::format_real(best.fit->bic)
                << '\n';
      return kExitOk;
    }

    if (*enc) {
      const auto raw = io::read_vote_csv(raw_path);
      const BinaryDataset data = io::encode_votes(raw);
      io::CsvLayout layout;
      layout.label_index = 0;
      layout.label_name = "party";
      io::write_binary_csv(data, enc_out, layout);
      std::cout << "encoded " << raw.n() << "x" << raw.issues() << " votes as " << data.n() << "x" << data.m()
                << " binary -> " << enc_out << '\n';
      return kExitOk;
    }

    if (*eval) {
      const FitResult r = io::read_fit(eval_fit);
      const auto labels = io::read_labels(eval_labels);
      const EvaluationReport report = evaluation_report(r, labels);
      io::write_report(report, eval_out);
      io::write_report_csv(report, with_suffix(eval_out, ".csv"));
      if (!eval_data.empty()) {
        const BinaryDataset data = io::read_binary_csv(eval_data);
        if (data.n() != r.map_labels.size() || data.m() != r.params.variables())
          throw ParameterDomain("--data does not match the fitted dataset");
        io::write_profiles_csv(median_profiles(r, data), data.variable_names,
                               with_suffix(eval_out, ".profiles.csv"));
      }
      std::cout << "rand=" << io::format_real(report.rand) << " ari=" << io::format_real(report.ari)
                << " misclassified=" << report.n_misclassified << " extreme=" << report.n_extreme << '\n';
      return kExitOk;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << '\n';
    return kExitFailure;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
