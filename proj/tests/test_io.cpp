#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "mltcn/io.hpp"

using namespace mltcn;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const auto dir = fs::temp_directory_path() / "mltcn_test_io";
  fs::create_directories(dir);
  return dir;
}

std::string write_text(const std::string& name, const std::string& text) {
  const auto path = (scratch_dir() / name).string();
  std::ofstream(path, std::ios::binary) << text;
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

FitResult small_fit() {
  auto p = make_simulation_params({.m = 6, .g = 2, .d = 1}, 3);
  auto [data, truth] = sample_mltcn(p, 60, 4);
  FitConfig cfg;
  cfg.groups = 2;
  cfg.latent_dim = 1;
  cfg.restarts = 2;
  cfg.seed = 5;
  return fit(data, cfg);
}

}  // namespace

TEST(BinaryCsv, ReadsHeaderAndCells) {
  const auto path = write_text("plain.csv", "a,b,c\n1,0,1\n0,0,1\n");
  const auto d = io::read_binary_csv(path);
  EXPECT_EQ(d.n(), 2u);
  EXPECT_EQ(d.m(), 3u);
  EXPECT_EQ(d.responses(0, 2), 1.0);
  EXPECT_EQ(d.responses(1, 0), 0.0);
  EXPECT_EQ(d.variable_names, (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_FALSE(d.labels.has_value());
}

TEST(BinaryCsv, ReportsRowAndColumnOfBadCell) {
  const auto path = write_text("bad.csv", "a,b,c\n1,0,1\n0,2,1\n");
  try {
    io::read_binary_csv(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 3u);
    EXPECT_EQ(e.column(), 2u);
  }
}

TEST(BinaryCsv, RejectsRaggedRows) {
  const auto path = write_text("ragged.csv", "a,b\n1,0\n1\n");
  try {
    io::read_binary_csv(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 3u);
  }
}

TEST(BinaryCsv, LabelColumn) {
  const auto path = write_text("labelled.csv", "x1,Party,x2\n1,dem,0\n0,rep,1\n");
  io::CsvLayout layout;
  const auto d = io::read_binary_csv(path, {}, &layout);
  ASSERT_TRUE(d.labels.has_value());
  EXPECT_EQ(*d.labels, (std::vector<std::string>{"dem", "rep"}));
  EXPECT_EQ(d.m(), 2u);
  EXPECT_EQ(layout.label_index, 1u);
  EXPECT_THROW(io::read_binary_csv(path, {.label_column = "missing"}), ParseError);
  // Without a header the label column is not detected; "dem" is a bad cell.
  EXPECT_THROW(io::read_binary_csv(path, {.has_header = false}), ParseError);
}

TEST(BinaryCsv, RoundTripIsByteIdentical) {
  const std::string text = "v1,v2,label,v3\n1,0,a,1\n0,0,b,0\n1,1,a,1\n";
  const auto in = write_text("round.csv", text);
  io::CsvLayout layout;
  const auto d = io::read_binary_csv(in, {}, &layout);
  const auto out = (scratch_dir() / "round_out.csv").string();
  io::write_binary_csv(d, out, layout);
  EXPECT_EQ(slurp(out), text);
}

TEST(BinaryCsv, MissingFileIsIoError) {
  EXPECT_THROW(io::read_binary_csv("/nonexistent/dir/x.csv"), IoError);
}

TEST(Votes, EncodesTwoVariablesPerIssue) {
  const auto path = write_text("votes.csv", "party,i1,i2\nd,y,n\nr,?,y\nd,?,?\n");
  const auto raw = io::read_vote_csv(path);
  const auto d = io::encode_votes(raw);
  EXPECT_EQ(d.m(), 4u);
  EXPECT_EQ(d.variable_names, (std::vector<std::string>{"1A", "1B", "2A", "2B"}));
  const Matrix expected = (Matrix(3, 4) << 1, 1, 1, 0,  //
                           0, 0, 1, 1,                  //
                           0, 0, 0, 0)
                              .finished();
  EXPECT_EQ(d.responses, expected);
  EXPECT_EQ(*d.labels, (std::vector<std::string>{"d", "r", "d"}));
}

TEST(Votes, UnknownVoteIsParseError) {
  const auto path = write_text("votes_bad.csv", "party,i1\nd,maybe\n");
  try {
    io::read_vote_csv(path);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 2u);
    EXPECT_EQ(e.column(), 2u);
  }
}

TEST(Votes, BundledDataset) {
  const auto raw = io::read_vote_csv(std::string(MLTCN_DATA_DIR) + "/house-votes-84.csv");
  ASSERT_EQ(raw.n(), 435u);
  ASSERT_EQ(raw.issues(), 16u);
  const auto d = io::encode_votes(raw);
  EXPECT_EQ(d.n(), 435u);
  EXPECT_EQ(d.m(), 32u);
  // A vote cast is implied by a yes: B <= A everywhere.
  for (Eigen::Index q = 0; q < 16; ++q)
    EXPECT_TRUE((d.responses.col(2 * q + 1).array() <= d.responses.col(2 * q).array()).all());
  std::size_t dem = 0;
  for (const auto& p : *d.labels) dem += p == "democrat";
  EXPECT_EQ(dem, 267u);
  // Undecided rate per issue is 1 - mean(A); every rate lies in (0, 0.25).
  for (Eigen::Index q = 0; q < 16; ++q) {
    const double rate = 1.0 - d.responses.col(2 * q).mean();
    EXPECT_GT(rate, 0.0);
    EXPECT_LT(rate, 0.25);
  }
}

TEST(Json, FitRoundTripsAtFullPrecision) {
  const auto r = small_fit();
  const auto path = (scratch_dir() / "fit.json").string();
  io::write_fit(r, path);
  const auto back = io::read_fit(path);
  EXPECT_EQ(back.params.alpha, r.params.alpha);
  for (std::size_t g = 0; g < 2; ++g) EXPECT_EQ(back.params.w[g], r.params.w[g]);
  EXPECT_EQ(back.params.pi, r.params.pi);
  EXPECT_EQ(back.params.tau, r.params.tau);
  EXPECT_EQ(back.params.eta, r.params.eta);
  EXPECT_EQ(back.bound, r.bound);
  EXPECT_EQ(back.bic, r.bic);
  EXPECT_EQ(back.bound_trace, r.bound_trace);
  EXPECT_EQ(back.map_labels, r.map_labels);
  EXPECT_EQ(back.extreme_flags, r.extreme_flags);
  EXPECT_EQ(back.state.xi, r.state.xi);
  EXPECT_EQ(back.config.seed, r.config.seed);
  EXPECT_EQ(io::fit_to_json(back), io::fit_to_json(r));
}

TEST(Json, VersionMismatch) {
  auto j = io::fit_to_json(small_fit());
  j["format_version"] = "mltcn-fit/99";
  EXPECT_THROW(io::fit_from_json(j), VersionError);
  j.erase("format_version");
  EXPECT_THROW(io::fit_from_json(j), VersionError);
  const auto path = write_text("garbage.json", "{ not json");
  EXPECT_THROW(io::read_fit(path), ParseError);
}

TEST(Json, NanIsNull) {
  Vector v(2);
  v << 1.5, std::nan("");
  const auto j = io::to_json(v);
  EXPECT_TRUE(j[1].is_null());
  const auto back = io::vector_from_json(j);
  EXPECT_EQ(back[0], 1.5);
  EXPECT_TRUE(std::isnan(back[1]));
}

TEST(GridCsv, OneRowPerDimensionOneColumnPerGroupCount) {
  SelectionGrid grid;
  for (std::size_t d = 1; d <= 4; ++d)
    for (std::size_t g = 1; g <= 4; ++g) {
      GridCell c{g, d, std::nullopt, "failed", std::nan("")};
      if (g != 3 || d != 2) {
        FitResult f;
        f.bic = 100.0 * g + d;
        c.fit = f;
        c.error.clear();
      }
      grid.cells.push_back(c);
    }
  grid.best = 0;
  const auto path = (scratch_dir() / "grid.csv").string();
  io::write_grid_csv(grid, path);
  std::istringstream in(slurp(path));
  std::string line;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) rows.push_back(io::split_csv_line(line));
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"D", "G=1", "G=2", "G=3", "G=4"}));
  for (std::size_t r = 1; r < 5; ++r) EXPECT_EQ(rows[r].size(), 5u);
  EXPECT_EQ(rows[2][3], "NA");
  EXPECT_EQ(rows[1][2], "201");
}

TEST(Output, UnwritablePathIsIoError) {
  BinaryDataset d;
  d.responses = Matrix::Zero(1, 1);
  EXPECT_THROW(io::write_binary_csv(d, "/nonexistent/dir/out.csv"), IoError);
  EXPECT_THROW(io::write_json(nlohmann::json::object(), "/nonexistent/dir/out.json"), IoError);
}

TEST(Labels, FromCsvAndTruth) {
  const auto csv = write_text("labels.csv", "id,party\n1,x\n2,y\n");
  EXPECT_EQ(io::read_labels(csv), (std::vector<std::string>{"x", "y"}));
  const auto single = write_text("single.csv", "cls\na\nb\n");
  EXPECT_EQ(io::read_labels(single), (std::vector<std::string>{"a", "b"}));
  auto p = make_simulation_params({.m = 3, .g = 2, .d = 1}, 1);
  auto [data, truth] = sample_mltcn(p, 5, 2);
  const auto path = (scratch_dir() / "truth.json").string();
  io::write_json(io::truth_to_json(p, truth, 2), path);
  const auto labels = io::read_labels(path);
  ASSERT_EQ(labels.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(labels[i], std::to_string(truth.group[i] + 1));
}
