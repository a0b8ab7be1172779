// Fits the 1984 House roll-call votes with two components and a
// two-dimensional latent trait, then prints the party cross-tabulation.
//
//   fit_voting data/house-votes-84.csv [restarts] [seed]

#include <iostream>
#include <string>

#include "mltcn/io.hpp"

int main(int argc, char** argv) {
  using namespace mltcn;
  if (argc < 2) {
    std::cerr << "usage: fit_voting VOTES.csv [restarts] [seed]\n";
    return 1;
  }
  try {
    const BinaryDataset data = io::encode_votes(io::read_vote_csv(argv[1]));

    FitConfig config;
    config.groups = 2;
    config.latent_dim = 2;
    config.restarts = argc > 2 ? std::stoul(argv[2]) : 20;
    config.seed = argc > 3 ? std::stoull(argv[3]) : 0;
    config.threads = 0;
    const FitResult fit = mltcn::fit(data, config);
    const EvaluationReport report = evaluation_report(fit, *data.labels);

    std::cout << "bound " << fit.bound << "  BIC " << fit.bic << "  ARI " << report.ari << "  misclassified "
              << report.n_misclassified << "  extreme " << report.n_extreme << "\n\n";
    std::cout << "party";
    for (std::size_t g = 0; g < report.groups; ++g) std::cout << "\tgroup " << g + 1 << " (normal/extreme)";
    std::cout << '\n';
    for (std::size_t l = 0; l < report.label_names.size(); ++l) {
      std::cout << report.label_names[l];
      for (const auto& cell : report.cross_tab[l]) std::cout << '\t' << cell[0] << '/' << cell[1];
      std::cout << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
