// Emits a synthetic blob dataset as CSV + manifest, the same format the
// simulator accepts via dataset.kind=csv.

#include <iostream>

#include "CLI11.hpp"
#include "leadq/data.hpp"
#include "leadq/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Synthetic dataset generator"};
  int classes = 8;
  int dim = 8;
  int per_class = 2000;
  double spread = 0.35;
  uint64_t seed = 1;
  std::string csv = "dataset.csv";
  std::string manifest = "dataset.json";
  app.add_option("--classes", classes);
  app.add_option("--dim", dim);
  app.add_option("--per-class", per_class);
  app.add_option("--spread", spread);
  app.add_option("--seed", seed);
  app.add_option("--csv", csv);
  app.add_option("--manifest", manifest);
  CLI11_PARSE(app, argc, argv);

  try {
    auto data = leadq::make_synthetic_dataset(classes, dim, per_class, spread,
                                              seed, "train");
    leadq::save_dataset_csv(data, csv, manifest, seed);
    std::cout << data.size() << " samples -> " << csv << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
