// Copyright 2026 The DPDrop Authors
// SPDX-License-Identifier: Apache-2.0
//
// Demo: trains the one-hidden-layer softmax classifier on the bundled
// handwritten-digits split at several privacy levels and prints the
// resulting noise multipliers and test accuracies side by side.
//
//   dp_digits_demo [--epochs E] [--hidden H] [--epsilon EPS] [--seed S]

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dpdrop/serialize.hpp"
#include "dpdrop/trainer.hpp"

namespace {

dpdrop::TrainConfig BaseConfig(long epochs, long hidden, long seed) {
  dpdrop::TrainConfig cfg;
  cfg.dataset = dpdrop::DatasetKind::kDigits;
  cfg.train_path = std::string(DPDROP_DATA_DIR) + "/digits_train.csv";
  cfg.test_path = std::string(DPDROP_DATA_DIR) + "/digits_test.csv";
  cfg.hidden_units = hidden;
  cfg.batch_size = 100;
  cfg.epochs = epochs;
  cfg.eta0 = 0.05;
  cfg.gamma = 1.0;
  cfg.prior_precision = 1e-4;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  long epochs = 10;
  long hidden = 64;
  long seed = 1;
  double epsilon = 1.0;
  CLI::App app{"Differentially private training demo on handwritten digits"};
  app.add_option("--epochs", epochs, "Training epochs")->check(CLI::PositiveNumber);
  app.add_option("--hidden", hidden, "Hidden units")->check(CLI::PositiveNumber);
  app.add_option("--epsilon", epsilon, "Total privacy budget epsilon")
      ->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Base seed");
  CLI11_PARSE(app, argc, argv);

  try {
    const dpdrop::TrainConfig base = BaseConfig(epochs, hidden, seed);
    const auto [train, test] = dpdrop::load_datasets(base);
    std::cout << "digits: " << train.n_examples() << " train / "
              << test.n_examples() << " test examples, "
              << train.n_features() << " features\n"
              << "model: " << hidden << " hidden units, " << epochs
              << " epochs, batch 100\n\n";

    struct Row {
      std::string label;
      std::string sigma;
      double accuracy;
    };
    std::vector<Row> rows;

    for (const auto method : {dpdrop::AccountingMethod::kZcdp,
                              dpdrop::AccountingMethod::kAdvancedComposition}) {
      dpdrop::TrainConfig cfg = base;
      cfg.method = method;
      cfg.clip_threshold = 2.0;
      cfg.epsilon = epsilon;
      cfg.delta = 1e-4;
      const dpdrop::TrainResult result = dpdrop::train_dpd(cfg, train, test);
      const std::string label = std::string("dpd-") +
                                dpdrop::to_string(method) + " (eps=" +
                                dpdrop::format_double(epsilon) + ")";
      rows.push_back({label, dpdrop::format_double(*result.report.sigma),
                      result.trace.back().test_accuracy});
      std::cout << label << ": sigma = " << *result.report.sigma
                << ", epoch accuracies:";
      for (const dpdrop::EpochRecord& r : result.trace)
        std::cout << ' ' << r.test_accuracy;
      std::cout << "\n";
    }

    const dpdrop::TrainResult np =
        dpdrop::train_nonprivate(base, train, test);
    rows.push_back({"non-private", "-", np.trace.back().test_accuracy});

    std::cout << "\nsummary\n";
    for (const Row& row : rows)
      std::cout << "  " << row.label << "  sigma=" << row.sigma
                << "  test_accuracy=" << row.accuracy << "\n";
    return 0;
  } catch (const dpdrop::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}