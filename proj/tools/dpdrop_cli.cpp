// Copyright 2026 The DPDrop Authors
// SPDX-License-Identifier: Apache-2.0
//
// dpdrop: command-line front door for the toolkit.
//
// Subcommands:
//   calibrate  noise multiplier <-> privacy budget (JSON breakdown)
//   train      run training from a config file; writes trace/report/checkpoint
//   evaluate   score a checkpoint on a test set
//   report     privacy report for a config without training
//   sweep      sigma-versus-epsilon table for both accountants (CSV)
//
// Exit codes: 0 success, 1 runtime failure (one-line "error: ..." on
// stderr), 2 usage error (one-line "usage error: ..." on stderr).

#include <cmath>
#include <ctime>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dpdrop/checkpoint.hpp"
#include "dpdrop/config.hpp"
#include "dpdrop/serialize.hpp"
#include "dpdrop/trainer.hpp"

namespace {

// Thrown for semantic usage mistakes CLI11 cannot express (e.g. mutually
// exclusive options); mapped to exit code 2.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

std::string TimestampUtc() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

dpdrop::AccountingMethod ParseMethod(const std::string& name) {
  if (name == "ac") return dpdrop::AccountingMethod::kAdvancedComposition;
  if (name == "zcdp") return dpdrop::AccountingMethod::kZcdp;
  throw UsageError("method must be 'ac' or 'zcdp', got '" + name + "'");
}

std::vector<double> ParseEpsilonList(const std::string& csv) {
  std::vector<double> out;
  std::istringstream in(csv);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      size_t used = 0;
      const double eps = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(eps);
    } catch (const std::exception&) {
      throw UsageError("--epsilon-list: not a number: '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError("--epsilon-list: empty list");
  return out;
}

struct CalibrateArgs {
  std::string method;
  double epsilon = 0.0;
  double sigma = 0.0;
  bool has_epsilon = false;
  bool has_sigma = false;
  double delta = 0.0;
  long iterations = 0;
  double sampling_ratio = 0.0;
  double delta_split = 0.5;
};

int RunCalibrate(const CalibrateArgs& args) {
  if (args.has_epsilon == args.has_sigma)
    throw UsageError(
        "calibrate: give exactly one of --epsilon (solve for sigma) or "
        "--sigma (report the budget it buys)");
  dpdrop::AccountantConfig acc;
  acc.iterations = args.iterations;
  acc.sampling_ratio = args.sampling_ratio;
  acc.delta_split = args.delta_split;
  acc.method = ParseMethod(args.method);
  double sigma = args.sigma;
  if (args.has_epsilon) {
    sigma = acc.method == dpdrop::AccountingMethod::kAdvancedComposition
                ? dpdrop::calibrate_sigma_ac(args.epsilon, args.delta, acc)
                : dpdrop::calibrate_sigma_zcdp(args.epsilon, args.delta, acc);
  }
  const dpdrop::BudgetBreakdown breakdown =
      dpdrop::budget_breakdown(sigma, args.delta, acc);
  std::cout << dpdrop::breakdown_to_json(breakdown).dump(2) << '\n';
  return 0;
}

struct TrainArgs {
  std::string config_path;
  std::optional<long> seed;
  long runs = 1;
  std::string output_prefix = "dpdrop";
};

int RunTrain(const TrainArgs& args) {
  if (args.runs < 1) throw UsageError("train: --runs must be >= 1");
  dpdrop::TrainConfig cfg = dpdrop::parse_train_config(args.config_path);
  if (args.seed) cfg.seed = *args.seed;
  const auto [train, test] = dpdrop::load_datasets(cfg);

  std::vector<double> final_accuracies;
  for (long k = 0; k < args.runs; ++k) {
    dpdrop::TrainConfig run_cfg = cfg;
    run_cfg.seed = cfg.seed + k;
    const dpdrop::TrainResult result =
        dpdrop::train_dpd(run_cfg, train, test);
    const std::string stem =
        args.output_prefix + "_seed" + std::to_string(run_cfg.seed);
    dpdrop::write_trace_csv_file(stem + "_trace.csv", result.trace);
    dpdrop::write_report_json_file(stem + "_report.json", result.report,
                                   TimestampUtc());
    dpdrop::save_checkpoint(stem + ".ckpt", result.params);
    const double accuracy = result.trace.back().test_accuracy;
    final_accuracies.push_back(accuracy);
    std::cout << "seed " << run_cfg.seed << " test_accuracy "
              << dpdrop::format_double(accuracy) << '\n';
  }
  if (final_accuracies.size() > 1) {
    double mean = 0.0;
    for (const double a : final_accuracies) mean += a;
    mean /= static_cast<double>(final_accuracies.size());
    double var = 0.0;
    for (const double a : final_accuracies) var += (a - mean) * (a - mean);
    var /= static_cast<double>(final_accuracies.size() - 1);
    std::cout << "mean " << dpdrop::format_double(mean) << " std "
              << dpdrop::format_double(std::sqrt(var)) << '\n';
  }
  return 0;
}

struct EvaluateArgs {
  std::string checkpoint_path;
  std::string config_path;
  std::string digits_test_path;
};

int RunEvaluate(const EvaluateArgs& args) {
  const bool has_config = !args.config_path.empty();
  const bool has_csv = !args.digits_test_path.empty();
  if (has_config == has_csv)
    throw UsageError(
        "evaluate: give exactly one of --config (use its test split) or "
        "--digits-test (standalone CSV)");
  const dpdrop::ModelParams params =
      dpdrop::load_checkpoint(args.checkpoint_path);
  dpdrop::Dataset test;
  if (has_config) {
    const dpdrop::TrainConfig cfg =
        dpdrop::parse_train_config(args.config_path);
    test = dpdrop::load_datasets(cfg).second;
  } else {
    test = dpdrop::load_digits_split(args.digits_test_path);
  }
  const double accuracy =
      dpdrop::evaluate_accuracy(params, test.features, test.labels);
  std::cout << "test_accuracy " << dpdrop::format_double(accuracy) << '\n';
  return 0;
}

int RunReport(const std::string& config_path) {
  const dpdrop::TrainConfig cfg = dpdrop::parse_train_config(config_path);
  const auto [train, test] = dpdrop::load_datasets(cfg);
  (void)test;
  const dpdrop::PrivacyReport report =
      dpdrop::build_privacy_report(cfg, train.n_examples(), nullptr);
  std::cout << dpdrop::report_to_json(report).dump(2) << '\n';
  return 0;
}

struct SweepArgs {
  std::string epsilon_list;
  double delta = 0.0;
  long iterations = 0;
  double sampling_ratio = 0.0;
  double delta_split = 0.5;
};

int RunSweep(const SweepArgs& args) {
  dpdrop::AccountantConfig base;
  base.iterations = args.iterations;
  base.sampling_ratio = args.sampling_ratio;
  base.delta_split = args.delta_split;
  const std::vector<dpdrop::SweepRow> rows = dpdrop::sweep_sigma_vs_eps(
      base, args.delta, ParseEpsilonList(args.epsilon_list));
  dpdrop::write_sweep_csv(std::cout, rows);
  for (const dpdrop::SweepRow& row : rows) {
    if (!row.ac_error.empty())
      std::cerr << "note: epsilon " << dpdrop::format_double(row.epsilon)
                << " ac: " << row.ac_error << '\n';
    if (!row.zcdp_error.empty())
      std::cerr << "note: epsilon " << dpdrop::format_double(row.epsilon)
                << " zcdp: " << row.zcdp_error << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "dpdrop: differentially private SGLD training with calibrated "
      "Gaussian noise"};
  app.require_subcommand(1);

  CalibrateArgs cal;
  CLI::App* calibrate =
      app.add_subcommand("calibrate", "Noise multiplier <-> privacy budget");
  calibrate->add_option("--method", cal.method, "Accountant: ac or zcdp")
      ->required();
  CLI::Option* cal_eps =
      calibrate->add_option("--epsilon", cal.epsilon, "Target total epsilon");
  CLI::Option* cal_sigma =
      calibrate->add_option("--sigma", cal.sigma, "Explicit noise multiplier");
  calibrate->add_option("--delta", cal.delta, "Total delta")->required();
  calibrate->add_option("--iterations", cal.iterations, "Iteration count T")
      ->required();
  calibrate
      ->add_option("--sampling-ratio", cal.sampling_ratio,
                   "Minibatch sampling ratio nu")
      ->required();
  calibrate->add_option("--delta-split", cal.delta_split,
                        "Fraction of delta reserved for composition slack");

  TrainArgs tr;
  CLI::App* train = app.add_subcommand("train", "Train from a config file");
  train->add_option("--config", tr.config_path, "Config file path")
      ->required();
  long seed_value = 0;
  CLI::Option* train_seed = train->add_option(
      "--seed", seed_value, "Override the config seed for the first run");
  train->add_option("--runs", tr.runs,
                    "Number of runs with consecutive seeds");
  train->add_option("--output", tr.output_prefix,
                    "Output path prefix for trace/report/checkpoint files");

  EvaluateArgs ev;
  CLI::App* evaluate =
      app.add_subcommand("evaluate", "Score a checkpoint on a test set");
  evaluate->add_option("--checkpoint", ev.checkpoint_path, "Checkpoint path")
      ->required();
  evaluate->add_option("--config", ev.config_path,
                       "Config whose test split to score");
  evaluate->add_option("--digits-test", ev.digits_test_path,
                       "Standalone digits-format CSV to score");

  std::string report_config;
  CLI::App* report = app.add_subcommand(
      "report", "Privacy report for a config without training");
  report->add_option("--config", report_config, "Config file path")
      ->required();

  SweepArgs sw;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "Sigma-versus-epsilon table for both accountants");
  sweep
      ->add_option("--epsilon-list", sw.epsilon_list,
                   "Comma-separated epsilon values")
      ->required();
  sweep->add_option("--delta", sw.delta, "Total delta")->required();
  sweep->add_option("--iterations", sw.iterations, "Iteration count T")
      ->required();
  sweep
      ->add_option("--sampling-ratio", sw.sampling_ratio,
                   "Minibatch sampling ratio nu")
      ->required();
  sweep->add_option("--delta-split", sw.delta_split,
                    "Fraction of delta reserved for composition slack");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (calibrate->parsed()) {
      cal.has_epsilon = cal_eps->count() > 0;
      cal.has_sigma = cal_sigma->count() > 0;
      return RunCalibrate(cal);
    }
    if (train->parsed()) {
      if (train_seed->count() > 0) tr.seed = seed_value;
      return RunTrain(tr);
    }
    if (evaluate->parsed()) return RunEvaluate(ev);
    if (report->parsed()) return RunReport(report_config);
    if (sweep->parsed()) return RunSweep(sw);
    std::cerr << "usage error: no subcommand\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const dpdrop::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}