// Copyright 2026 The DPDrop Authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end CLI tests: each test shells out to the built binary and checks
// exit codes, stdout/stderr shape, and numeric agreement with the library.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpdrop/accounting.hpp"
#include "dpdrop/serialize.hpp"
#include "dpdrop/trainer.hpp"

namespace dpdrop {
namespace {

#ifndef DPDROP_CLI_PATH
#error "DPDROP_CLI_PATH must be defined by the build"
#endif

std::string TempPath(const std::string& name) {
  return std::string(::testing::TempDir()) + "/" + name;
}

std::string Slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

CliResult RunCli(const std::string& args) {
  static int counter = 0;
  const std::string out_path = TempPath("cli_out_" + std::to_string(counter));
  const std::string err_path = TempPath("cli_err_" + std::to_string(counter));
  ++counter;
  const std::string command = std::string(DPDROP_CLI_PATH) + " " + args +
                              " > " + out_path + " 2> " + err_path;
  const int status = std::system(command.c_str());
  CliResult result;
  if (status != -1 && WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
  result.out = Slurp(out_path);
  result.err = Slurp(err_path);
  return result;
}

long CountLines(const std::string& text) {
  long lines = 0;
  for (const char c : text)
    if (c == '\n') ++lines;
  return lines;
}

const std::string kTrainCsv =
    std::string(DPDROP_DATA_DIR) + "/digits_train.csv";
const std::string kTestCsv = std::string(DPDROP_DATA_DIR) + "/digits_test.csv";

// Writes the tiny training config used by the train/evaluate/report tests
// and returns its path.
std::string WriteTinyConfig() {
  const std::string path = TempPath("tiny_zcdp.cfg");
  std::ofstream out(path);
  out << "dataset = digits\n"
      << "train_path = " << kTrainCsv << "\n"
      << "test_path = " << kTestCsv << "\n"
      << "hidden_units = 16\n"
      << "batch_size = 100\n"
      << "epochs = 2\n"
      << "eta0 = 0.05\n"
      << "method = zcdp\n"
      << "clip_threshold = 2\n"
      << "epsilon = 1\n"
      << "delta = 1e-4\n"
      << "seed = 7\n";
  return path;
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

TEST(CliCalibrate, ZcdpHeadlineConstant) {
  const CliResult r = RunCli(
      "calibrate --method zcdp --epsilon 0.5 --delta 1e-4 "
      "--iterations 20000 --sampling-ratio 0.01");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("method"), "zcdp");
  const double sigma = j.at("sigma").get<double>();
  EXPECT_NEAR(sigma, 3.023048800812255, 1e-9 * sigma);
  EXPECT_NEAR(j.at("total").at("epsilon").get<double>(), 0.5, 1e-9);
  EXPECT_DOUBLE_EQ(j.at("total").at("delta").get<double>(), 1e-4);
  EXPECT_TRUE(j.contains("rho_total"));
  EXPECT_EQ(j.at("iterations"), 20000);
  EXPECT_EQ(j.at("compositions"), 200);
}

TEST(CliCalibrate, AcHeadlineConstant) {
  const CliResult r = RunCli(
      "calibrate --method ac --epsilon 0.5 --delta 1e-4 "
      "--iterations 20000 --sampling-ratio 0.01");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  const double sigma = j.at("sigma").get<double>();
  EXPECT_NEAR(sigma, 9.648999479377142, 1e-9 * sigma);
  EXPECT_NEAR(j.at("total").at("epsilon").get<double>(), 0.5, 1e-9);
  EXPECT_FALSE(j.contains("rho_total"));
}

TEST(CliCalibrate, ForwardSigmaMatchesLibraryExactly) {
  const CliResult r = RunCli(
      "calibrate --method zcdp --sigma 3 --delta 1e-4 "
      "--iterations 20000 --sampling-ratio 0.01");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  AccountantConfig acc;
  acc.iterations = 20000;
  acc.sampling_ratio = 0.01;
  acc.method = AccountingMethod::kZcdp;
  const PrivacyBudget expected = total_budget_zcdp(3.0, 1e-4, acc);
  // JSON uses shortest-round-trip doubles, so equality is exact.
  EXPECT_DOUBLE_EQ(j.at("total").at("epsilon").get<double>(), expected.eps);
  EXPECT_DOUBLE_EQ(j.at("sigma").get<double>(), 3.0);
}

TEST(CliCalibrate, BothEpsilonAndSigmaIsUsageError) {
  const CliResult r = RunCli(
      "calibrate --method zcdp --epsilon 0.5 --sigma 3 --delta 1e-4 "
      "--iterations 100 --sampling-ratio 0.1");
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_EQ(r.out, "");
  EXPECT_EQ(r.err.rfind("usage error:", 0), 0u) << r.err;
}

TEST(CliCalibrate, UnreachableTargetIsOneLineRuntimeError) {
  const CliResult r = RunCli(
      "calibrate --method ac --epsilon 1e-9 --delta 1e-4 "
      "--iterations 100 --sampling-ratio 0.1");
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_EQ(r.out, "");
  EXPECT_EQ(r.err.rfind("error:", 0), 0u) << r.err;
  EXPECT_EQ(CountLines(r.err), 1) << r.err;
}

// ---------------------------------------------------------------------------
// usage errors
// ---------------------------------------------------------------------------

TEST(CliUsage, UnknownFlagExitsTwo) {
  const CliResult r = RunCli("calibrate --bogus 1");
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_EQ(r.err.rfind("usage error:", 0), 0u) << r.err;
}

TEST(CliUsage, MissingSubcommandExitsTwo) {
  const CliResult r = RunCli("");
  EXPECT_EQ(r.exit_code, 2);
}

TEST(CliUsage, HelpExitsZero) {
  const CliResult r = RunCli("--help");
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_NE(r.out.find("calibrate"), std::string::npos);
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

TEST(CliSweep, LadderMatchesReferenceConstants) {
  const std::string nu = format_double(100.0 / 1439.0);
  const CliResult r =
      RunCli("sweep --epsilon-list 10,0.5,1 --delta 1e-4 --iterations 1439 "
             "--sampling-ratio " +
             nu);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  std::istringstream in(r.out);
  std::string line;
  ASSERT_TRUE(std::getline(in, line));
  EXPECT_EQ(line, "epsilon,sigma_ac,sigma_zcdp");
  struct Row {
    double eps, ac, zcdp;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    Row row{};
    ASSERT_EQ(std::sscanf(line.c_str(), "%lf,%lf,%lf", &row.eps, &row.ac,
                          &row.zcdp),
              3)
        << line;
    rows.push_back(row);
  }
  ASSERT_EQ(rows.size(), 3u);
  const double eps[3] = {0.5, 1.0, 10.0};
  const double sigma_a[3] = {36.866213208004595, 20.008178383128577,
                             4.314825666572693};
  const double sigma_z[3] = {7.776911246990431, 4.850812293940403,
                             1.5819054125499685};
  for (int i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(rows[i].eps, eps[i]);
    EXPECT_NEAR(rows[i].ac, sigma_a[i], 1e-9 * sigma_a[i]);
    EXPECT_NEAR(rows[i].zcdp, sigma_z[i], 1e-9 * sigma_z[i]);
  }
}

// ---------------------------------------------------------------------------
// train / evaluate / report
// ---------------------------------------------------------------------------

TEST(CliTrain, RerunsAreByteIdenticalAndEvaluateAgrees) {
  const std::string cfg = WriteTinyConfig();
  const std::string prefix_a = TempPath("runA");
  const std::string prefix_b = TempPath("runB");
  const CliResult a =
      RunCli("train --config " + cfg + " --output " + prefix_a);
  ASSERT_EQ(a.exit_code, 0) << a.err;
  const CliResult b =
      RunCli("train --config " + cfg + " --output " + prefix_b);
  ASSERT_EQ(b.exit_code, 0) << b.err;

  const std::string trace_a = Slurp(prefix_a + "_seed7_trace.csv");
  const std::string trace_b = Slurp(prefix_b + "_seed7_trace.csv");
  ASSERT_FALSE(trace_a.empty());
  EXPECT_EQ(trace_a, trace_b);  // end-to-end byte determinism

  // stdout reports the final test accuracy; the trace's last row agrees.
  ASSERT_EQ(a.out.rfind("seed 7 test_accuracy ", 0), 0u) << a.out;
  const std::string reported =
      a.out.substr(std::string("seed 7 test_accuracy ").size());
  const std::string final_row = trace_a.substr(trace_a.rfind('\n', trace_a.size() - 2) + 1);
  std::istringstream row_in(final_row);
  std::string cell;
  std::getline(row_in, cell, ',');  // epoch
  EXPECT_EQ(cell, "2");
  std::getline(row_in, cell, ',');  // test_accuracy
  EXPECT_EQ(cell + "\n", reported);

  // The report re-derives the configured target budget from sigma.
  const auto report =
      nlohmann::json::parse(Slurp(prefix_a + "_seed7_report.json"));
  EXPECT_EQ(report.at("method"), "zcdp");
  EXPECT_NEAR(report.at("total").at("epsilon").get<double>(), 1.0, 1e-6);
  EXPECT_TRUE(report.contains("generated_at"));
  EXPECT_TRUE(report.contains("dropout"));

  // evaluate: via the config's test split and via the standalone CSV.
  const std::string ckpt = prefix_a + "_seed7.ckpt";
  const CliResult via_cfg =
      RunCli("evaluate --checkpoint " + ckpt + " --config " + cfg);
  ASSERT_EQ(via_cfg.exit_code, 0) << via_cfg.err;
  EXPECT_EQ(via_cfg.out, "test_accuracy " + reported);
  const CliResult via_csv =
      RunCli("evaluate --checkpoint " + ckpt + " --digits-test " + kTestCsv);
  ASSERT_EQ(via_csv.exit_code, 0) << via_csv.err;
  EXPECT_EQ(via_csv.out, via_cfg.out);
}

TEST(CliTrain, MultiRunPrintsSummary) {
  const std::string cfg = WriteTinyConfig();
  const std::string prefix = TempPath("multi");
  const CliResult r = RunCli("train --config " + cfg +
                             " --runs 2 --seed 11 --output " + prefix);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find("seed 11 test_accuracy "), std::string::npos);
  EXPECT_NE(r.out.find("seed 12 test_accuracy "), std::string::npos);
  EXPECT_NE(r.out.find("mean "), std::string::npos);
  EXPECT_NE(r.out.find(" std "), std::string::npos);
  EXPECT_FALSE(Slurp(prefix + "_seed11_trace.csv").empty());
  EXPECT_FALSE(Slurp(prefix + "_seed12_trace.csv").empty());
}

TEST(CliTrain, EvaluateRequiresExactlyOneTestSource) {
  const std::string cfg = WriteTinyConfig();
  const CliResult r = RunCli("evaluate --checkpoint nowhere.ckpt");
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_EQ(r.err.rfind("usage error:", 0), 0u) << r.err;
}

TEST(CliTrain, MissingConfigFileIsRuntimeError) {
  const CliResult r = RunCli("train --config /nonexistent/run.cfg");
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_EQ(r.err.rfind("error:", 0), 0u) << r.err;
  EXPECT_EQ(CountLines(r.err), 1) << r.err;
}

TEST(CliReport, EmitsStableJsonWithoutTraining) {
  const std::string cfg = WriteTinyConfig();
  const CliResult r = RunCli("report --config " + cfg);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("method"), "zcdp");
  EXPECT_EQ(j.at("update_rule"), "dpd");
  EXPECT_NEAR(j.at("total").at("epsilon").get<double>(), 1.0, 1e-6);
  EXPECT_TRUE(j.contains("per_iteration"));
  EXPECT_TRUE(j.contains("amplified"));
  // Report-only output has no trained parameters and no timestamp, so two
  // invocations are byte-identical.
  EXPECT_FALSE(j.contains("dropout"));
  EXPECT_FALSE(j.contains("generated_at"));
  const CliResult again = RunCli("report --config " + cfg);
  EXPECT_EQ(again.out, r.out);
}

}  // namespace
}  // namespace dpdrop