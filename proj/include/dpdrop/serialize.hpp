// Copyright 2026 The DPDrop Authors
// SPDX-License-Identifier: Apache-2.0
//
// Text serialization for harness outputs:
//   * metrics traces as CSV (lossless shortest round-trip doubles, so two
//     identical runs produce byte-identical files),
//   * privacy reports as JSON,
//   * calibration sweeps as CSV.

#pragma once

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "dpdrop/errors.hpp"
#include "dpdrop/trainer.hpp"

namespace dpdrop {

// Shortest decimal representation that round-trips to the same double.
inline std::string format_double(double value) {
  char buffer[64];
  const auto result =
      std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

inline void write_trace_csv(std::ostream& out, const MetricsTrace& trace) {
  out << "epoch,test_accuracy,train_accuracy,mean_grad_norm,"
         "clipped_fraction\n";
  for (const EpochRecord& r : trace) {
    out << r.epoch << ',' << format_double(r.test_accuracy) << ','
        << format_double(r.train_accuracy) << ','
        << format_double(r.mean_grad_norm) << ','
        << format_double(r.clipped_fraction) << '\n';
  }
}

inline void write_trace_csv_file(const std::string& path,
                                 const MetricsTrace& trace) {
  std::ofstream out(path, std::ios::trunc);
  if (!out.good())
    throw FormatError("trace: cannot open '" + path + "' for writing");
  write_trace_csv(out, trace);
  out.flush();
  if (!out.good()) throw FormatError("trace: write to '" + path + "' failed");
}

inline nlohmann::ordered_json budget_to_json(const PrivacyBudget& b) {
  return nlohmann::ordered_json{{"epsilon", b.eps}, {"delta", b.delta}};
}

inline nlohmann::ordered_json dropout_to_json(const DropoutSummary& d) {
  return nlohmann::ordered_json{
      {"defined_count", d.defined_count}, {"total_count", d.total_count},
      {"alpha_min", d.alpha_min},         {"alpha_median", d.alpha_median},
      {"alpha_max", d.alpha_max},         {"p_min", d.p_min},
      {"p_median", d.p_median},           {"p_max", d.p_max}};
}

// `generated_at` is appended as the final key when non-empty, keeping all
// other keys stable across runs.
inline nlohmann::ordered_json report_to_json(
    const PrivacyReport& report, const std::string& generated_at = "") {
  nlohmann::ordered_json j;
  j["method"] = to_string(report.method);
  j["update_rule"] = report.update_rule;
  j["iterations"] = report.iterations;
  j["sampling_ratio"] = report.sampling_ratio;
  if (report.method != AccountingMethod::kNone) {
    j["compositions"] = report.compositions;
    if (report.delta_split) j["delta_split"] = *report.delta_split;
    if (report.sigma) j["sigma"] = *report.sigma;
    if (report.sensitivity) j["sensitivity"] = *report.sensitivity;
    if (report.per_iteration)
      j["per_iteration"] = budget_to_json(*report.per_iteration);
    if (report.amplified) j["amplified"] = budget_to_json(*report.amplified);
    if (report.total) j["total"] = budget_to_json(*report.total);
    if (report.rho_total) j["rho_total"] = *report.rho_total;
    if (report.dropout) j["dropout"] = dropout_to_json(*report.dropout);
  }
  if (!generated_at.empty()) j["generated_at"] = generated_at;
  return j;
}

inline void write_report_json_file(const std::string& path,
                                   const PrivacyReport& report,
                                   const std::string& generated_at = "") {
  std::ofstream out(path, std::ios::trunc);
  if (!out.good())
    throw FormatError("report: cannot open '" + path + "' for writing");
  out << report_to_json(report, generated_at).dump(2) << '\n';
  out.flush();
  if (!out.good()) throw FormatError("report: write to '" + path + "' failed");
}

inline nlohmann::ordered_json breakdown_to_json(const BudgetBreakdown& b) {
  nlohmann::ordered_json j;
  j["method"] = to_string(b.method);
  j["sigma"] = b.sigma;
  j["iterations"] = b.iterations;
  j["compositions"] = b.compositions;
  j["sampling_ratio"] = b.sampling_ratio;
  j["delta_split"] = b.delta_split;
  j["per_iteration"] = budget_to_json(b.per_iteration);
  j["amplified"] = budget_to_json(b.amplified);
  j["total"] = budget_to_json(b.total);
  if (b.rho_total) j["rho_total"] = *b.rho_total;
  return j;
}

inline void write_sweep_csv(std::ostream& out,
                            const std::vector<SweepRow>& rows) {
  out << "epsilon,sigma_ac,sigma_zcdp\n";
  for (const SweepRow& row : rows) {
    out << format_double(row.epsilon) << ',';
    if (row.sigma_ac) out << format_double(*row.sigma_ac);
    out << ',';
    if (row.sigma_zcdp) out << format_double(*row.sigma_zcdp);
    out << '\n';
  }
}

}  // namespace dpdrop