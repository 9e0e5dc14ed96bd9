// Copyright 2026 The DPDrop Authors
// SPDX-License-Identifier: Apache-2.0
//
// Training configuration: the TrainConfig struct and the flat key-value
// config-file parser. The file format is one `key = value` pair per line;
// blank lines and lines starting with '#' are ignored.
//
// Schema (see README for the full description):
//   dataset        digits | mnist                              (required)
//   train_path     digits training CSV          (digits)
//   test_path      digits test CSV              (digits)
//   train_images   IDX training images          (mnist)
//   train_labels   IDX training labels          (mnist)
//   test_images    IDX test images              (mnist)
//   test_labels    IDX test labels              (mnist)
//   hidden_units   positive integer                            (required)
//   batch_size     positive integer S                          (required)
//   epochs         positive integer E                          (required)
//   eta0           positive real                               (required)
//   gamma          positive real decay exponent                (default 1)
//   prior_precision  non-negative real                         (default 1e-4)
//   method         ac | zcdp | none                            (required)
//   clip_threshold positive real C        (required when method != none)
//   epsilon        positive real target total budget   (XOR sigma)
//   sigma          positive real explicit noise multiplier
//   delta          total delta in (0,1)   (required when method != none)
//   delta_split    fraction in (0,1)                           (default 0.5)
//   seed           integer                                     (default 0)
//   update_rule    dpd | sgld-zcdp                             (default dpd)

#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "dpdrop/accounting.hpp"
#include "dpdrop/errors.hpp"

namespace dpdrop {

enum class DatasetKind { kDigits, kMnist };

struct TrainConfig {
  DatasetKind dataset = DatasetKind::kDigits;
  std::string train_path;    // digits
  std::string test_path;     // digits
  std::string train_images;  // mnist
  std::string train_labels;  // mnist
  std::string test_images;   // mnist
  std::string test_labels;   // mnist

  long hidden_units = 0;
  long batch_size = 0;
  long epochs = 0;
  double eta0 = 0.0;
  double gamma = 1.0;
  double prior_precision = 1e-4;

  AccountingMethod method = AccountingMethod::kNone;
  std::optional<double> clip_threshold;
  std::optional<double> epsilon;
  std::optional<double> sigma;
  std::optional<double> delta;
  double delta_split = 0.5;

  long seed = 0;
  std::string update_rule = "dpd";
};

namespace detail {

inline std::string trim(const std::string& s) {
  const size_t begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  const size_t end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

inline double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const double out = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not a number: '" + value +
                      "'");
  }
}

inline long parse_long(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const long out = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not an integer: '" + value +
                      "'");
  }
}

}  // namespace detail

// Parses config text (the file-format body). `source` names the origin for
// error messages.
inline TrainConfig parse_train_config_text(const std::string& text,
                                           const std::string& source) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  long line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string stripped = detail::trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + " line " + std::to_string(line_number) +
                        ": expected 'key = value'");
    const std::string key = detail::trim(stripped.substr(0, eq));
    const std::string value = detail::trim(stripped.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError(source + " line " + std::to_string(line_number) +
                        ": empty key or value");
    if (kv.count(key))
      throw ConfigError(source + " line " + std::to_string(line_number) +
                        ": duplicate key '" + key + "'");
    kv[key] = value;
  }

  TrainConfig cfg;
  const auto take = [&](const std::string& key) -> std::optional<std::string> {
    const auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string value = it->second;
    kv.erase(it);
    return value;
  };
  const auto require = [&](const std::string& key) -> std::string {
    auto v = take(key);
    if (!v) throw ConfigError(source + ": missing required key '" + key + "'");
    return *v;
  };

  const std::string dataset = require("dataset");
  if (dataset == "digits") {
    cfg.dataset = DatasetKind::kDigits;
    cfg.train_path = require("train_path");
    cfg.test_path = require("test_path");
  } else if (dataset == "mnist") {
    cfg.dataset = DatasetKind::kMnist;
    cfg.train_images = require("train_images");
    cfg.train_labels = require("train_labels");
    cfg.test_images = require("test_images");
    cfg.test_labels = require("test_labels");
  } else {
    throw ConfigError(source + ": dataset must be 'digits' or 'mnist', got '" +
                      dataset + "'");
  }

  cfg.hidden_units = detail::parse_long("hidden_units", require("hidden_units"));
  cfg.batch_size = detail::parse_long("batch_size", require("batch_size"));
  cfg.epochs = detail::parse_long("epochs", require("epochs"));
  cfg.eta0 = detail::parse_double("eta0", require("eta0"));
  if (auto v = take("gamma")) cfg.gamma = detail::parse_double("gamma", *v);
  if (auto v = take("prior_precision"))
    cfg.prior_precision = detail::parse_double("prior_precision", *v);
  if (auto v = take("delta_split"))
    cfg.delta_split = detail::parse_double("delta_split", *v);
  if (auto v = take("seed")) cfg.seed = detail::parse_long("seed", *v);
  if (auto v = take("update_rule")) cfg.update_rule = *v;

  const std::string method = require("method");
  if (method == "ac") {
    cfg.method = AccountingMethod::kAdvancedComposition;
  } else if (method == "zcdp") {
    cfg.method = AccountingMethod::kZcdp;
  } else if (method == "none") {
    cfg.method = AccountingMethod::kNone;
  } else {
    throw ConfigError(source + ": method must be 'ac', 'zcdp' or 'none', got '" +
                      method + "'");
  }
  if (auto v = take("clip_threshold"))
    cfg.clip_threshold = detail::parse_double("clip_threshold", *v);
  if (auto v = take("epsilon"))
    cfg.epsilon = detail::parse_double("epsilon", *v);
  if (auto v = take("sigma")) cfg.sigma = detail::parse_double("sigma", *v);
  if (auto v = take("delta")) cfg.delta = detail::parse_double("delta", *v);

  if (!kv.empty())
    throw ConfigError(source + ": unknown key '" + kv.begin()->first + "'");

  // Cross-field validation.
  if (cfg.hidden_units < 1)
    throw ConfigError(source + ": hidden_units must be >= 1");
  if (cfg.batch_size < 1)
    throw ConfigError(source + ": batch_size must be >= 1");
  if (cfg.epochs < 1) throw ConfigError(source + ": epochs must be >= 1");
  if (!(cfg.eta0 > 0.0)) throw ConfigError(source + ": eta0 must be positive");
  if (!(cfg.gamma > 0.0))
    throw ConfigError(source + ": gamma must be positive");
  if (cfg.prior_precision < 0.0)
    throw ConfigError(source + ": prior_precision must be non-negative");
  if (!(cfg.delta_split > 0.0 && cfg.delta_split < 1.0))
    throw ConfigError(source + ": delta_split must lie in (0, 1)");
  if (cfg.update_rule != "dpd" && cfg.update_rule != "sgld-zcdp")
    throw ConfigError(source +
                      ": update_rule must be 'dpd' or 'sgld-zcdp', got '" +
                      cfg.update_rule + "'");

  if (cfg.method == AccountingMethod::kNone) {
    if (cfg.epsilon || cfg.sigma || cfg.delta)
      throw ConfigError(source +
                        ": epsilon/sigma/delta are not applicable with "
                        "method = none");
    if (cfg.update_rule == "sgld-zcdp") {
      // The classical-injection baseline keeps clipping but replaces the
      // calibrated noise with N(0, eta_t); it has no accountant.
      if (!cfg.clip_threshold || !(*cfg.clip_threshold > 0.0))
        throw ConfigError(source +
                          ": update_rule = sgld-zcdp requires a positive "
                          "clip_threshold");
    } else if (cfg.clip_threshold) {
      throw ConfigError(source +
                        ": clip_threshold is not applicable with method = "
                        "none (the non-private run disables clipping)");
    }
  } else {
    if (cfg.update_rule == "sgld-zcdp")
      throw ConfigError(source +
                        ": update_rule = sgld-zcdp is an accuracy baseline "
                        "and requires method = none");
    if (!cfg.clip_threshold || !(*cfg.clip_threshold > 0.0))
      throw ConfigError(source +
                        ": clip_threshold must be set and positive when "
                        "method != none");
    if (!cfg.delta || !(*cfg.delta > 0.0 && *cfg.delta < 1.0))
      throw ConfigError(source +
                        ": delta must be set in (0, 1) when method != none");
    const bool has_eps = cfg.epsilon.has_value();
    const bool has_sigma = cfg.sigma.has_value();
    if (has_eps == has_sigma)
      throw ConfigError(source +
                        ": exactly one of epsilon (target budget) or sigma "
                        "(explicit noise) must be set when method != none");
    if (has_eps && !(*cfg.epsilon > 0.0))
      throw ConfigError(source + ": epsilon must be positive");
    if (has_sigma && !(*cfg.sigma > 0.0))
      throw ConfigError(source + ": sigma must be positive");
  }
  return cfg;
}

inline TrainConfig parse_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw ConfigError(path + ": cannot open config file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_train_config_text(buffer.str(), path);
}

}  // namespace dpdrop