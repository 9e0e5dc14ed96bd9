// Copyright 2026 The DPDrop Authors
// SPDX-License-Identifier: Apache-2.0
//
// Exception taxonomy shared by every module. All library errors derive from
// Error so callers can catch one base type; subclasses distinguish the
// recovery path (bad arguments vs. bad files vs. unreachable calibration
// targets vs. inconsistent tensor shapes vs. invalid run configuration).

#pragma once

#include <stdexcept>
#include <string>

namespace dpdrop {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Mathematically invalid argument (out of domain, violated precondition).
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(what) {}
};

// Malformed input file; message carries file/row/field context.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(what) {}
};

// Calibration target unreachable inside the solver bracket; message reports
// the achievable range.
class CalibrationError : public Error {
 public:
  CalibrationError(const std::string& what, double eps_min, double eps_max)
      : Error(what), achievable_min(eps_min), achievable_max(eps_max) {}
  double achievable_min;
  double achievable_max;
};

// Tensor dimensions that do not line up.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(what) {}
};

// Invalid or contradictory run configuration.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace dpdrop