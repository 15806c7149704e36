#pragma once

#include <stdexcept>
#include <string>

namespace vbsense {

/// Invalid configuration or scenario parameters (CLI exit code 2).
struct config_error : std::runtime_error {
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input file (CLI exit code 3). Carries a line number when known.
struct parse_error : std::runtime_error {
  explicit parse_error(const std::string& msg, long line = -1)
      : std::runtime_error(line >= 0 ? msg + " (line " + std::to_string(line) + ")" : msg),
        line_number(line) {}
  long line_number;
};

/// Estimation cannot be resolved (e.g. rotor bar with both Stokes
/// components below the noise floor).
struct degenerate_error : std::runtime_error {
  explicit degenerate_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace vbsense
