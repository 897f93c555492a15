#pragma once

#include <stdexcept>
#include <string>

namespace tumornet {

enum class ErrorCode {
  invalid_argument,
  shape_mismatch,
  empty_mass,
  not_a_container,
  malformed_header,
  truncated_payload,
  payload_size_mismatch,
  io,
  degenerate_range,
  seed_outside_tissue,
  no_eligible_seed,
  empty_white_matter,
  numerical_blowup,
  uninitialized_stats,
  config,
  missing_data,
};

// Coarse category used by the command line front end to pick an exit code.
enum class ErrorCategory { config, data, numerical, other };

inline ErrorCategory category_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::config:
      return ErrorCategory::config;
    case ErrorCode::not_a_container:
    case ErrorCode::malformed_header:
    case ErrorCode::truncated_payload:
    case ErrorCode::payload_size_mismatch:
    case ErrorCode::io:
    case ErrorCode::missing_data:
    case ErrorCode::empty_mass:
    case ErrorCode::seed_outside_tissue:
    case ErrorCode::no_eligible_seed:
    case ErrorCode::empty_white_matter:
      return ErrorCategory::data;
    case ErrorCode::numerical_blowup:
      return ErrorCategory::numerical;
    default:
      return ErrorCategory::other;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tumornet
