#pragma once

#include <stdexcept>
#include <string>

namespace epigeo {

// Stable error categories; the CLI maps these to distinct exit codes.
enum class ErrorCode : int {
  invalid_input = 2,
  degenerate_motion = 3,
  degenerate_configuration = 4,
  insufficient_data = 5,
  estimation_failure = 6,
  ambiguous_decomposition = 7,
  no_intersection = 8,
  shape_mismatch = 9,
  empty_input = 10,
  invalid_depth = 11,
  invalid_warp = 12,
  degenerate_state = 13,
  numerical_failure = 14,
  parse_error = 15,
  io_error = 16,
  visibility = 17,
  empty_scene = 18,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string &what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const { return code_; }
  int exit_code() const { return static_cast<int>(code_); }

 private:
  ErrorCode code_;
};

}  // namespace epigeo
