#pragma once

#include <stdexcept>
#include <string>

namespace opcert {

enum class ErrorCode {
  invalid_argument,
  invalid_grid,
  shape_mismatch,
  decomposition_depth,
  invalid_coefficients,
  graph_construction,
  non_scalar_loss,
  numerical,
  not_positive_definite,
  solver_failure,
  io,
  config,
  grid_mismatch,
  not_spiking,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace opcert
