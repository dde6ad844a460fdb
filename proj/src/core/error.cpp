#include "opcert/core/error.hpp"

namespace opcert {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::invalid_grid: return "invalid-grid";
    case ErrorCode::shape_mismatch: return "shape-mismatch";
    case ErrorCode::decomposition_depth: return "decomposition-depth";
    case ErrorCode::invalid_coefficients: return "invalid-coefficients";
    case ErrorCode::graph_construction: return "graph-construction";
    case ErrorCode::non_scalar_loss: return "non-scalar-loss";
    case ErrorCode::numerical: return "numerical";
    case ErrorCode::not_positive_definite: return "not-positive-definite";
    case ErrorCode::solver_failure: return "solver-failure";
    case ErrorCode::io: return "io";
    case ErrorCode::config: return "config";
    case ErrorCode::grid_mismatch: return "grid-mismatch";
    case ErrorCode::not_spiking: return "not-spiking";
  }
  return "unknown";
}

void fail(ErrorCode code, const std::string& what) {
  throw Error(code, std::string(to_string(code)) + ": " + what);
}

}  // namespace opcert
