#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "opcert/autodiff/tape.hpp"
#include "opcert/core/rng.hpp"

namespace opcert::ad {

struct GradCheckOptions {
  double epsilon = 1e-5;
  std::size_t samples_per_parameter = 8;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::map<std::string, double> per_parameter;
  std::size_t coordinates_checked = 0;
};

/// Compares the tape gradient against central finite differences on sampled
/// coordinates. The closure builds a scalar loss on the given tape and must
/// be deterministic.
GradCheckReport grad_check(const std::function<Var(Tape&)>& closure,
                           const std::vector<Parameter*>& parameters,
                           const GradCheckOptions& options = {});

}  // namespace opcert::ad
