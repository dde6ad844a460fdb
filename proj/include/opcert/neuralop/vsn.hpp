#pragma once

#include <cstddef>
#include <vector>

#include "opcert/autodiff/ops.hpp"

namespace opcert::neuralop {

struct VsnParams {
  double leak = 0.9;
  double threshold = 0.5;
};

struct VsnTrace {
  std::vector<double> output;
  std::size_t spike_count = 0;
};

/// Runs one neuron over an input sequence: M_t = leak M_{t-1} + z_t, spike
/// and reset when M_t >= threshold, y_t = gelu(spike * z_t).
VsnTrace vsn_forward(const std::vector<double>& z, const VsnParams& params);

using ad::vsn_surrogate_grad;

}  // namespace opcert::neuralop
