#include "opcert/neuralop/vsn.hpp"

namespace opcert::neuralop {

VsnTrace vsn_forward(const std::vector<double>& z, const VsnParams& params) {
  VsnTrace trace;
  trace.output.reserve(z.size());
  double m = 0.0;
  for (double zt : z) {
    m = params.leak * m + zt;
    double spike = 0.0;
    if (m >= params.threshold) {
      spike = 1.0;
      m = 0.0;
      ++trace.spike_count;
    }
    trace.output.push_back(ad::gelu_value(spike * zt));
  }
  return trace;
}

}  // namespace opcert::neuralop
