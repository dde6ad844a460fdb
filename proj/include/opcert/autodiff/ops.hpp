#pragma once

#include <cstddef>
#include <utility>

#include "opcert/autodiff/tape.hpp"
#include "opcert/wavelet/dwt.hpp"

namespace opcert::ad {

// Feature tensors are laid out [channels, ...points]; the trailing
// `spatial_dims` axes of a feature tensor form the grid.

/// y = W x + b over the channel axis. W is [out, in], b is [out].
Var affine(Var x, Var weight, Var bias);
/// y = K x over the channel axis (pointwise 1x1 convolution), K is [out, in].
Var conv1x1(Var x, Var kernel);

Var gelu(Var x);
Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// Same elements, new shape of equal size.
Var reshape(Var a, Shape shape);
/// Sum of all elements, shape [1].
Var sum(Var a);
/// Mean squared error against a constant target, shape [1].
Var mse(Var prediction, const Tensor& target);
/// Norm-wise pinball loss averaged over the leading (sample) axis:
/// eta*||y - p|| when ||y|| >= ||p||, else (1 - eta)*||y - p||.
Var pinball(Var prediction, const Tensor& target, double eta);

struct WaveletSpec {
  wavelet::Family family = wavelet::Family::db6;
  std::size_t levels = 1;
  std::size_t spatial_dims = 1;
};

/// Packed multilevel DWT of every grid slice. Non-dyadic extents are
/// symmetric-padded, so the output spatial extents may exceed the input's.
Var dwt(Var x, const WaveletSpec& spec);
/// Inverse of dwt; crops back to `spatial_shape`.
Var idwt(Var coeffs, const WaveletSpec& spec, const Shape& spatial_shape);
/// Scales the coarsest approximation block of packed coefficients; details
/// pass through. R is [C, A] (per-channel scaling) or [Cin, Cout, A]
/// (channel mixing, Cin == Cout), A = size of the approximation block.
Var wavelet_scale(Var coeffs, Var weights, const WaveletSpec& spec);

/// Approximation block extents of packed coefficients for padded spatial
/// extents `padded`.
Shape approximation_extent(const Shape& padded_spatial, std::size_t levels);

enum class SpikeMode {
  hard,    ///< Heaviside forward, surrogate derivative backward
  smooth,  ///< logistic forward, exact derivative backward
};

struct VsnOptions {
  std::size_t steps = 1;
  double slope = 10.0;
  SpikeMode mode = SpikeMode::hard;
};

struct VsnResult {
  Var output;  ///< time-averaged gated activation, same shape as x
  Var spikes;  ///< time-averaged spike indicator per neuron, same shape as x
};

/// Variable spiking neuron layer driven by a constant input over `steps`
/// time steps. leak and threshold are per channel ([C]).
VsnResult vsn(Var x, Var leak, Var threshold, const VsnOptions& options);

double logistic(double x) noexcept;
double gelu_value(double x) noexcept;
double gelu_derivative(double x) noexcept;
/// Surrogate spike derivative k s(k(m - th)) (1 - s(k(m - th))).
double vsn_surrogate_grad(double membrane, double threshold, double slope) noexcept;

}  // namespace opcert::ad
