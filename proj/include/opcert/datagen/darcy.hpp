#pragma once

#include <cstddef>

#include "opcert/core/tensor.hpp"

namespace opcert::datagen {

struct DarcyConfig {
  std::size_t resolution = 32;  ///< nodes per side, boundary included
  double low = 3.0;             ///< permeability where the latent field is negative
  double high = 12.0;           ///< permeability elsewhere
  double forcing = 1.0;
  double tolerance = 1e-10;     ///< relative CG residual
};

struct DarcyStats {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
};

/// Two-level map of a latent Gaussian field.
Tensor threshold_permeability(const Tensor& latent, const DarcyConfig& config);

/// -div(a grad u) = f on the unit square with u = 0 on the boundary. Node
/// grid with spacing 1/(s-1); 5-point conservative stencil with harmonic-mean
/// edge permeabilities; conjugate gradient on the interior unknowns.
Tensor solve_darcy_fd(const Tensor& a, const DarcyConfig& config, DarcyStats* stats = nullptr);

/// Applies the interior operator (no boundary rows) to x; both (s-2)^2 long.
void darcy_apply(const Tensor& a, const double* x, double* y);

}  // namespace opcert::datagen
