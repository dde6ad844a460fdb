#pragma once

#include <cstddef>

#include "opcert/core/tensor.hpp"

namespace opcert::datagen {

struct BurgersConfig {
  double viscosity = 0.1;
  double dt = 1.0 / 200.0;
  double t_final = 1.0;
  std::size_t solver_resolution = 1024;
  /// Turns the nonlinear term off (heat equation), for verification.
  bool advection = true;
};

struct BurgersStats {
  std::size_t steps = 0;
  /// Largest max|u| dt / dx seen over the run.
  double max_cfl = 0.0;
};

/// u_t + u u_x = nu u_xx on the periodic unit interval. Pseudo-spectral in
/// space with 2/3 dealiasing; integrating-factor RK4 in time (diffusion
/// exact, advection explicit). u0 lives on the solver grid.
Tensor solve_burgers(const Tensor& u0, const BurgersConfig& config, BurgersStats* stats = nullptr);

/// Every (n / out)-th point of a periodic field.
Tensor subsample_periodic(const Tensor& field, std::size_t out);

}  // namespace opcert::datagen
