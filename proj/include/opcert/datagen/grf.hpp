#pragma once

#include <cstddef>

#include "opcert/core/grid.hpp"
#include "opcert/core/rng.hpp"
#include "opcert/core/tensor.hpp"

namespace opcert::datagen {

enum class GrfBoundary {
  periodic,  ///< Fourier basis on [0,1), -Laplacian eigenvalues 4 pi^2 k^2
  neumann,   ///< cosine basis on [0,1]^d, -Laplacian eigenvalues pi^2 |k|^2
};

/// Law N(0, scale (-Laplacian + shift)^(-power)).
struct GrfSpec {
  double shift = 25.0;
  double scale = 625.0;
  double power = 2.0;
  GrfBoundary boundary = GrfBoundary::periodic;
  /// Retained modes per dimension (neumann: 0..modes-1; periodic: 1..modes
  /// plus the mean). Fixed independently of the evaluation grid so one draw
  /// describes the same function at every resolution.
  std::size_t modes = 64;

  static GrfSpec burgers();
  static GrfSpec darcy();

  /// Covariance eigenvalue of the mode with -Laplacian eigenvalue `laplacian`.
  double eigenvalue_of(double laplacian) const;
};

/// Covariance eigenvalue for integer wavenumbers (k, or k1,k2 in 2D).
double grf_eigenvalue(const GrfSpec& spec, std::size_t k);
double grf_eigenvalue(const GrfSpec& spec, std::size_t k1, std::size_t k2);

/// One draw, stored as basis coefficients (already scaled by sqrt(eigenvalue)).
struct GrfSample {
  GrfSpec spec;
  std::size_t dims = 1;
  /// periodic 1D: [mean, cos_1, sin_1, cos_2, sin_2, ...]; neumann: modes^d
  /// row-major cosine coefficients.
  Tensor coefficients;
};

GrfSample draw_grf(const GrfSpec& spec, std::size_t dims, SeededRng& rng);
/// Evaluates the draw on `grid` (periodic boundary needs a periodic 1D grid).
Tensor evaluate_grf(const GrfSample& sample, const GridSpec& grid);
/// draw + evaluate.
Tensor sample_grf(const GrfSpec& spec, const GridSpec& grid, SeededRng& rng);

/// Pointwise variance of the truncated field at x (periodic: any x).
double grf_point_variance(const GrfSpec& spec, double x);
/// Covariance between two points of the truncated periodic 1D field.
double grf_periodic_covariance(const GrfSpec& spec, double x, double y);

}  // namespace opcert::datagen
