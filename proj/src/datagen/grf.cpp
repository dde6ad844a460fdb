#include "opcert/datagen/grf.hpp"

#include <cmath>
#include <numbers>

#include "opcert/core/error.hpp"
#include "opcert/datagen/fft.hpp"

namespace opcert::datagen {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSqrt2 = std::numbers::sqrt2;

double basis_cos(std::size_t k, double x) { return k == 0 ? 1.0 : kSqrt2 * std::cos(kPi * static_cast<double>(k) * x); }

}  // namespace

GrfSpec GrfSpec::burgers() { return {25.0, 625.0, 2.0, GrfBoundary::periodic, 511}; }

GrfSpec GrfSpec::darcy() { return {9.0, 1.0, 2.0, GrfBoundary::neumann, 64}; }

double GrfSpec::eigenvalue_of(double laplacian) const { return scale * std::pow(laplacian + shift, -power); }

double grf_eigenvalue(const GrfSpec& spec, std::size_t k) {
  const double kk = static_cast<double>(k);
  const double factor = spec.boundary == GrfBoundary::periodic ? 4.0 * kPi * kPi : kPi * kPi;
  return spec.eigenvalue_of(factor * kk * kk);
}

double grf_eigenvalue(const GrfSpec& spec, std::size_t k1, std::size_t k2) {
  const double a = static_cast<double>(k1), b = static_cast<double>(k2);
  const double factor = spec.boundary == GrfBoundary::periodic ? 4.0 * kPi * kPi : kPi * kPi;
  return spec.eigenvalue_of(factor * (a * a + b * b));
}

GrfSample draw_grf(const GrfSpec& spec, std::size_t dims, SeededRng& rng) {
  require(spec.scale >= 0.0 && spec.shift > 0.0 && spec.modes >= 1, ErrorCode::invalid_argument,
          "invalid GRF spec");
  require(dims == 1 || dims == 2, ErrorCode::invalid_argument, "GRF supports 1D and 2D");
  GrfSample s;
  s.spec = spec;
  s.dims = dims;
  if (spec.boundary == GrfBoundary::periodic) {
    require(dims == 1, ErrorCode::invalid_argument, "periodic GRF is 1D only");
    s.coefficients = Tensor({1 + 2 * spec.modes});
    s.coefficients[0] = std::sqrt(grf_eigenvalue(spec, 0)) * rng.normal();
    for (std::size_t k = 1; k <= spec.modes; ++k) {
      const double amp = std::sqrt(grf_eigenvalue(spec, k));
      s.coefficients[2 * k - 1] = amp * rng.normal();
      s.coefficients[2 * k] = amp * rng.normal();
    }
    return s;
  }
  const std::size_t m = spec.modes;
  s.coefficients = dims == 1 ? Tensor({m}) : Tensor({m, m});
  if (dims == 1) {
    for (std::size_t k = 0; k < m; ++k) s.coefficients[k] = std::sqrt(grf_eigenvalue(spec, k)) * rng.normal();
  } else {
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < m; ++b) s.coefficients[a * m + b] = std::sqrt(grf_eigenvalue(spec, a, b)) * rng.normal();
  }
  return s;
}

Tensor evaluate_grf(const GrfSample& sample, const GridSpec& grid) {
  grid.validate();
  require(grid.dims() == sample.dims, ErrorCode::invalid_grid, "GRF dimension does not match grid");
  const GrfSpec& spec = sample.spec;
  if (spec.boundary == GrfBoundary::periodic) {
    require(grid.periodic, ErrorCode::invalid_grid, "periodic GRF needs a periodic grid");
    const std::size_t n = grid.resolution[0];
    // Modes at or above the grid Nyquist alias; they are dropped.
    const std::size_t keep = std::min(spec.modes, (n - 1) / 2);
    RealFft fft(n);
    auto* c = fft.spectrum();
    for (std::size_t k = 0; k < fft.modes(); ++k) c[k] = 0.0;
    c[0] = sample.coefficients[0];
    for (std::size_t k = 1; k <= keep; ++k) {
      // sqrt2 (a cos + b sin) = c_k e^{+} + conj(c_k) e^{-}, c_k = (a - i b) / sqrt2
      c[k] = std::complex<double>(sample.coefficients[2 * k - 1], -sample.coefficients[2 * k]) / kSqrt2;
    }
    fft.inverse();
    Tensor out({n});
    std::copy_n(fft.real(), n, out.raw());
    return out;
  }
  const std::size_t m = spec.modes;
  if (grid.dims() == 1) {
    const auto x = axis_coordinates(grid, 0);
    Tensor out({x.size()});
    for (std::size_t i = 0; i < x.size(); ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < m; ++k) acc += sample.coefficients[k] * basis_cos(k, x[i]);
      out[i] = acc;
    }
    return out;
  }
  const auto x = axis_coordinates(grid, 0);
  const auto y = axis_coordinates(grid, 1);
  std::vector<double> phx(x.size() * m), phy(y.size() * m);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t k = 0; k < m; ++k) phx[i * m + k] = basis_cos(k, x[i]);
  for (std::size_t j = 0; j < y.size(); ++j)
    for (std::size_t k = 0; k < m; ++k) phy[j * m + k] = basis_cos(k, y[j]);
  // tmp[i, b] = sum_a phx[i, a] C[a, b]
  std::vector<double> tmp(x.size() * m, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t a = 0; a < m; ++a) {
      const double p = phx[i * m + a];
      const double* row = sample.coefficients.raw() + a * m;
      for (std::size_t b = 0; b < m; ++b) tmp[i * m + b] += p * row[b];
    }
  Tensor out({x.size(), y.size()});
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j) {
      double acc = 0.0;
      for (std::size_t b = 0; b < m; ++b) acc += tmp[i * m + b] * phy[j * m + b];
      out.at({i, j}) = acc;
    }
  return out;
}

Tensor sample_grf(const GrfSpec& spec, const GridSpec& grid, SeededRng& rng) {
  return evaluate_grf(draw_grf(spec, grid.dims(), rng), grid);
}

double grf_periodic_covariance(const GrfSpec& spec, double x, double y) {
  double c = grf_eigenvalue(spec, 0);
  for (std::size_t k = 1; k <= spec.modes; ++k) c += 2.0 * grf_eigenvalue(spec, k) * std::cos(2 * kPi * k * (x - y));
  return c;
}

double grf_point_variance(const GrfSpec& spec, double x) {
  if (spec.boundary == GrfBoundary::periodic) return grf_periodic_covariance(spec, x, x);
  double v = 0.0;
  for (std::size_t k = 0; k < spec.modes; ++k) v += grf_eigenvalue(spec, k) * basis_cos(k, x) * basis_cos(k, x);
  return v;
}

}  // namespace opcert::datagen
