#include "opcert/datagen/burgers.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "opcert/core/error.hpp"
#include "opcert/datagen/fft.hpp"

namespace opcert::datagen {
namespace {

using cplx = std::complex<double>;

class Advection {
 public:
  Advection(std::size_t n, bool enabled) : fft_(n), enabled_(enabled), n_(n) {
    ik_.resize(fft_.modes());
    for (std::size_t k = 0; k < fft_.modes(); ++k) {
      // 2/3 rule: modes above n/3 are removed from the product.
      const bool keep = 3 * k <= n;
      ik_[k] = keep ? cplx(0.0, 2.0 * std::numbers::pi * static_cast<double>(k)) : cplx(0.0, 0.0);
    }
  }

  /// Spectrum of -(u^2/2)_x for the field with spectrum c; also returns max|u|.
  double apply(const std::vector<cplx>& c, std::vector<cplx>& out) {
    const std::size_t m = fft_.modes();
    out.assign(m, cplx(0.0, 0.0));
    for (std::size_t k = 0; k < m; ++k) fft_.spectrum()[k] = c[k];
    fft_.inverse();
    double umax = 0.0;
    double* u = fft_.real();
    for (std::size_t j = 0; j < n_; ++j) {
      umax = std::max(umax, std::abs(u[j]));
      u[j] = 0.5 * u[j] * u[j];
    }
    if (!enabled_) return umax;
    fft_.forward();
    for (std::size_t k = 0; k < m; ++k) out[k] = -ik_[k] * fft_.spectrum()[k];
    return umax;
  }

 private:
  RealFft fft_;
  bool enabled_;
  std::size_t n_;
  std::vector<cplx> ik_;
};

}  // namespace

Tensor solve_burgers(const Tensor& u0, const BurgersConfig& config, BurgersStats* stats) {
  const std::size_t n = config.solver_resolution;
  require(u0.rank() == 1 && u0.size() == n, ErrorCode::invalid_argument,
          "initial condition must have the solver resolution " + std::to_string(n));
  require(n % 2 == 0 && n >= 8, ErrorCode::invalid_argument, "solver resolution must be even and >= 8");
  require(config.dt > 0.0 && config.t_final >= 0.0 && config.viscosity >= 0.0, ErrorCode::invalid_argument,
          "invalid Burgers time stepping");
  const std::size_t steps = static_cast<std::size_t>(std::llround(config.t_final / config.dt));
  require(std::abs(static_cast<double>(steps) * config.dt - config.t_final) < 1e-9, ErrorCode::invalid_argument,
          "t_final must be a whole number of steps");

  RealFft fft(n);
  std::copy_n(u0.raw(), n, fft.real());
  fft.forward();
  const std::size_t m = fft.modes();
  std::vector<cplx> c(fft.spectrum(), fft.spectrum() + m);

  const double h = config.dt;
  std::vector<double> e_half(m), e_full(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double kk = 2.0 * std::numbers::pi * static_cast<double>(k);
    e_half[k] = std::exp(-config.viscosity * kk * kk * h / 2.0);
    e_full[k] = e_half[k] * e_half[k];
  }

  Advection nonlinear(n, config.advection);
  std::vector<cplx> a, b, cc, d, tmp(m);
  BurgersStats local;
  const double dx = 1.0 / static_cast<double>(n);
  for (std::size_t step = 0; step < steps; ++step) {
    const double umax = nonlinear.apply(c, a);
    local.max_cfl = std::max(local.max_cfl, umax * h / dx);
    if (!std::isfinite(umax) || umax > 1e6)
      fail(ErrorCode::solver_failure, "Burgers solver blew up at step " + std::to_string(step));
    for (std::size_t k = 0; k < m; ++k) tmp[k] = e_half[k] * (c[k] + 0.5 * h * a[k]);
    nonlinear.apply(tmp, b);
    for (std::size_t k = 0; k < m; ++k) tmp[k] = e_half[k] * c[k] + 0.5 * h * b[k];
    nonlinear.apply(tmp, cc);
    for (std::size_t k = 0; k < m; ++k) tmp[k] = e_full[k] * c[k] + h * e_half[k] * cc[k];
    nonlinear.apply(tmp, d);
    for (std::size_t k = 0; k < m; ++k)
      c[k] = e_full[k] * c[k] + h / 6.0 * (e_full[k] * a[k] + 2.0 * e_half[k] * (b[k] + cc[k]) + d[k]);
    ++local.steps;
  }

  for (std::size_t k = 0; k < m; ++k) fft.spectrum()[k] = c[k];
  // Nyquist mode of a real signal must be real.
  fft.spectrum()[m - 1] = fft.spectrum()[m - 1].real();
  fft.inverse();
  Tensor out({n});
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = fft.real()[j];
    if (!std::isfinite(out[j])) fail(ErrorCode::solver_failure, "Burgers solver produced a non-finite value");
  }
  if (stats != nullptr) *stats = local;
  return out;
}

Tensor subsample_periodic(const Tensor& field, std::size_t out) {
  require(field.rank() == 1 && out >= 1 && field.size() % out == 0, ErrorCode::invalid_argument,
          "cannot subsample " + std::to_string(field.size()) + " points to " + std::to_string(out));
  const std::size_t stride = field.size() / out;
  Tensor r({out});
  for (std::size_t i = 0; i < out; ++i) r[i] = field[i * stride];
  return r;
}

}  // namespace opcert::datagen
