#include "opcert/datagen/darcy.hpp"

#include <cmath>
#include <vector>

#include "opcert/core/error.hpp"

namespace opcert::datagen {
namespace {

double harmonic(double a, double b) { return 2.0 * a * b / (a + b); }

}  // namespace

Tensor threshold_permeability(const Tensor& latent, const DarcyConfig& config) {
  Tensor a = latent;
  for (auto& v : a.data()) v = v < 0.0 ? config.low : config.high;
  return a;
}

void darcy_apply(const Tensor& a, const double* x, double* y) {
  const std::size_t s = a.dim(0);
  const std::size_t n = s - 2;
  const double inv_h2 = static_cast<double>((s - 1) * (s - 1));
  auto at = [&](std::size_t i, std::size_t j) { return a.raw()[i * s + j]; };
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= n; ++j) {
      const double c = at(i, j);
      const double ae = harmonic(c, at(i, j + 1)), aw = harmonic(c, at(i, j - 1));
      const double an = harmonic(c, at(i + 1, j)), as = harmonic(c, at(i - 1, j));
      const std::size_t k = (i - 1) * n + (j - 1);
      double v = (ae + aw + an + as) * x[k];
      if (j < n) v -= ae * x[k + 1];
      if (j > 1) v -= aw * x[k - 1];
      if (i < n) v -= an * x[k + n];
      if (i > 1) v -= as * x[k - n];
      y[k] = v * inv_h2;
    }
}

Tensor solve_darcy_fd(const Tensor& a, const DarcyConfig& config, DarcyStats* stats) {
  require(a.rank() == 2 && a.dim(0) == a.dim(1) && a.dim(0) >= 3, ErrorCode::invalid_argument,
          "Darcy solver needs a square permeability grid of at least 3x3");
  for (double v : a.data())
    require(v > 0.0 && std::isfinite(v), ErrorCode::invalid_argument, "permeability must be positive");
  const std::size_t s = a.dim(0);
  const std::size_t n = s - 2;
  const std::size_t N = n * n;

  std::vector<double> x(N, 0.0), r(N, config.forcing), p(N), ap(N);
  p = r;
  double rr = 0.0;
  for (double v : r) rr += v * v;
  const double bnorm = std::sqrt(rr);
  DarcyStats local;
  const std::size_t cap = 10 * N;
  while (std::sqrt(rr) > config.tolerance * bnorm) {
    if (local.iterations >= cap)
      fail(ErrorCode::solver_failure, "Darcy CG did not converge in " + std::to_string(cap) + " iterations");
    darcy_apply(a, p.data(), ap.data());
    double pap = 0.0;
    for (std::size_t k = 0; k < N; ++k) pap += p[k] * ap[k];
    const double alpha = rr / pap;
    double rr_new = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
      x[k] += alpha * p[k];
      r[k] -= alpha * ap[k];
      rr_new += r[k] * r[k];
    }
    const double beta = rr_new / rr;
    for (std::size_t k = 0; k < N; ++k) p[k] = r[k] + beta * p[k];
    rr = rr_new;
    ++local.iterations;
  }
  local.relative_residual = std::sqrt(rr) / bnorm;
  if (stats != nullptr) *stats = local;

  Tensor u({s, s}, 0.0);
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= n; ++j) u.at({i, j}) = x[(i - 1) * n + (j - 1)];
  return u;
}

}  // namespace opcert::datagen
