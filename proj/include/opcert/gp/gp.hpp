#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "opcert/conformal/scp.hpp"
#include "opcert/core/tensor.hpp"

namespace opcert::gp {

/// sigma^2 (1 + r^2 / (2 a l^2))^(-a)
struct RqKernelParams {
  double variance = 1.0;
  double length = 0.2;
  double shape = 1.0;

  void validate() const;
  bool operator==(const RqKernelParams&) const = default;
};

double rq_kernel(std::span<const double> x, std::span<const double> y, const RqKernelParams& p);

struct GpFitOptions {
  RqKernelParams init;
  double tolerance = 1e-10;  ///< stop when ||dtheta||^2 in log space falls below this
  std::size_t max_iters = 200;
  std::size_t restarts = 5;  ///< the first starts at init, the others are log-normal perturbations
  double restart_spread = 1.0;
  double jitter = 1e-10;
  double max_jitter = 1e-6;
  std::size_t max_points = 4000;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

struct GpFactor;

struct GpModel {
  Tensor X;  ///< [N, d] inputs
  Tensor q;  ///< [N] targets
  RqKernelParams params;
  double jitter = 1e-10;    ///< diagonal jitter actually used
  double nll = 0.0;
  std::size_t stride = 1;   ///< subset stride used by superres_q
  std::vector<double> nll_trace;  ///< accepted steps of the winning restart
  std::shared_ptr<const GpFactor> factor;

  std::size_t points() const { return q.size(); }
};

struct GpPrediction {
  Tensor mean;
  Tensor variance;
};

/// Negative log marginal likelihood with the smallest jitter (escalating by
/// 10x from `jitter` up to `max_jitter`) that gives a Cholesky factor.
/// Writes the jitter used when `used` is non-null.
double gp_nll(const Tensor& X, const Tensor& q, const RqKernelParams& p, double jitter = 1e-10,
              double max_jitter = 1e-6, double* used = nullptr);

/// Gradient of gp_nll with respect to (log variance, log length, log shape).
std::vector<double> gp_nll_gradient(const Tensor& X, const Tensor& q, const RqKernelParams& p, double jitter);

/// Factorizes at fixed hyperparameters.
GpModel gp_condition(const Tensor& X, const Tensor& q, const RqKernelParams& p, double jitter = 1e-10,
                     double max_jitter = 1e-6);

/// Gradient descent with backtracking on the NLL over log hyperparameters.
GpModel gp_fit(const Tensor& X, const Tensor& q, const GpFitOptions& options = {});

/// X*: [M, d]. Mean and variance (negative values clamped to 0).
GpPrediction gp_predict(const GpModel& model, const Tensor& Xstar);

struct SuperresInfo {
  std::size_t excluded = 0;  ///< infinite source entries
  std::size_t used = 0;      ///< training points after subsetting
  std::size_t stride = 1;
  RqKernelParams params;
  double nll = 0.0;
};

/// Fits a GP to the finite q entries over normalized source coordinates and
/// evaluates the clamped predictive mean on `target`.
conformal::QField superres_q(const conformal::QField& source, const GridSpec& target,
                             const GpFitOptions& options = {}, SuperresInfo* info = nullptr);

void save_gp(const std::string& path, const GpModel& model);
GpModel load_gp(const std::string& path);

}  // namespace opcert::gp
