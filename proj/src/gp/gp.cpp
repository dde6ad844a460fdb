#include "opcert/gp/gp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "opcert/core/binary_io.hpp"
#include "opcert/core/error.hpp"
#include "opcert/core/parallel.hpp"
#include "opcert/core/rng.hpp"

namespace opcert::gp {

struct GpFactor {
  Eigen::MatrixXd X;
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::VectorXd alpha;
};

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kLogBounds[3][2] = {{-18.42, 18.42}, {-9.21, 9.21}, {-6.91, 13.82}};
constexpr const char* kMagic = "OPGPMD01";
constexpr std::uint32_t kVersion = 1;

MatrixXd to_matrix(const Tensor& X) {
  require(X.rank() == 2, ErrorCode::shape_mismatch, "GP inputs must be [points, dims]");
  MatrixXd m(X.dim(0), X.dim(1));
  for (std::size_t i = 0; i < X.dim(0); ++i)
    for (std::size_t d = 0; d < X.dim(1); ++d) m(i, d) = X[i * X.dim(1) + d];
  return m;
}

VectorXd to_vector(const Tensor& q) {
  VectorXd v(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) v(i) = q[i];
  return v;
}

double rq_value(double r2, const RqKernelParams& p) {
  return p.variance * std::pow(1.0 + r2 / (2.0 * p.shape * p.length * p.length), -p.shape);
}

MatrixXd squared_distances(const MatrixXd& A, const MatrixXd& B) {
  MatrixXd r2(A.rows(), B.rows());
  for (Eigen::Index j = 0; j < B.rows(); ++j)
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      double s = 0.0;
      for (Eigen::Index d = 0; d < A.cols(); ++d) {
        const double diff = A(i, d) - B(j, d);
        s += diff * diff;
      }
      r2(i, j) = s;
    }
  return r2;
}

MatrixXd kernel_of(const MatrixXd& r2, const RqKernelParams& p) {
  return r2.unaryExpr([&p](double v) { return rq_value(v, p); });
}

struct Factorization {
  Eigen::LLT<MatrixXd> llt;
  VectorXd alpha;
  double jitter = 0.0;
  double nll = 0.0;
};

std::optional<Factorization> factorize(const MatrixXd& K, const VectorXd& y, double jitter, double max_jitter) {
  const Eigen::Index n = K.rows();
  for (double j = jitter; j <= max_jitter * (1.0 + 1e-9); j *= 10.0) {
    MatrixXd Kj = K;
    Kj.diagonal().array() += j;
    Factorization f;
    f.llt.compute(Kj);
    if (f.llt.info() != Eigen::Success) continue;
    const auto& L = f.llt.matrixLLT();
    if ((L.diagonal().array() <= 0.0).any()) continue;
    f.alpha = f.llt.solve(y);
    const double logdet = 2.0 * L.diagonal().array().log().sum();
    f.nll = 0.5 * y.dot(f.alpha) + 0.5 * logdet + 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
    if (!std::isfinite(f.nll)) continue;
    f.jitter = j;
    return f;
  }
  return std::nullopt;
}

void check_training_set(const Tensor& X, const Tensor& q) {
  require(X.rank() == 2 && X.dim(0) >= 2, ErrorCode::invalid_argument, "GP fit needs at least two points");
  require(q.size() == X.dim(0), ErrorCode::shape_mismatch, "GP targets do not match inputs");
  require(all_finite(X) && all_finite(q), ErrorCode::invalid_argument, "GP data must be finite");
  const MatrixXd M = to_matrix(X);
  const MatrixXd r2 = squared_distances(M, M);
  for (Eigen::Index j = 0; j < M.rows(); ++j)
    for (Eigen::Index i = 0; i < j; ++i)
      require(r2(i, j) > 0.0, ErrorCode::invalid_argument,
              "duplicate GP inputs at rows " + std::to_string(i) + " and " + std::to_string(j));
}

RqKernelParams from_log(const std::array<double, 3>& t) {
  return RqKernelParams{std::exp(t[0]), std::exp(t[1]), std::exp(t[2])};
}

std::array<double, 3> to_log(const RqKernelParams& p) {
  return {std::log(p.variance), std::log(p.length), std::log(p.shape)};
}

std::array<double, 3> clamp_log(std::array<double, 3> t) {
  for (int i = 0; i < 3; ++i) t[i] = std::clamp(t[i], kLogBounds[i][0], kLogBounds[i][1]);
  return t;
}

std::vector<double> gradient(const MatrixXd& r2, const Factorization& f, const RqKernelParams& p) {
  const Eigen::Index n = r2.rows();
  const MatrixXd Kinv = f.llt.solve(MatrixXd::Identity(n, n));
  std::vector<double> g(3, 0.0);
  const double a = p.shape, l2 = p.length * p.length;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) {
      const double w = Kinv(i, j) - f.alpha(i) * f.alpha(j);
      const double r = r2(i, j);
      const double b = 1.0 + r / (2.0 * a * l2);
      const double k = p.variance * std::pow(b, -a);
      g[0] += w * k;
      g[1] += w * k * r / (l2 * b);
      g[2] += w * k * a * (-std::log(b) + r / (2.0 * a * l2 * b));
    }
  for (auto& v : g) v *= 0.5;
  return g;
}

struct RunResult {
  bool ok = false;
  std::array<double, 3> theta{};
  double nll = std::numeric_limits<double>::infinity();
  std::vector<double> trace;
};

RunResult descend(const MatrixXd& r2, const VectorXd& y, std::array<double, 3> theta, const GpFitOptions& opt) {
  RunResult out;
  theta = clamp_log(theta);
  auto eval = [&](const std::array<double, 3>& t) {
    return factorize(kernel_of(r2, from_log(t)), y, opt.jitter, opt.max_jitter);
  };
  std::optional<Factorization> cur = eval(theta);
  if (!cur) return out;
  out.trace.push_back(cur->nll);
  double step = 1.0;
  for (std::size_t it = 0; it < opt.max_iters; ++it) {
    const std::vector<double> g = gradient(r2, *cur, from_log(theta));
    if (!std::isfinite(g[0] + g[1] + g[2])) break;
    bool accepted = false;
    double moved = 0.0;
    step = std::min(step * 2.0, 10.0);
    for (int h = 0; h < 50 && !accepted; ++h, step *= 0.5) {
      std::array<double, 3> cand;
      for (int i = 0; i < 3; ++i) cand[i] = theta[i] - step * g[i];
      cand = clamp_log(cand);
      double decrease = 0.0;
      moved = 0.0;
      for (int i = 0; i < 3; ++i) {
        decrease += g[i] * (theta[i] - cand[i]);
        moved += (cand[i] - theta[i]) * (cand[i] - theta[i]);
      }
      if (moved == 0.0) break;
      std::optional<Factorization> next = eval(cand);
      if (next && next->nll <= cur->nll - 1e-4 * decrease) {
        theta = cand;
        cur = std::move(next);
        accepted = true;
        out.trace.push_back(cur->nll);
      }
    }
    if (!accepted || moved <= opt.tolerance) break;
  }
  out.ok = true;
  out.theta = theta;
  out.nll = cur->nll;
  return out;
}

GpModel assemble(const Tensor& X, const Tensor& q, const RqKernelParams& p, Factorization f, const MatrixXd& M) {
  GpModel m;
  m.X = X;
  m.q = q;
  m.params = p;
  m.jitter = f.jitter;
  m.nll = f.nll;
  auto factor = std::make_shared<GpFactor>();
  factor->X = M;
  factor->alpha = f.alpha;
  factor->llt = std::move(f.llt);
  m.factor = std::move(factor);
  return m;
}

}  // namespace

void RqKernelParams::validate() const {
  require(variance > 0.0 && length > 0.0 && shape > 0.0 && std::isfinite(variance) && std::isfinite(length) &&
              std::isfinite(shape),
          ErrorCode::invalid_argument, "kernel parameters must be finite and positive");
}

double rq_kernel(std::span<const double> x, std::span<const double> y, const RqKernelParams& p) {
  require(x.size() == y.size(), ErrorCode::shape_mismatch, "rq_kernel: dimension mismatch");
  double r2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) r2 += (x[i] - y[i]) * (x[i] - y[i]);
  return rq_value(r2, p);
}

double gp_nll(const Tensor& X, const Tensor& q, const RqKernelParams& p, double jitter, double max_jitter,
              double* used) {
  p.validate();
  check_training_set(X, q);
  const MatrixXd M = to_matrix(X);
  auto f = factorize(kernel_of(squared_distances(M, M), p), to_vector(q), jitter, max_jitter);
  require(f.has_value(), ErrorCode::not_positive_definite, "kernel matrix is not positive definite");
  if (used) *used = f->jitter;
  return f->nll;
}

std::vector<double> gp_nll_gradient(const Tensor& X, const Tensor& q, const RqKernelParams& p, double jitter) {
  p.validate();
  check_training_set(X, q);
  const MatrixXd M = to_matrix(X);
  const MatrixXd r2 = squared_distances(M, M);
  auto f = factorize(kernel_of(r2, p), to_vector(q), jitter, jitter);
  require(f.has_value(), ErrorCode::not_positive_definite, "kernel matrix is not positive definite");
  return gradient(r2, *f, p);
}

GpModel gp_condition(const Tensor& X, const Tensor& q, const RqKernelParams& p, double jitter, double max_jitter) {
  p.validate();
  check_training_set(X, q);
  const MatrixXd M = to_matrix(X);
  auto f = factorize(kernel_of(squared_distances(M, M), p), to_vector(q), jitter, max_jitter);
  require(f.has_value(), ErrorCode::not_positive_definite,
          "kernel matrix is not positive definite with jitter up to " + std::to_string(max_jitter));
  return assemble(X, q, p, std::move(*f), M);
}

GpModel gp_fit(const Tensor& X, const Tensor& q, const GpFitOptions& opt) {
  opt.init.validate();
  check_training_set(X, q);
  require(opt.restarts >= 1, ErrorCode::invalid_argument, "gp_fit needs at least one restart");
  require(opt.jitter > 0.0 && opt.max_jitter >= opt.jitter, ErrorCode::invalid_argument, "invalid jitter range");
  const MatrixXd M = to_matrix(X);
  const MatrixXd r2 = squared_distances(M, M);
  const VectorXd y = to_vector(q);
  const std::array<double, 3> base = to_log(opt.init);

  std::vector<RunResult> runs(opt.restarts);
  parallel_for(opt.restarts, std::max<std::size_t>(1, opt.workers), [&](std::size_t r) {
    std::array<double, 3> start = base;
    if (r > 0) {
      SeededRng rng = SeededRng(opt.seed, 0x67707273).derive(r);
      for (auto& t : start) t += opt.restart_spread * rng.normal();
    }
    runs[r] = descend(r2, y, start, opt);
  });
  std::size_t best = runs.size();
  for (std::size_t r = 0; r < runs.size(); ++r)
    if (runs[r].ok && (best == runs.size() || runs[r].nll < runs[best].nll)) best = r;
  require(best < runs.size(), ErrorCode::not_positive_definite,
          "GP fit failed: kernel matrix not positive definite with jitter up to " + std::to_string(opt.max_jitter));

  const RqKernelParams p = from_log(runs[best].theta);
  auto f = factorize(kernel_of(r2, p), y, opt.jitter, opt.max_jitter);
  GpModel m = assemble(X, q, p, std::move(*f), M);
  m.nll_trace = std::move(runs[best].trace);
  return m;
}

GpPrediction gp_predict(const GpModel& model, const Tensor& Xstar) {
  require(model.factor != nullptr, ErrorCode::invalid_argument, "GP model is not fitted");
  const MatrixXd S = to_matrix(Xstar);
  require(S.cols() == model.factor->X.cols(), ErrorCode::shape_mismatch, "GP query dimension mismatch");
  const MatrixXd Ks = kernel_of(squared_distances(model.factor->X, S), model.params);
  const VectorXd mean = Ks.transpose() * model.factor->alpha;
  const MatrixXd V = model.factor->llt.matrixL().solve(Ks);
  GpPrediction p{Tensor({static_cast<std::size_t>(S.rows())}), Tensor({static_cast<std::size_t>(S.rows())})};
  for (Eigen::Index i = 0; i < S.rows(); ++i) {
    p.mean[i] = mean(i);
    p.variance[i] = std::max(0.0, model.params.variance - V.col(i).squaredNorm());
  }
  return p;
}

conformal::QField superres_q(const conformal::QField& source, const GridSpec& target, const GpFitOptions& options,
                             SuperresInfo* info) {
  target.validate();
  require(target.dims() == source.grid.dims(), ErrorCode::grid_mismatch,
          "super-resolution grid must have the same dimension as the calibration grid");
  require(source.q.size() == source.grid.points(), ErrorCode::shape_mismatch, "q does not match its grid");
  const std::size_t P = source.grid.points(), dims = source.grid.dims();
  std::vector<std::size_t> finite;
  for (std::size_t j = 0; j < P; ++j)
    if (std::isfinite(source.q[j])) finite.push_back(j);
  require(!finite.empty(), ErrorCode::numerical, "every q entry is infinite; nothing to fit");

  auto index_of = [&](std::size_t j, std::size_t d) {
    return dims == 1 ? j : (d == 0 ? j / source.grid.resolution[1] : j % source.grid.resolution[1]);
  };
  std::size_t stride = 1;
  std::vector<std::size_t> kept = finite;
  while (kept.size() > std::max<std::size_t>(2, options.max_points)) {
    ++stride;
    kept.clear();
    for (std::size_t j : finite) {
      bool on = true;
      for (std::size_t d = 0; d < dims; ++d) on = on && index_of(j, d) % stride == 0;
      if (on) kept.push_back(j);
    }
  }

  const Tensor coords = normalized_coordinates(source.grid);
  Tensor X({kept.size(), dims}), q({kept.size()});
  for (std::size_t i = 0; i < kept.size(); ++i) {
    for (std::size_t d = 0; d < dims; ++d) X[i * dims + d] = coords[kept[i] * dims + d];
    q[i] = source.q[kept[i]];
  }
  GpModel model = gp_fit(X, q, options);
  model.stride = stride;
  const GpPrediction pred = gp_predict(model, normalized_coordinates(target));

  conformal::QField out{Tensor(target.shape()), target, source.alpha, source.z, source.kind};
  for (std::size_t j = 0; j < out.q.size(); ++j) out.q[j] = std::max(0.0, pred.mean[j]);
  if (info) {
    info->excluded = P - finite.size();
    info->used = kept.size();
    info->stride = stride;
    info->params = model.params;
    info->nll = model.nll;
  }
  return out;
}

void save_gp(const std::string& path, const GpModel& model) {
  BinaryWriter w(path);
  w.magic(kMagic);
  w.u32(kVersion);
  w.f64(model.params.variance);
  w.f64(model.params.length);
  w.f64(model.params.shape);
  w.f64(model.jitter);
  w.u64(model.stride);
  w.record("X", model.X);
  w.record("q", model.q);
  w.close();
}

GpModel load_gp(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic(kMagic);
  require(r.u32() == kVersion, ErrorCode::io, path + ": unsupported GP model version");
  RqKernelParams p;
  p.variance = r.f64();
  p.length = r.f64();
  p.shape = r.f64();
  const double jitter = r.f64();
  const std::size_t stride = r.u64();
  const Tensor X = r.record("X");
  const Tensor q = r.record("q");
  require(r.at_end(), ErrorCode::io, path + ": trailing bytes");
  GpModel m = gp_condition(X, q, p, jitter, jitter);
  m.stride = stride;
  return m;
}

}  // namespace opcert::gp
