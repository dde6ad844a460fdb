#include "opcert/conformal/scp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "opcert/core/binary_io.hpp"
#include "opcert/core/error.hpp"
#include "opcert/core/keyvalue.hpp"
#include "opcert/core/parallel.hpp"

namespace opcert::conformal {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr const char* kMagic = "OPQFLD01";
constexpr std::uint32_t kVersion = 1;

void check_alpha(double alpha) {
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::invalid_argument, "alpha must lie in (0, 1)");
}

/// Number of leading batch entries when `field` is q-shaped or batched.
std::size_t batch_of(const Tensor& field, const Tensor& q, const char* context) {
  if (field.shape() == q.shape()) return 1;
  Shape tail(field.shape().begin() + (field.rank() > 0 ? 1 : 0), field.shape().end());
  require(tail == q.shape(), ErrorCode::shape_mismatch,
          std::string(context) + ": field " + shape_string(field.shape()) + " does not match q " +
              shape_string(q.shape()));
  return field.dim(0);
}

void check_grid_inputs(const Tensor& inputs, const Tensor& outputs, const GridSpec& grid, const char* context) {
  Shape want{inputs.rank() > 0 ? inputs.dim(0) : 0};
  for (std::size_t n : grid.resolution) want.push_back(n);
  require(inputs.shape() == want && outputs.shape() == want, ErrorCode::grid_mismatch,
          std::string(context) + ": samples do not lie on grid " + grid.describe());
}

}  // namespace

void ConformalConfig::validate() const {
  check_alpha(alpha);
  require(z > 0.0 && std::isfinite(z), ErrorCode::invalid_argument, "z must be finite and positive");
  require(jitter >= 0.0 && std::isfinite(jitter), ErrorCode::invalid_argument, "jitter must be finite and >= 0");
}

std::size_t QField::infinite_count() const {
  return static_cast<std::size_t>(std::count_if(q.data().begin(), q.data().end(), [](double v) { return std::isinf(v); }));
}

std::size_t conformal_rank(std::size_t n, double alpha) {
  check_alpha(alpha);
  const double x = (1.0 - alpha) * static_cast<double>(n + 1);
  return static_cast<std::size_t>(std::ceil(x - 1e-9));
}

Tensor score_rp(const Tensor& y, const Tensor& mu, const Tensor& s) {
  check_same_shape(y, mu, "score_rp");
  check_same_shape(y, s, "score_rp");
  Tensor e(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    require(s[i] >= 0.0, ErrorCode::invalid_argument, "score_rp: negative spread");
    e[i] = s[i] > 0.0 ? std::abs(y[i] - mu[i]) / s[i] : kInf;
  }
  return e;
}

Tensor cq_score(const Tensor& y, const Tensor& lo, const Tensor& hi) {
  check_same_shape(y, lo, "cq_score");
  check_same_shape(y, hi, "cq_score");
  Tensor e(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) e[i] = std::max(lo[i] - y[i], y[i] - hi[i]);
  return e;
}

double conformal_quantile(std::span<const double> scores, double alpha) {
  require(!scores.empty(), ErrorCode::invalid_argument, "conformal_quantile: no scores");
  const std::size_t k = conformal_rank(scores.size(), alpha);
  if (k > scores.size()) return kInf;
  std::vector<double> v(scores.begin(), scores.end());
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k - 1), v.end());
  return v[k - 1];
}

QField calibrate_scores(const Tensor& scores, const GridSpec& grid, const ConformalConfig& config, ScoreKind kind) {
  config.validate();
  require(scores.rank() >= 1 && scores.dim(0) >= 1, ErrorCode::invalid_argument, "calibration set is empty");
  Shape want{scores.dim(0)};
  for (std::size_t r : grid.resolution) want.push_back(r);
  require(scores.shape() == want, ErrorCode::grid_mismatch,
          "calibration scores " + shape_string(scores.shape()) + " do not lie on grid " + grid.describe());
  const std::size_t n = scores.dim(0), P = grid.points();
  QField f{Tensor(grid.shape()), grid, config.alpha, config.z, kind};
  parallel_for(P, std::max<std::size_t>(1, config.workers), [&](std::size_t j) {
    SeededRng rng(config.seed, 0x6a6974746572);
    SeededRng local = rng.derive(j);
    std::vector<double> column(n);
    for (std::size_t i = 0; i < n; ++i) column[i] = scores[i * P + j] + local.uniform(0.0, config.jitter);
    f.q[j] = conformal_quantile(column, config.alpha);
  });
  return f;
}

QField calibrate(const ensemble::RpEnsemble& ensemble, const Tensor& inputs, const Tensor& outputs,
                 const GridSpec& grid, const ConformalConfig& config) {
  require(ensemble.size() >= 1, ErrorCode::invalid_argument, "empty ensemble");
  require(ensemble.members[0].trainable.config().grid == grid, ErrorCode::grid_mismatch,
          "calibration grid " + grid.describe() + " differs from the training grid");
  check_grid_inputs(inputs, outputs, grid, "calibrate");
  const ensemble::Prediction p = ensemble::rp_predict(ensemble, inputs, grid);
  return calibrate_scores(score_rp(outputs, p.mean, p.spread), grid, config, ScoreKind::rp);
}

QField calibrate_cq(const ensemble::QuantilePair& pair, const Tensor& inputs, const Tensor& outputs,
                    const GridSpec& grid, const ConformalConfig& config) {
  require(pair.lo.config().grid == grid, ErrorCode::grid_mismatch,
          "calibration grid " + grid.describe() + " differs from the training grid");
  check_grid_inputs(inputs, outputs, grid, "calibrate_cq");
  return calibrate_scores(cq_score(outputs, pair.lo.predict(inputs, grid), pair.hi.predict(inputs, grid)), grid,
                          config, ScoreKind::cq);
}

Band band(const Tensor& mu, const Tensor& s, const Tensor& q, double z) {
  check_same_shape(mu, s, "band");
  batch_of(mu, q, "band");
  const std::size_t P = q.size();
  Band b{mu, mu};
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double qj = q[i % P];
    require(qj >= 0.0 && s[i] >= 0.0, ErrorCode::invalid_argument, "band: q and s must be >= 0");
    const double half = std::isinf(qj) ? kInf : z * qj * s[i];
    b.lower[i] = mu[i] - half;
    b.upper[i] = mu[i] + half;
  }
  return b;
}

Band cq_band(const Tensor& lo, const Tensor& hi, const Tensor& q) {
  check_same_shape(lo, hi, "cq_band");
  batch_of(lo, q, "cq_band");
  const std::size_t P = q.size();
  Band b{lo, hi};
  for (std::size_t i = 0; i < lo.size(); ++i) {
    b.lower[i] = lo[i] - q[i % P];
    b.upper[i] = hi[i] + q[i % P];
  }
  return b;
}

CoverageReport coverage_eval(const Band& bands, const Tensor& truths, double target) {
  check_same_shape(bands.lower, truths, "coverage_eval");
  check_same_shape(bands.upper, truths, "coverage_eval");
  require(truths.rank() >= 2 && truths.dim(0) >= 1, ErrorCode::invalid_argument,
          "coverage_eval needs at least one test sample");
  const std::size_t B = truths.dim(0), P = truths.size() / B;
  CoverageReport r;
  r.target = target;
  r.samples = B;
  r.coverage.assign(P, 0.0);
  for (std::size_t j = 0; j < P; ++j) {
    std::size_t hit = 0;
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t i = b * P + j;
      hit += bands.lower[i] <= truths[i] && truths[i] <= bands.upper[i];
    }
    r.coverage[j] = 100.0 * static_cast<double>(hit) / static_cast<double>(B);
  }
  double total = 0.0;
  r.min = r.coverage[0];
  r.max = r.coverage[0];
  for (double c : r.coverage) {
    total += c;
    r.min = std::min(r.min, c);
    r.max = std::max(r.max, c);
    if (c < target - 1e-9)
      ++r.below;
    else
      ++r.at_or_above;
  }
  r.average = total / static_cast<double>(P);
  return r;
}

double nmse_percent(const Tensor& prediction, const Tensor& truth) {
  check_same_shape(prediction, truth, "nmse_percent");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    num += (truth[i] - prediction[i]) * (truth[i] - prediction[i]);
    den += truth[i] * truth[i];
  }
  require(den > 0.0, ErrorCode::invalid_argument, "nmse_percent: truth is identically zero");
  return 100.0 * num / den;
}

void save_qfield(const std::string& path, const QField& f) {
  BinaryWriter w(path);
  w.magic(kMagic);
  w.u32(kVersion);
  w.u8(static_cast<std::uint8_t>(f.kind));
  write_grid(w, f.grid);
  w.f64(f.alpha);
  w.f64(f.z);
  w.record("q", f.q);
  w.close();
}

QField load_qfield(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic(kMagic);
  require(r.u32() == kVersion, ErrorCode::io, path + ": unsupported q-field version");
  QField f;
  const std::uint8_t kind = r.u8();
  require(kind == 1 || kind == 2, ErrorCode::io, path + ": unknown score kind");
  f.kind = static_cast<ScoreKind>(kind);
  f.grid = read_grid(r);
  f.alpha = r.f64();
  f.z = r.f64();
  f.q = r.record("q");
  require(f.q.shape() == f.grid.shape(), ErrorCode::io, path + ": q shape does not match its grid");
  require(r.at_end(), ErrorCode::io, path + ": trailing bytes");
  return f;
}

void write_coverage_csv(const std::string& path, const std::vector<NamedReport>& reports, const GridSpec& grid) {
  require(!reports.empty(), ErrorCode::invalid_argument, "no coverage reports to write");
  const std::size_t P = grid.points();
  for (const auto& nr : reports)
    require(nr.report.coverage.size() == P, ErrorCode::shape_mismatch, "coverage report does not match the grid");
  std::ofstream out(path);
  require(bool(out), ErrorCode::io, "cannot write " + path);
  const std::string t = format_double(reports[0].report.target);
  out << "model,average,min,max,count_below_" << t << ",count_at_or_above_" << t << ",nmse_percent\n";
  for (const auto& nr : reports) {
    const auto& r = nr.report;
    out << nr.model << ',' << format_double(r.average) << ',' << format_double(r.min) << ',' << format_double(r.max)
        << ',' << r.below << ',' << r.at_or_above << ',' << (nr.nmse >= 0.0 ? format_double(nr.nmse) : "") << '\n';
  }
  out << "\nlocation";
  static const char* axes[] = {"x", "y"};
  for (std::size_t d = 0; d < grid.dims(); ++d) out << ',' << axes[d];
  for (const auto& nr : reports) out << ',' << nr.model << ',' << nr.model << "_flag";
  out << '\n';
  const Tensor coords = normalized_coordinates(grid);
  for (std::size_t j = 0; j < P; ++j) {
    out << j;
    for (std::size_t d = 0; d < grid.dims(); ++d) out << ',' << format_double(coords[j * grid.dims() + d]);
    for (const auto& nr : reports) {
      const double c = nr.report.coverage[j];
      out << ',' << format_double(c) << ',' << (c < nr.report.target - 1e-9 ? "below" : "ok");
    }
    out << '\n';
  }
  require(bool(out), ErrorCode::io, "write failed: " + path);
}

}  // namespace opcert::conformal
