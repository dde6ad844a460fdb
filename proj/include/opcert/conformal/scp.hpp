#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "opcert/core/grid.hpp"
#include "opcert/ensemble/quantile.hpp"
#include "opcert/ensemble/rp.hpp"

namespace opcert::conformal {

using ensemble::Band;

struct ConformalConfig {
  double alpha = 0.05;
  double z = 1.0;         ///< band multiplier after calibration
  double jitter = 1e-9;   ///< ties are broken with U[0, jitter] added to scores
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  void validate() const;
};

enum class ScoreKind : std::uint8_t { rp = 1, cq = 2 };

/// Conformal parameter per grid location; entries may be +inf.
struct QField {
  Tensor q;  ///< shape equals grid.shape()
  GridSpec grid;
  double alpha = 0.05;
  double z = 1.0;
  ScoreKind kind = ScoreKind::rp;

  std::size_t infinite_count() const;
};

struct CoverageReport {
  std::vector<double> coverage;  ///< percent per location
  double average = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t below = 0;        ///< locations with coverage < target
  std::size_t at_or_above = 0;
  double target = 95.0;
  std::size_t samples = 0;
};

/// k = ceil((1 - alpha)(n + 1)), guarded against rounding in the product.
std::size_t conformal_rank(std::size_t n, double alpha);

/// |y - mu| / s elementwise; s = 0 gives +inf.
Tensor score_rp(const Tensor& y, const Tensor& mu, const Tensor& s);
/// max(lo - y, y - hi) elementwise.
Tensor cq_score(const Tensor& y, const Tensor& lo, const Tensor& hi);

/// k-th smallest of `scores` (k = conformal_rank); +inf when k > n.
double conformal_quantile(std::span<const double> scores, double alpha);

/// scores: [n, grid shape...]. Per location, adds jitter and takes the
/// conformal quantile over the n samples.
QField calibrate_scores(const Tensor& scores, const GridSpec& grid, const ConformalConfig& config,
                        ScoreKind kind = ScoreKind::rp);

/// Calibrates a randomized-prior ensemble on (inputs, outputs) sampled on `grid`.
QField calibrate(const ensemble::RpEnsemble& ensemble, const Tensor& inputs, const Tensor& outputs,
                 const GridSpec& grid, const ConformalConfig& config);
/// Calibrates a quantile pair with the CQ score.
QField calibrate_cq(const ensemble::QuantilePair& pair, const Tensor& inputs, const Tensor& outputs,
                    const GridSpec& grid, const ConformalConfig& config);

/// [mu - z q s, mu + z q s]. mu and s are either q-shaped or carry an extra
/// leading batch axis. q = +inf gives the whole real line.
Band band(const Tensor& mu, const Tensor& s, const Tensor& q, double z = 1.0);
/// [lo - q, hi + q] with the same broadcasting as band().
Band cq_band(const Tensor& lo, const Tensor& hi, const Tensor& q);

/// bands and truths: [B, spatial...]. Closed intervals.
CoverageReport coverage_eval(const Band& bands, const Tensor& truths, double target = 95.0);

/// 100 * sum ||y - mu||^2 / sum ||y||^2.
double nmse_percent(const Tensor& prediction, const Tensor& truth);

void save_qfield(const std::string& path, const QField& field);
QField load_qfield(const std::string& path);

struct NamedReport {
  std::string model;
  CoverageReport report;
  double nmse = -1.0;  ///< omitted from the CSV when negative
};

/// Summary block (one row per model, table columns Average, Min., Max.,
/// counts), a blank line, then one row per location with coordinates,
/// coverage and a below/ok flag for every model.
void write_coverage_csv(const std::string& path, const std::vector<NamedReport>& reports, const GridSpec& grid);

}  // namespace opcert::conformal
