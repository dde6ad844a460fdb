#include "opcert/cli/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>

#include "opcert/cli/run_config.hpp"
#include "opcert/conformal/scp.hpp"
#include "opcert/datagen/dataset.hpp"
#include "opcert/ensemble/quantile.hpp"
#include "opcert/ensemble/rp.hpp"
#include "opcert/gp/gp.hpp"

namespace opcert::cli {

namespace fs = std::filesystem;

int exit_code_for(ErrorCode code, const std::string& command) {
  switch (code) {
    case ErrorCode::config:
    case ErrorCode::invalid_argument:
    case ErrorCode::decomposition_depth:
      return exit_config;
    case ErrorCode::io:
      return exit_io;
    case ErrorCode::numerical:
      return command == "superres" ? exit_gp : exit_nan;
    case ErrorCode::grid_mismatch:
    case ErrorCode::shape_mismatch:
    case ErrorCode::invalid_grid:
      return exit_mismatch;
    case ErrorCode::not_positive_definite:
      return exit_gp;
    case ErrorCode::not_spiking:
      return exit_not_spiking;
    default:
      return exit_failure;
  }
}

namespace {

constexpr const char* kRunFile = "run.txt";

RunConfig with_overrides(RunConfig c, const Overrides& o) {
  if (o.seed) c.set_seed(*o.seed);
  if (o.threads) c.threads = *o.threads;
  return c;
}

RunConfig load_run(const std::string& ckpt, const Overrides& o) {
  const fs::path p = fs::path(ckpt) / kRunFile;
  require(fs::exists(p), ErrorCode::io, "no " + std::string(kRunFile) + " in checkpoint " + ckpt);
  RunConfig c = RunConfig::load(p.string());
  if (o.threads) c.threads = *o.threads;
  return c;
}

datagen::Dataset load_split(const std::string& dir, const char* name) {
  const fs::path p = fs::path(dir) / (std::string(name) + ".opd");
  require(fs::exists(p), ErrorCode::io, "missing dataset file " + p.string());
  return datagen::load_dataset(p.string());
}

std::string fmt(double v, int digits = 2) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

void print_row(std::ostream& out, const conformal::NamedReport& r) {
  out << std::left << std::setw(10) << r.model << " average " << fmt(r.report.average) << "  min "
      << fmt(r.report.min) << "  max " << fmt(r.report.max) << "  <" << fmt(r.report.target, 0) << "%: "
      << r.report.below << "  >=" << fmt(r.report.target, 0) << "%: " << r.report.at_or_above;
  if (r.nmse >= 0.0) out << "  nmse% " << fmt(r.nmse, 4);
  out << '\n';
}

bool is_quantile(const RunConfig& c) { return c.model == ModelKind::q_wno; }

/// Reports for the uncalibrated and the calibrated model on `data`.
std::vector<conformal::NamedReport> coverage_rows(const RunConfig& run, const std::string& ckpt,
                                                  const conformal::QField& q, const datagen::Dataset& data) {
  require(q.grid == data.grid, ErrorCode::grid_mismatch,
          "q-field grid " + q.grid.describe() + " differs from the data grid " + data.grid.describe());
  const double target = (1.0 - q.alpha) * 100.0;
  std::vector<conformal::NamedReport> rows;
  if (is_quantile(run)) {
    require(q.kind == conformal::ScoreKind::cq, ErrorCode::grid_mismatch, "q-field was not built with the CQ score");
    const ensemble::QuantilePair pair = ensemble::load_quantile_pair(ckpt);
    const Tensor lo = pair.lo.predict(data.inputs, data.grid), hi = pair.hi.predict(data.inputs, data.grid);
    rows.push_back({model_label(run.model), conformal::coverage_eval(ensemble::Band{lo, hi}, data.outputs, target)});
    rows.push_back(
        {calibrated_label(run.model), conformal::coverage_eval(conformal::cq_band(lo, hi, q.q), data.outputs, target)});
  } else {
    require(q.kind == conformal::ScoreKind::rp, ErrorCode::grid_mismatch, "q-field was not built with the RP score");
    const ensemble::RpEnsemble e = ensemble::load_ensemble(ckpt);
    const ensemble::Prediction p = ensemble::rp_predict(e, data.inputs, data.grid);
    const double nmse = conformal::nmse_percent(p.mean, data.outputs);
    rows.push_back({model_label(run.model),
                    conformal::coverage_eval(ensemble::initial_band(p.mean, p.spread, run.z_initial), data.outputs, target),
                    nmse});
    rows.push_back({calibrated_label(run.model),
                    conformal::coverage_eval(conformal::band(p.mean, p.spread, q.q, q.z), data.outputs, target), nmse});
  }
  return rows;
}

}  // namespace

void cmd_generate_data(const std::string& config, const std::string& out_dir, const Overrides& o, std::ostream& out) {
  const RunConfig c = with_overrides(RunConfig::load(config), o);
  datagen::make_dataset(c.data, out_dir, c.workers());
  out << "wrote " << datagen::kind_name(c.data.kind) << " dataset (" << c.data.train << "/" << c.data.calibration
      << "/" << c.data.test << ") to " << out_dir << '\n';
}

void cmd_train(const std::string& config, const std::string& data_dir, const std::string& ckpt, const Overrides& o,
               std::ostream& out) {
  const RunConfig c = with_overrides(RunConfig::load(config), o);
  const datagen::Dataset train = load_split(data_dir, "train");
  std::mutex log_mutex;
  const std::size_t every = std::max<std::size_t>(1, c.train.epochs / 10);
  auto log = [&](std::size_t member, std::size_t epoch, double loss) {
    if ((epoch + 1) % every != 0 && epoch + 1 != c.train.epochs) return;
    std::lock_guard<std::mutex> lock(log_mutex);
    out << "member " << member << " epoch " << epoch + 1 << " loss " << format_double(loss) << '\n';
  };
  // The run file goes last so a partial checkpoint is never mistaken for a complete one.
  std::error_code ec;
  fs::remove(fs::path(ckpt) / kRunFile, ec);
  if (is_quantile(c)) {
    const ensemble::QuantilePair pair =
        ensemble::train_quantile_pair(train.inputs, train.outputs, c.quantile(train.grid), log);
    ensemble::save_quantile_pair(ckpt, pair);
  } else {
    const ensemble::RpEnsemble e = ensemble::rp_train(train.inputs, train.outputs, c.rp(train.grid), log);
    ensemble::save_ensemble(ckpt, e);
  }
  c.describe().save((fs::path(ckpt) / kRunFile).string());
  out << "saved " << model_kind_name(c.model) << " checkpoint to " << ckpt << '\n';
}

void cmd_calibrate(const std::string& ckpt, const std::string& data_dir, std::optional<double> alpha,
                   const std::string& qfield, const Overrides& o, std::ostream& out) {
  RunConfig run = load_run(ckpt, o);
  if (alpha) run.alpha = *alpha;
  if (o.seed) run.seed = *o.seed;
  const conformal::ConformalConfig cfg = run.conformal();
  cfg.validate();
  const datagen::Dataset cal = load_split(data_dir, "calibration");
  const conformal::QField q =
      is_quantile(run)
          ? conformal::calibrate_cq(ensemble::load_quantile_pair(ckpt), cal.inputs, cal.outputs, cal.grid, cfg)
          : conformal::calibrate(ensemble::load_ensemble(ckpt), cal.inputs, cal.outputs, cal.grid, cfg);
  conformal::save_qfield(qfield, q);
  std::vector<double> v(q.q.data().begin(), q.q.data().end());
  std::sort(v.begin(), v.end());
  const double median = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
  out << "q over " << v.size() << " locations from " << cal.size() << " samples: min " << format_double(v.front())
      << " median " << format_double(median) << " max " << format_double(v.back()) << " infinite "
      << q.infinite_count() << '\n';
}

void cmd_evaluate(const std::string& ckpt, const std::string& qfield, const std::string& data_dir,
                  const std::string& report, const Overrides& o, std::ostream& out) {
  const RunConfig run = load_run(ckpt, o);
  const conformal::QField q = conformal::load_qfield(qfield);
  const datagen::Dataset test = load_split(data_dir, "test");
  const auto rows = coverage_rows(run, ckpt, q, test);
  conformal::write_coverage_csv(report, rows, test.grid);
  for (const auto& r : rows) print_row(out, r);
}

void cmd_superres(const std::string& ckpt, const std::string& qfield, const std::string& data_hi_dir,
                  const std::string& report, const std::string& qfield_out, const Overrides& o, std::ostream& out) {
  const RunConfig run = load_run(ckpt, o);
  const conformal::QField q = conformal::load_qfield(qfield);
  const bool has_hi = fs::exists(fs::path(data_hi_dir) / "test_hi.opd");
  const datagen::Dataset hi = load_split(data_hi_dir, has_hi ? "test_hi" : "test");
  gp::GpFitOptions opt = run.gp;
  opt.seed = run.seed;
  opt.workers = run.workers();
  gp::SuperresInfo info;
  const conformal::QField qhi = gp::superres_q(q, hi.grid, opt, &info);
  if (!qfield_out.empty()) conformal::save_qfield(qfield_out, qhi);
  out << "GP on " << info.used << " locations (stride " << info.stride << ", " << info.excluded
      << " infinite excluded): variance " << format_double(info.params.variance) << " length "
      << format_double(info.params.length) << " shape " << format_double(info.params.shape) << '\n';
  const auto rows = coverage_rows(run, ckpt, qhi, hi);
  conformal::write_coverage_csv(report, rows, hi.grid);
  for (const auto& r : rows) print_row(out, r);
}

void cmd_spiking_report(const std::string& ckpt, const std::string& data_dir, const std::string& report,
                        const Overrides& o, std::ostream& out) {
  const RunConfig run = load_run(ckpt, o);
  require(run.model == ModelKind::rp_vswno, ErrorCode::not_spiking,
          "checkpoint holds a " + model_kind_name(run.model) + " model without spiking neurons");
  const ensemble::RpEnsemble e = ensemble::load_ensemble(ckpt);
  const datagen::Dataset test = load_split(data_dir, "test");
  std::vector<double> mean;
  for (const auto& m : e.members) {
    const std::vector<double> a = neuralop::spiking_activity(m.trainable, test.inputs, test.grid);
    if (mean.empty()) mean.assign(a.size(), 0.0);
    for (std::size_t s = 0; s < a.size(); ++s) mean[s] += a[s] / static_cast<double>(e.size());
  }
  std::ofstream csv(report);
  require(bool(csv), ErrorCode::io, "cannot write " + report);
  csv << "site,activity_percent\n";
  double total = 0.0;
  for (std::size_t s = 0; s < mean.size(); ++s) {
    csv << "vsn" << s + 1 << ',' << format_double(mean[s]) << '\n';
    out << "VSN " << s + 1 << ": " << fmt(mean[s]) << "%\n";
    total += mean[s] / static_cast<double>(mean.size());
  }
  csv << "total," << format_double(total) << '\n';
  require(bool(csv), ErrorCode::io, "write failed: " + report);
  out << "total: " << fmt(total) << "%\n";
}

}  // namespace opcert::cli
