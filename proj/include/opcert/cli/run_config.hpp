#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "opcert/core/keyvalue.hpp"
#include "opcert/datagen/dataset.hpp"
#include "opcert/ensemble/quantile.hpp"
#include "opcert/ensemble/rp.hpp"
#include "opcert/gp/gp.hpp"
#include "opcert/neuralop/wno.hpp"

namespace opcert::cli {

enum class ModelKind { rp_wno, rp_vswno, q_wno };

ModelKind parse_model_kind(const std::string& name);
std::string model_kind_name(ModelKind kind);
/// Table label of the uncalibrated model, e.g. "RP-WNO".
std::string model_label(ModelKind kind);
/// Table label after calibration, e.g. "CRP-WNO".
std::string calibrated_label(ModelKind kind);

/// Every knob of a run. All fields have defaults; `experiment = darcy`
/// switches the data and level defaults before other keys apply.
struct RunConfig {
  datagen::GenerationConfig data = datagen::GenerationConfig::burgers_desk();
  ModelKind model = ModelKind::rp_wno;
  std::size_t members = 5;
  double prior_weight = 1.0;
  std::size_t prior_layers = 2;

  std::size_t width = 16;
  std::size_t layers = 4;
  std::size_t levels = 0;  ///< 0 picks log2(n) - 4
  wavelet::Family family = wavelet::Family::db6;
  std::size_t proj_hidden = 64;
  bool normalize = true;
  neuralop::VsnSettings vsn;

  neuralop::TrainConfig train;
  neuralop::LossKind loss = neuralop::LossKind::l2;
  double slf_alpha = 1.0;
  double slf_beta = 0.0;

  double alpha = 0.05;
  double z_initial = 1.96;
  double jitter = 1e-9;

  gp::GpFitOptions gp;

  std::uint64_t seed = 0;
  std::size_t threads = 0;  ///< 0 uses the OPCERT_THREADS or hardware default

  static RunConfig from_keyvalues(const KeyValues& kv);
  static RunConfig load(const std::string& path);
  /// Fully resolved configuration, parseable by from_keyvalues.
  KeyValues describe() const;
  void validate() const;
  void set_seed(std::uint64_t s);

  std::size_t workers() const;
  neuralop::WnoConfig network(const GridSpec& grid) const;
  ensemble::RpConfig rp(const GridSpec& grid) const;
  ensemble::QuantileConfig quantile(const GridSpec& grid) const;
  conformal::ConformalConfig conformal() const;
};

}  // namespace opcert::cli
