#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "opcert/autodiff/ops.hpp"
#include "opcert/autodiff/tape.hpp"
#include "opcert/core/grid.hpp"
#include "opcert/core/rng.hpp"
#include "opcert/wavelet/dwt.hpp"

namespace opcert::neuralop {

enum class Activation {
  gelu,
  vsn,
  identity,  ///< linear network, used for testing
};

Activation parse_activation(const std::string& name);
std::string activation_name(Activation a);

struct VsnSettings {
  std::size_t steps = 1;
  double slope = 10.0;
  double leak_init = 0.9;
  double threshold_init = 0.1;
  ad::SpikeMode mode = ad::SpikeMode::hard;
};

struct WnoConfig {
  std::size_t width = 16;
  std::size_t layers = 4;
  std::size_t levels = 3;
  wavelet::Family family = wavelet::Family::db6;
  Activation activation = Activation::gelu;
  GridSpec grid;
  std::size_t proj_hidden = 64;
  VsnSettings vsn;
  /// Zero-mean unit-variance scaling of input and output fields.
  bool normalize = false;

  /// Function value plus one coordinate channel per grid dimension.
  std::size_t in_channels() const { return 1 + grid.dims(); }
  void validate() const;

  /// log2(n) - 4, at least 1.
  static std::size_t default_levels(std::size_t n);
};

struct Normalization {
  double in_mean = 0.0;
  double in_std = 1.0;
  double out_mean = 0.0;
  double out_std = 1.0;

  Tensor encode_input(const Tensor& u) const;
  Tensor encode_output(const Tensor& y) const;
  Tensor decode_output(const Tensor& y) const;
  bool operator==(const Normalization&) const = default;
};

Normalization fit_normalization(const Tensor& inputs, const Tensor& outputs);

/// Uplift -> L x sigma(W v + b + K v) -> two-layer projection, where
/// K v = idwt(R dwt(v)) with R mixing channels on the coarsest approximation.
class WnoModel {
 public:
  struct Graph {
    ad::Var output;               ///< [B, spatial...] in normalized output units
    std::vector<ad::Var> spikes;  ///< one per VSN site, empty for other activations
  };

  explicit WnoModel(WnoConfig config);  ///< all parameters zero
  WnoModel(WnoConfig config, SeededRng rng);

  const WnoConfig& config() const noexcept { return config_; }
  std::vector<ad::Parameter>& parameters() noexcept { return params_; }
  const std::vector<ad::Parameter>& parameters() const noexcept { return params_; }
  std::vector<ad::Parameter*> parameter_pointers();
  ad::Parameter& parameter(const std::string& name);
  const ad::Parameter& parameter(const std::string& name) const;
  std::size_t parameter_count() const;

  Normalization& normalization() noexcept { return norm_; }
  const Normalization& normalization() const noexcept { return norm_; }

  std::size_t vsn_sites() const { return config_.activation == Activation::vsn ? config_.layers : 0; }

  /// Wavelet levels on `grid`; refined or coarsened grids keep the trained
  /// approximation-block size. Raises grid_mismatch when impossible.
  std::size_t levels_for(const GridSpec& grid) const;

  /// inputs: raw fields [B, spatial...] on `grid`. Parameters enter as
  /// trainable tape leaves.
  Graph build(ad::Tape& tape, const Tensor& inputs, const GridSpec& grid);
  /// Same graph with parameters as constants.
  Graph build_constant(ad::Tape& tape, const Tensor& inputs, const GridSpec& grid) const;

  /// Network output in normalized units, evaluated in chunks.
  Tensor predict_normalized(const Tensor& inputs, const GridSpec& grid) const;
  /// Decoded prediction in physical units.
  Tensor predict(const Tensor& inputs, const GridSpec& grid) const;
  Tensor predict(const Tensor& inputs) const { return predict(inputs, config_.grid); }

 private:
  Graph build_impl(ad::Tape& tape, const Tensor& inputs, const GridSpec& grid,
                   const std::function<ad::Var(std::size_t)>& param) const;
  void add_parameter(std::string name, Shape shape);
  void check_inputs(const Tensor& inputs, const GridSpec& grid) const;

  WnoConfig config_;
  std::vector<ad::Parameter> params_;
  Normalization norm_;
};

/// Spike-rate percentage per VSN site: 100 x spikes / (neurons x steps x samples).
std::vector<double> spiking_activity(const WnoModel& model, const Tensor& inputs, const GridSpec& grid);

}  // namespace opcert::neuralop
