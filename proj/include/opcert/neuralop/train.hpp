#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "opcert/autodiff/tape.hpp"
#include "opcert/neuralop/loss.hpp"
#include "opcert/neuralop/wno.hpp"

namespace opcert::neuralop {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::size_t step = 0;
};

/// One bias-corrected Adam update from the accumulated gradients.
void adam_step(const std::vector<ad::Parameter*>& params, AdamState& state, const AdamConfig& config);

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch = 20;
  double lr = 1e-3;
  /// Multiply the learning rate by lr_gamma every lr_step epochs; 0 disables.
  std::size_t lr_step = 0;
  double lr_gamma = 0.5;
  std::uint64_t seed = 0;
};

struct TrainResult {
  std::vector<double> loss_trace;  ///< mean batch loss per epoch
  std::size_t steps = 0;
};

using EpochCallback = std::function<void(std::size_t epoch, double loss)>;

/// Fits `model` to targets (physical units). `offset` is subtracted from the
/// normalized targets before fitting; it carries the scaled prior output of
/// a randomized-prior member. Aborts with ErrorCode::numerical on a
/// non-finite loss.
TrainResult train(WnoModel& model, const Tensor& inputs, const Tensor& targets, const LossConfig& loss,
                  const TrainConfig& config, const Tensor* offset = nullptr, const EpochCallback& on_epoch = {});

}  // namespace opcert::neuralop
