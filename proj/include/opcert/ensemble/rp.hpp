#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "opcert/neuralop/loss.hpp"
#include "opcert/neuralop/train.hpp"
#include "opcert/neuralop/wno.hpp"

namespace opcert::ensemble {

/// Closed elementwise interval [lower, upper].
struct Band {
  Tensor lower;
  Tensor upper;
};

struct Prediction {
  Tensor mean;
  Tensor spread;  ///< population standard deviation across members
};

struct RpConfig {
  neuralop::WnoConfig model;
  /// Prior layer count; the prior otherwise copies `model` with GeLU activation.
  std::size_t prior_layers = 2;
  neuralop::LossConfig loss;
  neuralop::TrainConfig train;  ///< train.seed is replaced per member
  std::size_t members = 10;
  double prior_weight = 1.0;
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  void validate() const;
  neuralop::WnoConfig prior_config() const;
};

/// Trainable network plus a frozen random prior. Both share the member's
/// normalization; the output is decode(f(u) + prior_weight * p(u)).
struct RpMember {
  neuralop::WnoModel trainable;
  neuralop::WnoModel prior;
  double prior_weight = 1.0;
  std::uint64_t seed = 0;
  std::vector<double> loss_trace;

  Tensor predict(const Tensor& inputs, const GridSpec& grid) const;
  Tensor predict(const Tensor& inputs) const { return predict(inputs, trainable.config().grid); }
};

struct RpEnsemble {
  std::vector<RpMember> members;

  std::size_t size() const noexcept { return members.size(); }
};

/// Seed of member `index`; pairwise distinct for a given ensemble seed.
std::uint64_t member_seed(std::uint64_t ensemble_seed, std::size_t index);

/// FNV-1a over the raw bytes of every parameter value.
std::uint64_t parameter_hash(const neuralop::WnoModel& model);

using MemberEpochCallback = std::function<void(std::size_t member, std::size_t epoch, double loss)>;

/// Trains member `index` alone. Identical to the member trained by rp_train.
RpMember train_member(const Tensor& inputs, const Tensor& targets, const RpConfig& config, std::size_t index,
                      const MemberEpochCallback& on_epoch = {});

/// Trains config.members members on up to config.workers threads. A failing
/// member aborts the ensemble with its id in the message.
RpEnsemble rp_train(const Tensor& inputs, const Tensor& targets, const RpConfig& config,
                    const MemberEpochCallback& on_epoch = {});

/// Mean and population spread of equally shaped member outputs.
Prediction member_moments(std::span<const Tensor> outputs);
Prediction rp_predict(const RpEnsemble& ensemble, const Tensor& inputs, const GridSpec& grid);
Prediction rp_predict(const RpEnsemble& ensemble, const Tensor& inputs);

/// [mean - z s, mean + z s]; negative spread is an error.
Band initial_band(const Tensor& mean, const Tensor& spread, double z = 1.96);

/// Keeps the `keep` members with the lowest validation L2 loss, in rank order.
RpEnsemble select_best(const RpEnsemble& ensemble, const Tensor& inputs, const Tensor& targets, std::size_t keep);

/// Directory layout: manifest.txt plus member_<k>.opm and prior_<k>.opm.
void save_ensemble(const std::string& dir, const RpEnsemble& ensemble);
RpEnsemble load_ensemble(const std::string& dir);

}  // namespace opcert::ensemble
