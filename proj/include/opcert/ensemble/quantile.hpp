#pragma once

#include <string>

#include "opcert/ensemble/rp.hpp"

namespace opcert::ensemble {

/// Lower and upper quantile networks trained with the pinball loss at
/// eta = alpha/2 and 1 - alpha/2.
struct QuantilePair {
  neuralop::WnoModel lo;
  neuralop::WnoModel hi;
  double alpha = 0.05;
};

struct QuantileConfig {
  neuralop::WnoConfig model;
  neuralop::TrainConfig train;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

QuantilePair train_quantile_pair(const Tensor& inputs, const Tensor& targets, const QuantileConfig& config,
                                 const MemberEpochCallback& on_epoch = {});

/// Directory layout: manifest.txt plus lo.opm and hi.opm.
void save_quantile_pair(const std::string& dir, const QuantilePair& pair);
QuantilePair load_quantile_pair(const std::string& dir);

}  // namespace opcert::ensemble
