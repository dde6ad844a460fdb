#pragma once

#include <string>
#include <vector>

#include "opcert/autodiff/ops.hpp"

namespace opcert::neuralop {

enum class LossKind { l2, pinball, slf };

LossKind parse_loss_kind(const std::string& name);

struct LossConfig {
  LossKind kind = LossKind::l2;
  double eta = 0.5;      ///< pinball quantile
  double alpha_w = 1.0;  ///< SLF weight on the vanilla loss
  double beta_w = 0.0;   ///< SLF weight on spiking activity

  void validate() const;
};

ad::Var loss_l2(ad::Var prediction, const Tensor& truth);
ad::Var loss_pinball(ad::Var prediction, const Tensor& truth, double eta);
ad::Var loss_slf(ad::Var base_loss, ad::Var spike_ratio, double alpha_w, double beta_w);
/// Total spikes over total possible spikes across all sites.
ad::Var spike_ratio(const std::vector<ad::Var>& spikes);

/// Loss selected by `config` for a network output and its spike sites.
ad::Var training_loss(const LossConfig& config, ad::Var prediction, const Tensor& truth,
                      const std::vector<ad::Var>& spikes);

/// Scalar versions for evaluation.
double l2_value(const Tensor& prediction, const Tensor& truth);
double pinball_value(const Tensor& prediction, const Tensor& truth, double eta);

}  // namespace opcert::neuralop
