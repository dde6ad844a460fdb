#include "opcert/neuralop/loss.hpp"

#include <cmath>

#include "opcert/core/error.hpp"

namespace opcert::neuralop {

LossKind parse_loss_kind(const std::string& name) {
  if (name == "l2") return LossKind::l2;
  if (name == "pinball") return LossKind::pinball;
  if (name == "slf") return LossKind::slf;
  fail(ErrorCode::config, "unknown loss '" + name + "' (expected l2, pinball or slf)");
}

void LossConfig::validate() const {
  require(eta > 0.0 && eta < 1.0, ErrorCode::invalid_argument, "pinball eta must lie in (0, 1)");
  require(alpha_w >= 0.0 && beta_w >= 0.0, ErrorCode::invalid_argument, "SLF weights must be non-negative");
}

ad::Var loss_l2(ad::Var prediction, const Tensor& truth) { return ad::mse(prediction, truth); }

ad::Var loss_pinball(ad::Var prediction, const Tensor& truth, double eta) {
  return ad::pinball(prediction, truth, eta);
}

ad::Var loss_slf(ad::Var base_loss, ad::Var spike_ratio, double alpha_w, double beta_w) {
  require(alpha_w >= 0.0 && beta_w >= 0.0, ErrorCode::invalid_argument, "SLF weights must be non-negative");
  if (beta_w == 0.0 && alpha_w == 1.0) return base_loss;
  return ad::add(ad::scale(base_loss, alpha_w), ad::scale(spike_ratio, beta_w));
}

ad::Var spike_ratio(const std::vector<ad::Var>& spikes) {
  require(!spikes.empty(), ErrorCode::not_spiking, "spike ratio needs at least one spiking site");
  ad::Var total = ad::sum(spikes[0]);
  double possible = static_cast<double>(spikes[0].value().size());
  for (std::size_t i = 1; i < spikes.size(); ++i) {
    total = ad::add(total, ad::sum(spikes[i]));
    possible += static_cast<double>(spikes[i].value().size());
  }
  return ad::scale(total, 1.0 / possible);
}

ad::Var training_loss(const LossConfig& config, ad::Var prediction, const Tensor& truth,
                      const std::vector<ad::Var>& spikes) {
  switch (config.kind) {
    case LossKind::l2:
      return loss_l2(prediction, truth);
    case LossKind::pinball:
      return loss_pinball(prediction, truth, config.eta);
    case LossKind::slf:
      return loss_slf(loss_l2(prediction, truth), spike_ratio(spikes), config.alpha_w, config.beta_w);
  }
  fail(ErrorCode::invalid_argument, "unknown loss kind");
}

double l2_value(const Tensor& prediction, const Tensor& truth) {
  check_same_shape(prediction, truth, "l2_value");
  const Tensor r = prediction - truth;
  return dot(r, r) / static_cast<double>(r.size());
}

double pinball_value(const Tensor& prediction, const Tensor& truth, double eta) {
  ad::Tape tape;
  return loss_pinball(tape.constant(prediction), truth, eta).value()[0];
}

}  // namespace opcert::neuralop
