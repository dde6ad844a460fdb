#include "opcert/neuralop/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "opcert/core/error.hpp"

namespace opcert::neuralop {

void adam_step(const std::vector<ad::Parameter*>& params, AdamState& state, const AdamConfig& config) {
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.emplace_back(p->value.shape(), 0.0);
      state.v.emplace_back(p->value.shape(), 0.0);
    }
  }
  require(state.m.size() == params.size(), ErrorCode::shape_mismatch, "adam state does not match parameters");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    ad::Parameter& p = *params[k];
    check_same_shape(p.value, state.m[k], "adam_step");
    double* m = state.m[k].raw();
    double* v = state.v[k].raw();
    const double* g = p.grad.raw();
    double* x = p.value.raw();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      x[i] -= config.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config.epsilon);
    }
  }
}

namespace {

Tensor gather(const Tensor& x, const std::vector<std::size_t>& order, std::size_t begin, std::size_t count) {
  Shape s = x.shape();
  const std::size_t stride = x.size() / s[0];
  s[0] = count;
  Tensor out(s);
  for (std::size_t i = 0; i < count; ++i) std::copy_n(x.raw() + order[begin + i] * stride, stride, out.raw() + i * stride);
  return out;
}

}  // namespace

TrainResult train(WnoModel& model, const Tensor& inputs, const Tensor& targets, const LossConfig& loss,
                  const TrainConfig& config, const Tensor* offset, const EpochCallback& on_epoch) {
  loss.validate();
  require(inputs.rank() >= 2 && inputs.dim(0) >= 1, ErrorCode::invalid_argument, "training set is empty");
  check_same_shape(inputs, targets, "train");
  require(config.batch >= 1, ErrorCode::invalid_argument, "batch must be >= 1");
  require(config.lr > 0.0, ErrorCode::invalid_argument, "learning rate must be positive");
  if (loss.kind == LossKind::slf)
    require(model.vsn_sites() > 0, ErrorCode::not_spiking, "SLF loss needs a spiking model");

  Tensor goal = model.normalization().encode_output(targets);
  if (offset != nullptr) {
    check_same_shape(goal, *offset, "train offset");
    goal -= *offset;
  }

  const GridSpec grid = model.config().grid;
  const std::size_t n = inputs.dim(0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  SeededRng rng(config.seed, 0x747261696e);
  std::vector<ad::Parameter*> params = model.parameter_pointers();
  AdamState state;
  AdamConfig adam;
  adam.lr = config.lr;

  TrainResult result;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.lr_step > 0 && epoch > 0 && epoch % config.lr_step == 0) adam.lr *= config.lr_gamma;
    rng.shuffle(order);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < n; begin += config.batch) {
      const std::size_t count = std::min(config.batch, n - begin);
      const Tensor x = gather(inputs, order, begin, count);
      const Tensor y = gather(goal, order, begin, count);
      for (auto* p : params) p->zero_grad();
      ad::Tape tape;
      const auto g = model.build(tape, x, grid);
      const ad::Var l = training_loss(loss, g.output, y, g.spikes);
      const double value = l.value()[0];
      require(std::isfinite(value), ErrorCode::numerical,
              "non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(result.steps));
      tape.backward(l);
      adam_step(params, state, adam);
      total += value;
      ++batches;
      ++result.steps;
    }
    result.loss_trace.push_back(total / static_cast<double>(batches));
    if (on_epoch) on_epoch(epoch, result.loss_trace.back());
  }
  return result;
}

}  // namespace opcert::neuralop
