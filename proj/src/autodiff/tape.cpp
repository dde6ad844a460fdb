#include "opcert/autodiff/tape.hpp"

#include <string>

#include "opcert/core/error.hpp"

namespace opcert::ad {

Parameter::Parameter(std::string name_, Tensor value_)
    : name(std::move(name_)), value(std::move(value_)), grad(value.shape(), 0.0) {}

const char* to_string(OpKind kind) {
  switch (kind) {
    case OpKind::constant: return "constant";
    case OpKind::parameter: return "parameter";
    case OpKind::affine: return "affine";
    case OpKind::conv1x1: return "conv1x1";
    case OpKind::gelu: return "gelu";
    case OpKind::dwt: return "dwt";
    case OpKind::idwt: return "idwt";
    case OpKind::wavelet_scale: return "wavelet_scale";
    case OpKind::add: return "add";
    case OpKind::mul: return "mul";
    case OpKind::scale: return "scale";
    case OpKind::sum: return "sum";
    case OpKind::mse: return "mse";
    case OpKind::pinball: return "pinball";
    case OpKind::vsn: return "vsn";
    case OpKind::vsn_spikes: return "vsn_spikes";
    case OpKind::reshape: return "reshape";
  }
  return "unknown";
}

const Tensor& Var::value() const {
  require(tape_ != nullptr, ErrorCode::graph_construction, "use of an empty Var");
  return tape_->value(id_);
}

Var Tape::constant(Tensor value) {
  require(!consumed_, ErrorCode::graph_construction, "tape already consumed by backward");
  Node node;
  node.kind = OpKind::constant;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::parameter(Parameter& p) {
  require(!consumed_, ErrorCode::graph_construction, "tape already consumed by backward");
  require(p.grad.shape() == p.value.shape(), ErrorCode::graph_construction,
          "parameter '" + p.name + "' has a gradient of the wrong shape");
  Node node;
  node.kind = OpKind::parameter;
  node.value = p.value;
  node.needs_grad = true;
  node.param = &p;
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::record(OpKind kind, std::vector<int> inputs, Tensor value, BackwardFn backward) {
  require(!consumed_, ErrorCode::graph_construction, "tape already consumed by backward");
  Node node;
  node.kind = kind;
  for (int in : inputs) {
    require(in >= 0 && static_cast<std::size_t>(in) < nodes_.size(), ErrorCode::graph_construction,
            std::string("dangling input to ") + to_string(kind));
    node.needs_grad = node.needs_grad || nodes_[in].needs_grad;
  }
  node.inputs = std::move(inputs);
  node.value = std::move(value);
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Tensor& Tape::grad(int id) {
  Node& node = nodes_.at(id);
  if (node.grad.empty()) node.grad = Tensor(node.value.shape(), 0.0);
  return node.grad;
}

void Tape::check_owned(const Var& v, const char* op) const {
  require(v.tape() == this, ErrorCode::graph_construction,
          std::string(op) + ": operand belongs to a different tape");
}

void Tape::backward(Var loss) {
  check_owned(loss, "backward");
  require(!consumed_, ErrorCode::graph_construction, "tape already consumed by backward");
  const Tensor& out = value(loss.id());
  require(out.size() == 1, ErrorCode::non_scalar_loss,
          "backward needs a scalar loss, got shape " + shape_string(out.shape()));
  consumed_ = true;
  grad(loss.id())[0] = 1.0;
  for (int id = loss.id(); id >= 0; --id) {
    Node& node = nodes_[id];
    if (!node.needs_grad || node.grad.empty()) continue;
    if (node.param != nullptr) {
      node.param->grad += node.grad;
    } else if (node.backward) {
      node.backward(*this, id);
    }
  }
}

}  // namespace opcert::ad
