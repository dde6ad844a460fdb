#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "opcert/core/tensor.hpp"

namespace opcert::ad {

/// Trainable tensor with its gradient accumulator (same shape).
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string name, Tensor value);

  void zero_grad() { grad.fill(0.0); }
};

enum class OpKind {
  constant,
  parameter,
  affine,
  conv1x1,
  gelu,
  dwt,
  idwt,
  wavelet_scale,
  add,
  mul,
  scale,
  sum,
  mse,
  pinball,
  vsn,
  vsn_spikes,
  reshape,
};

const char* to_string(OpKind kind);

class Tape;

/// Handle to a node on a tape.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  int id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so the node
/// list is already a topological order; backward visits it once in reverse.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var parameter(Parameter& p);

  /// Appends an op node. `backward` reads grad(self) and accumulates into
  /// its inputs' gradients; it only runs when some input needs a gradient.
  Var record(OpKind kind, std::vector<int> inputs, Tensor value, BackwardFn backward);

  const Tensor& value(int id) const { return nodes_.at(id).value; }
  /// Gradient buffer of a node, zero-initialised on first access.
  Tensor& grad(int id);
  bool needs_grad(int id) const { return nodes_.at(id).needs_grad; }
  OpKind kind(int id) const { return nodes_.at(id).kind; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Accumulates d(loss)/d(param) into every reachable Parameter::grad and
  /// consumes the tape.
  void backward(Var loss);
  bool consumed() const noexcept { return consumed_; }

  void check_owned(const Var& v, const char* op) const;

 private:
  struct Node {
    OpKind kind;
    std::vector<int> inputs;
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };

  std::deque<Node> nodes_;  // stable references across growth
  bool consumed_ = false;
};

}  // namespace opcert::ad
