#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "agos/errors.hpp"
#include "agos/tensor.hpp"

namespace agos {

enum class OpKind : uint8_t {
  Leaf,
  Conv2d,
  Conv1x1,
  AbsDiff,
  GlobalAvgPool,
  Softmax,
  CrossEntropy,
  Dropout,
  Relu,
  Add,
  Scale,
  Sum,
  SumSquares,
};

// Reverse-mode autodiff over an append-only list of nodes. Each op records its
// output value, the ids of its inputs, and a closure that scatters the output
// gradient back to the input gradients. backward() walks the list once in
// strict reverse order, so every recorded node runs after all of its users.
template <typename T>
class Tape {
 public:
  struct Var {
    int32_t id = -1;
  };

  // Leaves hold externally supplied values (parameters, batch inputs). All
  // leaf values must be finite; NaN/Inf here poisons everything downstream.
  Var leaf(Tensor<T> value, bool requires_grad) {
    if (!value.all_finite()) throw NumericError("non-finite values in tensor leaf");
    return push(OpKind::Leaf, {}, std::move(value), nullptr, requires_grad);
  }

  Var emplace(OpKind op, std::vector<int32_t> inputs, Tensor<T> value,
              std::function<void(Tape&)> backward_fn, bool requires_grad) {
    return push(op, std::move(inputs), std::move(value), std::move(backward_fn), requires_grad);
  }

  bool requires_grad(Var v) const { return node(v.id).requires_grad; }

  // Ops attach their backward closure after emplace so the closure can
  // capture the id of the node it belongs to.
  void set_backward(Var v, std::function<void(Tape&)> fn) {
    node(v.id).backward_fn = std::move(fn);
  }

  const Tensor<T>& value(Var v) const { return node(v.id).value; }
  const Tensor<T>& value(int32_t id) const { return node(id).value; }

  // Gradient of the last backward() target w.r.t. this node.
  const Tensor<T>& grad(Var v) const { return node(v.id).grad; }

  std::vector<T>& grad_data(int32_t id) { return node(id).grad.v; }

  // Accumulates d(loss)/d(node) into every node reachable from `loss`.
  // The tape is single-shot: values are retained but a second backward pass
  // would double-accumulate, so it is rejected until clear().
  void backward(Var loss) {
    if (consumed_) throw std::logic_error("tape already consumed by a previous backward pass");
    Node& top = node(loss.id);
    if (top.value.numel() != 1)
      throw UsageError("backward target must be scalar, got shape " + top.value.shape.str());
    consumed_ = true;
    top.grad.v[0] = T(1);
    for (int32_t id = loss.id; id >= 0; --id) {
      Node& nd = nodes_[static_cast<size_t>(id)];
      if (nd.requires_grad && nd.backward_fn) nd.backward_fn(*this);
    }
  }

  void clear() {
    nodes_.clear();
    consumed_ = false;
  }

  size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

 private:
  struct Node {
    OpKind op;
    std::vector<int32_t> inputs;
    Tensor<T> value;
    Tensor<T> grad;
    std::function<void(Tape&)> backward_fn;
    bool requires_grad;
  };

  Var push(OpKind op, std::vector<int32_t> inputs, Tensor<T> value,
           std::function<void(Tape&)> backward_fn, bool requires_grad) {
    Node nd;
    nd.op = op;
    nd.inputs = std::move(inputs);
    nd.grad = Tensor<T>(value.shape);
    nd.value = std::move(value);
    nd.backward_fn = std::move(backward_fn);
    nd.requires_grad = requires_grad;
    nodes_.push_back(std::move(nd));
    return Var{static_cast<int32_t>(nodes_.size() - 1)};
  }

  Node& node(int32_t id) {
    if (id < 0 || id >= static_cast<int32_t>(nodes_.size()))
      throw std::logic_error("tape id out of range");
    return nodes_[static_cast<size_t>(id)];
  }
  const Node& node(int32_t id) const {
    if (id < 0 || id >= static_cast<int32_t>(nodes_.size()))
      throw std::logic_error("tape id out of range");
    return nodes_[static_cast<size_t>(id)];
  }

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

template <typename T>
using Var = typename Tape<T>::Var;

}  // namespace agos
