#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "agos/tape.hpp"
#include "agos/tensor.hpp"

namespace agos {

// Named parameter tensors, ordered by name so every iteration (init, Adam
// updates, checkpointing) is deterministic. Names follow
// "<module>.<layer>.weight|bias"; the weight-decay set is exactly the
// ".weight" entries.
template <typename T>
class ParamStore {
 public:
  Tensor<T>& add(const std::string& name, Tensor<T> t) {
    auto [it, inserted] = params_.emplace(name, std::move(t));
    if (!inserted) throw UsageError("duplicate parameter name: " + name);
    return it->second;
  }

  bool has(const std::string& name) const { return params_.count(name) != 0; }

  Tensor<T>& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw UsageError("unknown parameter: " + name);
    return it->second;
  }
  const Tensor<T>& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw UsageError("unknown parameter: " + name);
    return it->second;
  }

  std::map<std::string, Tensor<T>>& all() { return params_; }
  const std::map<std::string, Tensor<T>>& all() const { return params_; }

  size_t size() const { return params_.size(); }

  static bool is_weight(const std::string& name) {
    return name.size() >= 7 && name.compare(name.size() - 7, 7, ".weight") == 0;
  }

 private:
  std::map<std::string, Tensor<T>> params_;
};

// Bridges a ParamStore into one tape pass: the first use of a parameter lifts
// it onto the tape as a grad-requiring leaf, later uses reuse the same leaf
// (tied weights fall out of this for free). After backward, gradients are
// read back per name.
template <typename T>
class ParamBinding {
 public:
  ParamBinding(Tape<T>& tape, const ParamStore<T>& store) : tape_(tape), store_(store) {}

  Var<T> use(const std::string& name) {
    for (auto& [n, v] : used_)
      if (n == name) return v;
    Var<T> v = tape_.leaf(store_.at(name), /*requires_grad=*/true);
    used_.emplace_back(name, v);
    return v;
  }

  const std::vector<std::pair<std::string, Var<T>>>& used() const { return used_; }

  // Gradient for a used parameter; zero tensor for one the forward never
  // touched (it is unreachable from the loss).
  Tensor<T> grad(const std::string& name) const {
    for (auto& [n, v] : used_)
      if (n == name) return tape_.grad(v);
    return Tensor<T>(store_.at(name).shape);
  }

 private:
  Tape<T>& tape_;
  const ParamStore<T>& store_;
  std::vector<std::pair<std::string, Var<T>>> used_;
};

}  // namespace agos
