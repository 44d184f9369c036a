#pragma once

#include <cmath>
#include <map>
#include <string>

#include "agos/params.hpp"
#include "agos/tensor.hpp"

namespace agos {

// Step-decayed learning rate: lr0 * factor^floor(epoch / every).
inline double lr_schedule(double lr0, double factor, int every, int epoch) {
  if (every <= 0) throw UsageError("lr_schedule: decay interval must be positive");
  if (epoch < 0) throw UsageError("lr_schedule: epoch must be >= 0");
  return lr0 * std::pow(factor, static_cast<double>(epoch / every));
}

// Adam with bias correction. Moments live in the parameter's precision but
// the update math runs in double. When decay_in_grad > 0 the weight-decay
// gradient 2*lambda*w is added to ".weight" gradients before the moment
// update (the alternative to carrying the penalty inside the loss).
template <typename T>
struct AdamState {
  std::map<std::string, Tensor<T>> m, v;
  int64_t step = 0;

  void init(const ParamStore<T>& params) {
    m.clear();
    v.clear();
    step = 0;
    for (const auto& [name, t] : params.all()) {
      m.emplace(name, Tensor<T>(t.shape));
      v.emplace(name, Tensor<T>(t.shape));
    }
  }
};

template <typename T>
void adam_step(ParamStore<T>& params, const std::map<std::string, Tensor<T>>& grads,
               AdamState<T>& state, double lr, double beta1, double beta2, double eps,
               double decay_in_grad = 0.0) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));

  for (auto& [name, p] : params.all()) {
    auto git = grads.find(name);
    if (git == grads.end()) throw UsageError("adam_step: missing gradient for " + name);
    const Tensor<T>& g = git->second;
    if (!(g.shape == p.shape)) throw UsageError("adam_step: gradient shape mismatch for " + name);
    Tensor<T>& m = state.m.at(name);
    Tensor<T>& v = state.v.at(name);
    const bool decay = decay_in_grad > 0.0 && ParamStore<T>::is_weight(name);

    for (size_t i = 0; i < p.v.size(); ++i) {
      double gi = static_cast<double>(g.v[i]);
      if (decay) gi += 2.0 * decay_in_grad * static_cast<double>(p.v[i]);
      double mi = beta1 * static_cast<double>(m.v[i]) + (1.0 - beta1) * gi;
      double vi = beta2 * static_cast<double>(v.v[i]) + (1.0 - beta2) * gi * gi;
      m.v[i] = static_cast<T>(mi);
      v.v[i] = static_cast<T>(vi);
      double update = lr * (mi / bc1) / (std::sqrt(vi / bc2) + eps);
      p.v[i] = static_cast<T>(static_cast<double>(p.v[i]) - update);
    }
  }
}

}  // namespace agos
