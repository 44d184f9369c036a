#pragma once

#include <optional>
#include <vector>

#include "agos/ops.hpp"
#include "agos/params.hpp"

namespace agos {

// Scene-scheme fit head: differences each instance map against the base
// grain's, pools the differences into per-grain score vectors, and softmaxes
// their sum. The semantic-aligning loss pushes this distribution toward the
// true class, forcing the differential grains to stay class-discriminative.
template <typename T>
Var<T> diff_distribution(Tape<T>& tape, const std::vector<Var<T>>& instance_maps) {
  if (instance_maps.size() < 2)
    throw UsageError("diff_distribution: needs the base map and at least one grain map");
  std::optional<Var<T>> logits;
  for (size_t t = 1; t < instance_maps.size(); ++t) {
    Var<T> d = abs_diff(tape, instance_maps[t], instance_maps[0]);
    Var<T> y = global_avg_pool(tape, d);
    logits = logits ? add(tape, *logits, y) : y;
  }
  return softmax(tape, *logits);
}

// Scalar components of one training objective evaluation. `total` is always
// recomputable as cls + alpha*sealig + l2.
struct LossBreakdown {
  double cls = 0.0;
  double sealig = 0.0; // raw semantic-aligning term, before alpha
  double l2 = 0.0;     // weight_decay * sum of squared weights (0 if folded into grads)
  double total = 0.0;
  double alpha = 0.0;
  double weight_decay = 0.0;
};

template <typename T>
struct LossVars {
  Var<T> total;
  LossBreakdown parts;
};

// total = cross_entropy(fused) + alpha * cross_entropy(diff) + weight_decay * sum ||W||^2.
// The penalty covers every ".weight" parameter the forward pass touched,
// never biases. With l2_in_gradient the penalty moves into the optimizer
// (see adam_step) and contributes 0 here.
template <typename T>
LossVars<T> total_loss(Tape<T>& tape, Var<T> fused_probs, std::optional<Var<T>> diff_probs,
                       const std::vector<int>& labels, double alpha, double weight_decay,
                       const ParamBinding<T>& bind, bool l2_in_gradient = false) {
  LossVars<T> out;
  Var<T> cls = cross_entropy(tape, fused_probs, labels);
  out.parts.cls = static_cast<double>(tape.value(cls).v[0]);
  out.parts.alpha = diff_probs ? alpha : 0.0;
  out.parts.weight_decay = weight_decay;

  Var<T> total = cls;
  if (diff_probs) {
    Var<T> sealig = cross_entropy(tape, *diff_probs, labels);
    out.parts.sealig = static_cast<double>(tape.value(sealig).v[0]);
    if (alpha != 0.0) total = add(tape, total, scale(tape, sealig, alpha));
  }
  if (weight_decay > 0.0 && !l2_in_gradient) {
    std::optional<Var<T>> sq;
    for (const auto& [name, var] : bind.used()) {
      if (!ParamStore<T>::is_weight(name)) continue;
      Var<T> s = sum_squares(tape, var);
      sq = sq ? add(tape, *sq, s) : s;
    }
    if (sq) {
      Var<T> pen = scale(tape, *sq, weight_decay);
      out.parts.l2 = static_cast<double>(tape.value(pen).v[0]);
      total = add(tape, total, pen);
    }
  }
  out.parts.total = out.parts.cls + out.parts.alpha * out.parts.sealig + out.parts.l2;
  out.total = total;
  return out;
}

}  // namespace agos
