#pragma once

#include <string>
#include <vector>

#include "agos/ops.hpp"
#include "agos/params.hpp"
#include "agos/rng.hpp"

namespace agos {

// Instance-space MIL head. Each grain map is a bag of H'xW' instances; a 1x1
// conv scores every instance against the C classes, mean pooling aggregates
// instances into per-grain bag scores, and the fused bag distribution is the
// softmax of the summed per-grain scores (one softmax after the sum).
enum class BagSource { Fused, Grain, Diff };

struct BagDistribution {
  std::vector<double> probs;
  BagSource source = BagSource::Fused;
  int grain = -1; // meaningful when source == Grain
};

// Predicted class: argmax, ties to the lowest index.
inline int predict(const BagDistribution& dist) { return argmax_lowest(dist.probs); }

inline std::string branch_name(int t, bool shared) {
  return shared ? std::string("mbmir.shared") : "mbmir.branch" + std::to_string(t);
}

template <typename T>
void branch_init(ParamStore<T>& params, int branch_count, int in_channels, int classes,
                 bool shared, Rng& rng, double init_std) {
  for (int t = 0; t < branch_count; ++t) {
    std::string name = branch_name(t, shared);
    if (params.has(name + ".weight")) continue;
    params.add(name + ".weight",
               Tensor<T>::normal(Shape{1, 1, in_channels, classes}, init_std, rng));
    params.add(name + ".bias", Tensor<T>(Shape{1, 1, 1, classes}));
  }
}

template <typename T>
struct BranchOutputs {
  std::vector<Var<T>> instance_maps; // I_t, (N, H', W', C) per grain
  std::vector<Var<T>> grain_scores;  // Y_t, (N, 1, 1, C) per grain, pre-softmax
  Var<T> fused_logits;               // sum_t Y_t
  Var<T> fused_probs;                // softmax of the sum
};

template <typename T>
BranchOutputs<T> mbmir_forward(Tape<T>& tape, const std::vector<Var<T>>& grain_maps,
                               ParamBinding<T>& bind, bool shared) {
  if (grain_maps.empty()) throw UsageError("mbmir_forward: no grain maps");
  BranchOutputs<T> out;
  for (size_t t = 0; t < grain_maps.size(); ++t) {
    std::string name = branch_name(static_cast<int>(t), shared);
    Var<T> inst = conv1x1(tape, grain_maps[t], bind.use(name + ".weight"),
                          bind.use(name + ".bias"));
    out.instance_maps.push_back(inst);
    out.grain_scores.push_back(global_avg_pool(tape, inst));
  }
  Var<T> fused = out.grain_scores[0];
  for (size_t t = 1; t < out.grain_scores.size(); ++t)
    fused = add(tape, fused, out.grain_scores[t]);
  out.fused_logits = fused;
  out.fused_probs = softmax(tape, fused);
  return out;
}

// Rows of a (N,1,1,C) probability tensor as analysis-side distributions.
template <typename T>
std::vector<BagDistribution> bag_rows(const Tensor<T>& probs, BagSource source, int grain = -1) {
  std::vector<BagDistribution> out;
  for (int64_t n = 0; n < probs.shape.n; ++n) {
    BagDistribution d;
    d.source = source;
    d.grain = grain;
    d.probs.resize(static_cast<size_t>(probs.shape.c));
    for (int64_t c = 0; c < probs.shape.c; ++c)
      d.probs[static_cast<size_t>(c)] = static_cast<double>(probs.at(n, 0, 0, c));
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace agos
