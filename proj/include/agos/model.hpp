#pragma once

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "agos/backbone.hpp"
#include "agos/config.hpp"
#include "agos/mbmir.hpp"
#include "agos/mgp.hpp"
#include "agos/ssf.hpp"

namespace agos {

// Wirings used by the ablation study. Full is the shipped model; the others
// drop or reshape heads while keeping everything upstream identical.
enum class ModelVariant {
  Full,         // grain stack + per-grain branches + differencing head
  BackboneOnly, // backbone -> 1x1 head -> pooled softmax
  MgpOnly,      // grain maps summed -> 1x1 head -> pooled softmax
  MgpMbmir,     // per-grain branches, no differencing head
  MgpSsfShared, // one shared branch kernel + differencing head
  FullClsOnly,  // Full wiring, semantic-aligning term weighted 0
};

inline std::string variant_name(ModelVariant v) {
  switch (v) {
    case ModelVariant::Full: return "full";
    case ModelVariant::BackboneOnly: return "backbone";
    case ModelVariant::MgpOnly: return "mgp";
    case ModelVariant::MgpMbmir: return "mgp_mbmir";
    case ModelVariant::MgpSsfShared: return "mgp_ssf";
    case ModelVariant::FullClsOnly: return "full_cls_only";
  }
  return "unknown";
}

struct ModelSpec {
  ModelVariant variant = ModelVariant::Full;
  BackboneConfig backbone;
  GrainConfig grain;
  int classes = 3;
  double alpha = 5e-4;
  double weight_decay = 5e-4;
  bool enable_sealig = true;
  bool l2_in_gradient = false;
  double dropout = 0.2;
  double agos_init_std = 0.001;

  bool has_grain_stack() const { return variant != ModelVariant::BackboneOnly; }
  bool has_per_grain_branches() const {
    return variant == ModelVariant::Full || variant == ModelVariant::MgpMbmir ||
           variant == ModelVariant::FullClsOnly;
  }
  bool has_shared_branch() const { return variant == ModelVariant::MgpSsfShared; }
  bool has_diff_head() const {
    return (variant == ModelVariant::Full || variant == ModelVariant::MgpSsfShared ||
            variant == ModelVariant::FullClsOnly) &&
           enable_sealig && grain.grains >= 1;
  }
  double effective_alpha() const {
    return (variant == ModelVariant::FullClsOnly) ? 0.0 : alpha;
  }
};

inline ModelSpec make_model_spec(const TrainConfig& cfg,
                                 ModelVariant variant = ModelVariant::Full) {
  ModelSpec spec;
  spec.variant = variant;
  spec.backbone = BackboneConfig{cfg.in_channels, cfg.stem_channels, cfg.num_blocks,
                                 cfg.downsample, cfg.out_channels};
  spec.grain = GrainConfig{cfg.grains,     cfg.out_channels, cfg.grain_channels,
                           cfg.tie_weights, cfg.use_dilation, cfg.use_diff};
  spec.classes = cfg.classes;
  spec.alpha = cfg.alpha;
  spec.weight_decay = cfg.weight_decay;
  spec.enable_sealig = cfg.enable_sealig;
  spec.l2_in_gradient = cfg.l2_in_gradient;
  spec.dropout = cfg.dropout;
  spec.agos_init_std = cfg.agos_init_std;
  if (spec.enable_sealig && spec.grain.grains == 0 && variant == ModelVariant::Full)
    std::cerr << "warning: semantic-aligning loss needs at least one differential grain; "
                 "term fixed to 0 because mgp.grains = 0\n";
  return spec;
}

template <typename T>
void model_init(ParamStore<T>& params, const ModelSpec& spec, uint64_t seed) {
  Rng rng(mix_seed(seed, /*tag=*/0x696e6974));
  backbone_init(params, spec.backbone, rng);
  double std = spec.agos_init_std;
  switch (spec.variant) {
    case ModelVariant::BackboneOnly:
      params.add("head.weight",
                 Tensor<T>::normal(Shape{1, 1, spec.backbone.out_channels, spec.classes}, std,
                                   rng));
      params.add("head.bias", Tensor<T>(Shape{1, 1, 1, spec.classes}));
      break;
    case ModelVariant::MgpOnly:
      mgp_init(params, spec.grain, rng, std);
      params.add("head.weight",
                 Tensor<T>::normal(Shape{1, 1, spec.grain.channels, spec.classes}, std, rng));
      params.add("head.bias", Tensor<T>(Shape{1, 1, 1, spec.classes}));
      break;
    case ModelVariant::MgpSsfShared:
      mgp_init(params, spec.grain, rng, std);
      branch_init(params, spec.grain.grains + 1, spec.grain.channels, spec.classes,
                  /*shared=*/true, rng, std);
      break;
    default:
      mgp_init(params, spec.grain, rng, std);
      branch_init(params, spec.grain.grains + 1, spec.grain.channels, spec.classes,
                  /*shared=*/false, rng, std);
      break;
  }
}

template <typename T>
struct ModelOutput {
  Var<T> features;                   // backbone map after dropout
  std::vector<Var<T>> grain_maps;    // X_0..X_T (head map only, for head variants)
  std::vector<Var<T>> instance_maps; // I_t per branch
  std::vector<Var<T>> grain_scores;  // Y_t per branch, pre-softmax
  Var<T> fused_logits;
  Var<T> fused_probs;
  std::optional<Var<T>> diff_probs;
  LossVars<T> loss;
};

// Builds the forward graph for one batch and the training objective on top of
// it. `labels` may be empty for pure inference (no loss nodes are recorded).
template <typename T>
ModelOutput<T> model_forward(Tape<T>& tape, ParamBinding<T>& bind, const ModelSpec& spec,
                             const Tensor<T>& images, const std::vector<int>& labels,
                             bool training, uint64_t dropout_seed) {
  ModelOutput<T> out;
  Var<T> image = tape.leaf(images, /*requires_grad=*/false);
  Var<T> x1 = backbone_forward(tape, image, bind, spec.backbone);
  x1 = dropout(tape, x1, spec.dropout, training, dropout_seed);
  out.features = x1;

  if (spec.variant == ModelVariant::BackboneOnly || spec.variant == ModelVariant::MgpOnly) {
    Var<T> head_in = x1;
    if (spec.variant == ModelVariant::MgpOnly) {
      out.grain_maps = mgp_forward(tape, x1, bind, spec.grain);
      head_in = out.grain_maps[0];
      for (size_t t = 1; t < out.grain_maps.size(); ++t)
        head_in = add(tape, head_in, out.grain_maps[t]);
    }
    Var<T> inst = conv1x1(tape, head_in, bind.use("head.weight"), bind.use("head.bias"));
    out.instance_maps.push_back(inst);
    Var<T> y = global_avg_pool(tape, inst);
    out.grain_scores.push_back(y);
    out.fused_logits = y;
    out.fused_probs = softmax(tape, y);
  } else {
    out.grain_maps = mgp_forward(tape, x1, bind, spec.grain);
    BranchOutputs<T> heads =
        mbmir_forward(tape, out.grain_maps, bind, spec.has_shared_branch());
    out.instance_maps = std::move(heads.instance_maps);
    out.grain_scores = std::move(heads.grain_scores);
    out.fused_logits = heads.fused_logits;
    out.fused_probs = heads.fused_probs;
    if (spec.has_diff_head()) out.diff_probs = diff_distribution(tape, out.instance_maps);
  }

  if (!labels.empty())
    out.loss = total_loss(tape, out.fused_probs, out.diff_probs, labels, spec.effective_alpha(),
                          spec.weight_decay, bind, spec.l2_in_gradient);
  return out;
}

}  // namespace agos
