#pragma once

#include <string>
#include <vector>

#include "agos/ops.hpp"
#include "agos/params.hpp"
#include "agos/rng.hpp"

namespace agos {

// Multi-grain perception: one 1x1 base branch plus `grains` differential
// branches. Branch t >= 1 subtracts adjacent dilation scales elementwise,
// |D_t(x) - D_{t-1}(x)|, where D_t is a 3x3 conv whose dilation grows the
// receptive field to (2r+1)x(2r+1) with r = 2t-1. No nonlinearity inside.
struct GrainConfig {
  int grains = 3;       // T; 0 means base branch only
  int in_channels = 32; // channels of the backbone feature map
  int channels = 32;    // channels of every grain map
  bool tie_weights = false;
  bool use_dilation = true; // false: every D_t runs at dilation 1
  bool use_diff = true;     // false: branch t emits D_t(x) directly
};

// Dilation of the t-th scale conv. The base scale D_0 is an ordinary
// dilation-1 conv; the growth schedule applies from t = 1.
inline int dilation_rate(int t) {
  if (t < 1) throw UsageError("dilation_rate: defined for t >= 1");
  return 2 * t - 1;
}

inline int scale_dilation(int t, bool use_dilation) {
  if (!use_dilation || t == 0) return 1;
  return dilation_rate(t);
}

// Scale convs D_t that branch t needs: with differencing, branch t reads
// D_t and D_{t-1}, so t = 0..T all exist; without it only t = 1..T are read.
inline int first_scale_conv(const GrainConfig& cfg) { return cfg.use_diff ? 0 : 1; }

inline std::string scale_conv_name(const GrainConfig& cfg, int t) {
  if (cfg.tie_weights) return "mgp.dshared";
  return "mgp.d" + std::to_string(t);
}

template <typename T>
void mgp_init(ParamStore<T>& params, const GrainConfig& cfg, Rng& rng, double init_std) {
  params.add("mgp.base.weight",
             Tensor<T>::normal(Shape{1, 1, cfg.in_channels, cfg.channels}, init_std, rng));
  params.add("mgp.base.bias", Tensor<T>(Shape{1, 1, 1, cfg.channels}));
  if (cfg.grains == 0) return;
  for (int t = first_scale_conv(cfg); t <= cfg.grains; ++t) {
    std::string name = scale_conv_name(cfg, t);
    if (params.has(name + ".weight")) continue; // tied: one shared buffer
    params.add(name + ".weight",
               Tensor<T>::normal(Shape{3, 3, cfg.in_channels, cfg.channels}, init_std, rng));
    params.add(name + ".bias", Tensor<T>(Shape{1, 1, 1, cfg.channels}));
  }
}

// Returns grain maps X_0..X_T (T+1 entries), each (N, H', W', channels).
template <typename T>
std::vector<Var<T>> mgp_forward(Tape<T>& tape, Var<T> x1, ParamBinding<T>& bind,
                                const GrainConfig& cfg) {
  std::vector<Var<T>> grains;
  grains.push_back(
      conv1x1(tape, x1, bind.use("mgp.base.weight"), bind.use("mgp.base.bias")));
  if (cfg.grains == 0) return grains;

  std::vector<Var<T>> scale_out(static_cast<size_t>(cfg.grains) + 1);
  for (int t = first_scale_conv(cfg); t <= cfg.grains; ++t) {
    std::string name = scale_conv_name(cfg, t);
    scale_out[static_cast<size_t>(t)] =
        conv2d(tape, x1, bind.use(name + ".weight"), bind.use(name + ".bias"),
               scale_dilation(t, cfg.use_dilation));
  }
  for (int t = 1; t <= cfg.grains; ++t) {
    if (cfg.use_diff)
      grains.push_back(abs_diff(tape, scale_out[static_cast<size_t>(t)],
                                scale_out[static_cast<size_t>(t) - 1]));
    else
      grains.push_back(scale_out[static_cast<size_t>(t)]);
  }
  return grains;
}

}  // namespace agos
