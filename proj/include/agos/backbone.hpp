#pragma once

#include <cmath>
#include <string>

#include "agos/ops.hpp"
#include "agos/params.hpp"
#include "agos/rng.hpp"

namespace agos {

// Small from-scratch CNN stem: log2(downsample) stride-2 3x3 convs followed by
// num_blocks stride-1 3x3 convs, rectifier after every conv. Output is the
// (N, H/f, W/f, out_channels) feature map the grain stack consumes.
struct BackboneConfig {
  int in_channels = 1;
  int stem_channels = 16;
  int num_blocks = 2;
  int downsample = 4;
  int out_channels = 32;

  int stages() const {
    int f = downsample, s = 0;
    while (f > 1) {
      f >>= 1;
      ++s;
    }
    return s;
  }
};

template <typename T>
void backbone_init(ParamStore<T>& params, const BackboneConfig& cfg, Rng& rng) {
  auto he = [&rng, &params](const std::string& name, int64_t kh, int64_t kw, int64_t cin,
                            int64_t cout) {
    double std = std::sqrt(2.0 / static_cast<double>(kh * kw * cin));
    params.add(name + ".weight", Tensor<T>::normal(Shape{kh, kw, cin, cout}, std, rng));
    params.add(name + ".bias", Tensor<T>(Shape{1, 1, 1, cout}));
  };
  int cin = cfg.in_channels;
  for (int s = 0; s < cfg.stages(); ++s) {
    he("backbone.stem" + std::to_string(s), 3, 3, cin, cfg.stem_channels);
    cin = cfg.stem_channels;
  }
  for (int b = 0; b < cfg.num_blocks; ++b) {
    int cout = cfg.out_channels;
    he("backbone.block" + std::to_string(b), 3, 3, cin, cout);
    cin = cout;
  }
}

template <typename T>
Var<T> backbone_forward(Tape<T>& tape, Var<T> image, ParamBinding<T>& bind,
                        const BackboneConfig& cfg) {
  Var<T> x = image;
  for (int s = 0; s < cfg.stages(); ++s) {
    std::string name = "backbone.stem" + std::to_string(s);
    x = conv2d(tape, x, bind.use(name + ".weight"), bind.use(name + ".bias"), /*dilation=*/1,
               /*stride=*/2);
    x = relu(tape, x);
  }
  for (int b = 0; b < cfg.num_blocks; ++b) {
    std::string name = "backbone.block" + std::to_string(b);
    x = conv2d(tape, x, bind.use(name + ".weight"), bind.use(name + ".bias"), /*dilation=*/1);
    x = relu(tape, x);
  }
  return x;
}

}  // namespace agos
