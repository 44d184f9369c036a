#pragma once

#include <string>
#include <vector>

#include "agos/config.hpp"
#include "agos/gradcheck.hpp"
#include "agos/model.hpp"

namespace agos {

struct GradCheckGroup {
  std::string name;
  double max_rel = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  double overall_max_rel = 0.0;
  double tolerance = 1e-5;
  bool pass = false;
};

// Tiny double-precision config the whole-model check runs on. The init std is
// raised well above the training default so gradients sit far from the
// relative-error floor and the comparison is meaningful.
inline TrainConfig gradcheck_config() {
  TrainConfig cfg;
  cfg.classes = 3;
  cfg.in_channels = 1;
  cfg.stem_channels = 4;
  cfg.num_blocks = 1;
  cfg.downsample = 2;
  cfg.out_channels = 4;
  cfg.grains = 2;
  cfg.grain_channels = 4;
  cfg.alpha = 0.05;
  cfg.weight_decay = 0.01;
  cfg.dropout = 0.25;
  cfg.precision = Precision::Double;
  cfg.agos_init_std = 0.3;
  cfg.seed = 7;
  return cfg;
}

// Compares the tape's analytic gradient of the full training objective
// against central finite differences, parameter group by parameter group.
// `corrupt_param`, when non-empty, perturbs that group's analytic gradient
// before the comparison; the check must then fail (negative control).
inline GradCheckReport gradcheck_model(const TrainConfig& cfg, double eps = 1e-5,
                                       double tolerance = 1e-5,
                                       const std::string& corrupt_param = "") {
  const int image = 8;
  ModelSpec spec = make_model_spec(cfg, ModelVariant::Full);
  ParamStore<double> params;
  model_init(params, spec, cfg.seed);

  Rng data_rng(mix_seed(cfg.seed, 0x64617461)); // "data"
  Tensor<double> images =
      Tensor<double>::uniform(Shape{2, image, image, cfg.in_channels}, 0.0, 1.0, data_rng);
  std::vector<int> labels = {0, static_cast<int>(data_rng.uniform_int(1, cfg.classes - 1))};
  const uint64_t drop_seed = mix_seed(cfg.seed, 0x6d61736b); // "mask"

  auto loss_value = [&]() {
    Tape<double> tape;
    ParamBinding<double> bind(tape, params);
    ModelOutput<double> out =
        model_forward(tape, bind, spec, images, labels, /*training=*/true, drop_seed);
    return static_cast<double>(tape.value(out.loss.total).v[0]);
  };

  // Analytic gradients at the base point.
  Tape<double> tape;
  ParamBinding<double> bind(tape, params);
  ModelOutput<double> out =
      model_forward(tape, bind, spec, images, labels, /*training=*/true, drop_seed);
  tape.backward(out.loss.total);

  GradCheckReport report;
  report.tolerance = tolerance;
  for (const auto& [name, p] : params.all()) {
    Tensor<double> analytic = bind.grad(name);
    if (name == corrupt_param)
      for (auto& g : analytic.v) g = g * 1.01 + 1e-3;
    Tensor<double> fd = finite_diff_grad(params.at(name), loss_value, eps);
    GradCheckGroup group;
    group.name = name;
    for (size_t i = 0; i < fd.v.size(); ++i)
      group.max_rel = std::max(group.max_rel, rel_error(analytic.v[i], fd.v[i]));
    report.overall_max_rel = std::max(report.overall_max_rel, group.max_rel);
    report.groups.push_back(std::move(group));
  }
  report.pass = report.overall_max_rel < tolerance;
  return report;
}

}  // namespace agos
