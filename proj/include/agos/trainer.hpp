#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "agos/config.hpp"
#include "agos/dataio.hpp"
#include "agos/model.hpp"
#include "agos/optimizer.hpp"

namespace agos {

struct EpochStats {
  int epoch = 0;
  double lr = 0.0;
  LossBreakdown loss;
};

struct Metrics {
  double overall_accuracy = 0.0;
  std::vector<double> per_class;
  std::vector<EpochStats> history;
  std::vector<double> run_oas;
  double oa_mean = 0.0;
  double oa_std = 0.0; // population

  void finalize_runs() {
    double s = 0.0;
    for (double oa : run_oas) s += oa;
    oa_mean = s / static_cast<double>(run_oas.size());
    double var = 0.0;
    for (double oa : run_oas) var += (oa - oa_mean) * (oa - oa_mean);
    oa_std = std::sqrt(var / static_cast<double>(run_oas.size()));
  }

  std::string oa_string() const {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f±%.4f", oa_mean, oa_std);
    return buf;
  }
};

// Desk-scale datasets fit in memory, so samples are decoded once up front.
template <typename T>
struct LoadedDataset {
  std::vector<Tensor<T>> images;
  std::vector<int> labels;
  int classes = 0;
};

template <typename T>
LoadedDataset<T> load_dataset(const DatasetManifest& manifest) {
  LoadedDataset<T> out;
  out.classes = static_cast<int>(manifest.classes.size());
  for (const auto& s : manifest.samples) {
    Tensor<double> img = load_image(s.path);
    if (img.shape.h != manifest.image_h || img.shape.w != manifest.image_w ||
        img.shape.c != manifest.channels)
      throw IoError("sample size differs from the dataset's: " + s.path);
    out.images.push_back(img.cast<T>());
    out.labels.push_back(s.label);
  }
  return out;
}

template <typename T>
Tensor<T> assemble_batch(const LoadedDataset<T>& data, const std::vector<size_t>& indices) {
  const Shape& s0 = data.images[indices[0]].shape;
  Tensor<T> batch(Shape{static_cast<int64_t>(indices.size()), s0.h, s0.w, s0.c});
  const int64_t stride = s0.numel();
  for (size_t i = 0; i < indices.size(); ++i)
    std::copy(data.images[indices[i]].v.begin(), data.images[indices[i]].v.end(),
              batch.v.begin() + static_cast<int64_t>(i) * stride);
  return batch;
}

template <typename T>
struct TrainResult {
  ParamStore<T> params;
  AdamState<T> adam;
  Metrics metrics;
  int epochs_done = 0;
};

template <typename T>
Metrics evaluate_model(const ParamStore<T>& params, const ModelSpec& spec,
                       const LoadedDataset<T>& data, int batch_size) {
  const size_t n = data.images.size();
  if (n == 0) throw UsageError("evaluate: empty dataset");
  std::vector<int64_t> correct(static_cast<size_t>(data.classes), 0);
  std::vector<int64_t> total(static_cast<size_t>(data.classes), 0);

  for (size_t start = 0; start < n; start += static_cast<size_t>(batch_size)) {
    size_t end = std::min(n, start + static_cast<size_t>(batch_size));
    std::vector<size_t> idx;
    for (size_t i = start; i < end; ++i) idx.push_back(i);
    Tensor<T> batch = assemble_batch(data, idx);

    Tape<T> tape;
    ParamBinding<T> bind(tape, params);
    ModelOutput<T> out = model_forward(tape, bind, spec, batch, {}, /*training=*/false, 0);
    const Tensor<T>& probs = tape.value(out.fused_probs);
    for (size_t i = 0; i < idx.size(); ++i) {
      std::vector<double> row(static_cast<size_t>(probs.shape.c));
      for (int64_t c = 0; c < probs.shape.c; ++c)
        row[static_cast<size_t>(c)] = static_cast<double>(probs.at(static_cast<int64_t>(i), 0, 0, c));
      int pred = argmax_lowest(row);
      int label = data.labels[idx[i]];
      total[static_cast<size_t>(label)] += 1;
      if (pred == label) correct[static_cast<size_t>(label)] += 1;
    }
  }

  Metrics m;
  int64_t c_sum = 0, t_sum = 0;
  for (size_t k = 0; k < total.size(); ++k) {
    c_sum += correct[k];
    t_sum += total[k];
    m.per_class.push_back(total[k] ? static_cast<double>(correct[k]) / static_cast<double>(total[k])
                                   : 0.0);
  }
  m.overall_accuracy = static_cast<double>(c_sum) / static_cast<double>(t_sum);
  return m;
}

template <typename T>
Metrics evaluate_model(const ParamStore<T>& params, const ModelSpec& spec,
                       const DatasetManifest& manifest, int batch_size) {
  LoadedDataset<T> data = load_dataset<T>(manifest);
  return evaluate_model(params, spec, data, batch_size);
}

// Runs epochs [start_epoch, cfg.epochs) over the training set. Pass a
// populated TrainResult to resume; randomness is derived per (seed, epoch,
// batch), so a resumed run replays the exact stream of a straight-through one.
template <typename T>
void train_epochs(const LoadedDataset<T>& data, const TrainConfig& cfg, const ModelSpec& spec,
                  TrainResult<T>& state, int start_epoch,
                  const std::function<void(const TrainResult<T>&, int)>& on_epoch_end = nullptr) {
  const size_t n = data.images.size();
  if (n == 0) throw UsageError("train: empty dataset");

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_schedule(cfg.lr0, cfg.lr_decay_factor, cfg.lr_decay_every, epoch);
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    Rng shuffle_rng(mix_seed(cfg.seed, static_cast<uint64_t>(epoch), 0x73687566)); // "shuf"
    shuffle_rng.shuffle(order);

    LossBreakdown epoch_loss;
    double seen = 0.0;
    int batch_index = 0;
    for (size_t start = 0; start < n; start += static_cast<size_t>(cfg.batch_size)) {
      size_t end = std::min(n, start + static_cast<size_t>(cfg.batch_size));
      std::vector<size_t> idx(order.begin() + static_cast<int64_t>(start),
                              order.begin() + static_cast<int64_t>(end));
      Tensor<T> batch = assemble_batch(data, idx);
      std::vector<int> labels;
      for (size_t i : idx) labels.push_back(data.labels[i]);

      Tape<T> tape;
      ParamBinding<T> bind(tape, state.params);
      uint64_t drop_seed = mix_seed(cfg.seed, static_cast<uint64_t>(epoch),
                                    0x64726f70u + static_cast<uint64_t>(batch_index)); // "drop"
      ModelOutput<T> out =
          model_forward(tape, bind, spec, batch, labels, /*training=*/true, drop_seed);

      if (!std::isfinite(out.loss.parts.total))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                           std::to_string(batch_index));
      tape.backward(out.loss.total);

      std::map<std::string, Tensor<T>> grads;
      for (const auto& [name, t] : state.params.all()) grads.emplace(name, bind.grad(name));
      for (const auto& [name, g] : grads)
        if (!g.all_finite())
          throw NumericError("non-finite gradient for parameter " + name + " at epoch " +
                             std::to_string(epoch) + " batch " + std::to_string(batch_index));

      adam_step(state.params, grads, state.adam, lr, cfg.adam_beta1, cfg.adam_beta2,
                cfg.adam_eps, cfg.l2_in_gradient ? cfg.weight_decay : 0.0);

      const double w = static_cast<double>(idx.size());
      epoch_loss.cls += out.loss.parts.cls * w;
      epoch_loss.sealig += out.loss.parts.sealig * w;
      epoch_loss.l2 += out.loss.parts.l2 * w;
      epoch_loss.total += out.loss.parts.total * w;
      epoch_loss.alpha = out.loss.parts.alpha;
      epoch_loss.weight_decay = out.loss.parts.weight_decay;
      seen += w;
      ++batch_index;
    }
    epoch_loss.cls /= seen;
    epoch_loss.sealig /= seen;
    epoch_loss.l2 /= seen;
    epoch_loss.total /= seen;
    state.metrics.history.push_back(EpochStats{epoch, lr, epoch_loss});
    state.epochs_done = epoch + 1;
    if (on_epoch_end) on_epoch_end(state, epoch);
  }
}

template <typename T>
TrainResult<T> train_model(const DatasetManifest& train_set, const TrainConfig& cfg,
                           ModelVariant variant = ModelVariant::Full,
                           const std::function<void(const TrainResult<T>&, int)>& on_epoch_end =
                               nullptr) {
  ModelSpec spec = make_model_spec(cfg, variant);
  TrainResult<T> state;
  model_init(state.params, spec, cfg.seed);
  state.adam.init(state.params);
  LoadedDataset<T> data = load_dataset<T>(train_set);
  train_epochs(data, cfg, spec, state, /*start_epoch=*/0, on_epoch_end);
  return state;
}

// Split + train + evaluate, `cfg.runs` times with seeds seed, seed+1, ...
// OA is aggregated as mean +- population standard deviation.
template <typename T>
Metrics run_repeated(const DatasetManifest& full, const TrainConfig& cfg, ModelVariant variant,
                     double ratio) {
  Metrics agg;
  for (int r = 0; r < cfg.runs; ++r) {
    TrainConfig run_cfg = cfg;
    run_cfg.seed = cfg.seed + static_cast<uint64_t>(r);
    auto [train_set, test_set] = split_dataset(full, ratio, run_cfg.seed);
    TrainResult<T> res = train_model<T>(train_set, run_cfg, variant);
    ModelSpec spec = make_model_spec(run_cfg, variant);
    Metrics eval = evaluate_model(res.params, spec, test_set, run_cfg.batch_size);
    agg.run_oas.push_back(eval.overall_accuracy);
  }
  agg.finalize_runs();
  return agg;
}

}  // namespace agos
