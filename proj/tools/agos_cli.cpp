// Command-line surface: training, evaluation, gradient verification, synthetic
// data generation, heatmap export, and the experiment suite. Exit codes:
// 0 success, 1 usage error, 2 numeric failure, 3 I/O error.

#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "agos/checkpoint.hpp"
#include "agos/config.hpp"
#include "agos/dataio.hpp"
#include "agos/experiments.hpp"
#include "agos/gradcheck_run.hpp"
#include "agos/model.hpp"
#include "agos/trainer.hpp"

using namespace agos;
namespace fs = std::filesystem;

namespace {

int g_exit = 0; // raised by handlers that fail without throwing (gradcheck)

// Flags shared by every subcommand. CLI values override config-file values,
// which override the built-in defaults.
struct CommonOpts {
  std::string config_path;
  std::vector<std::string> sets;
  std::string data_dir;
  std::string out_dir = "out";
  uint64_t seed = 0;
  int runs = 0;
  std::string precision;
  bool seed_given = false;
  bool runs_given = false;
};

void add_common(CLI::App* sub, const std::shared_ptr<CommonOpts>& o) {
  sub->add_option("--config", o->config_path, "config file (key = value lines)");
  sub->add_option("--set", o->sets, "override one config key, e.g. --set train.epochs=5")
      ->type_name("KEY=VALUE");
  sub->add_option("--data", o->data_dir,
                  "dataset root (one subdirectory per class); omitted: a synthetic "
                  "dataset is generated under <out-dir>/synth_data");
  sub->add_option("--out-dir", o->out_dir, "directory for artifacts and reports");
  sub->add_option("--seed", o->seed, "base random seed")
      ->each([o](const std::string&) { o->seed_given = true; });
  sub->add_option("--runs", o->runs, "repeated runs for mean±std reports")
      ->each([o](const std::string&) { o->runs_given = true; });
  sub->add_option("--precision", o->precision, "single or double")
      ->check(CLI::IsMember({"single", "double"}));
}

TrainConfig resolve_config(const CommonOpts& o, TrainConfig cfg = TrainConfig{}) {
  if (!o.config_path.empty()) load_config_file(o.config_path, cfg);
  for (const std::string& kv : o.sets) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw UsageError("--set expects KEY=VALUE, got: " + kv);
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed_given) cfg.seed = o.seed;
  if (o.runs_given) cfg.runs = o.runs;
  if (o.precision == "single") cfg.precision = Precision::Single;
  if (o.precision == "double") cfg.precision = Precision::Double;
  cfg.validate();
  return cfg;
}

SyntheticSceneSpec synth_spec_from(const TrainConfig& cfg) {
  SyntheticSceneSpec spec;
  spec.classes = cfg.synth_classes;
  spec.image = cfg.synth_image;
  spec.object_min = cfg.synth_object_min;
  spec.object_max = cfg.synth_object_max;
  spec.distractors_min = cfg.synth_distractors_min;
  spec.distractors_max = cfg.synth_distractors_max;
  spec.noise_std = cfg.synth_noise_std;
  spec.samples_per_class = cfg.synth_samples_per_class;
  return spec;
}

// Scans --data when given, otherwise generates the configured synthetic
// dataset (deterministic in the seed, so reruns see identical files).
// adapt_model: size the model to whatever the dataset actually contains.
DatasetManifest acquire_dataset(const CommonOpts& o, TrainConfig& cfg, bool adapt_model) {
  DatasetManifest full;
  if (!o.data_dir.empty()) {
    full = scan_dataset(o.data_dir);
  } else {
    std::string dir = (fs::path(o.out_dir) / "synth_data").string();
    std::printf("no --data given; generating synthetic dataset in %s\n", dir.c_str());
    full = synth_generate(synth_spec_from(cfg), cfg.seed, dir, cfg.downsample).manifest;
  }
  if (adapt_model) {
    cfg.classes = static_cast<int>(full.classes.size());
    cfg.in_channels = full.channels;
  }
  return full;
}

ModelVariant variant_from_name(const std::string& name) {
  for (ModelVariant v : {ModelVariant::Full, ModelVariant::BackboneOnly, ModelVariant::MgpOnly,
                         ModelVariant::MgpMbmir, ModelVariant::MgpSsfShared,
                         ModelVariant::FullClsOnly})
    if (variant_name(v) == name) return v;
  throw UsageError("unknown model variant: " + name +
                   " (expected full, backbone, mgp, mgp_mbmir, mgp_ssf or full_cls_only)");
}

void print_csv(const Csv& csv) {
  auto print_row = [](const std::vector<std::string>& row) {
    for (size_t i = 0; i < row.size(); ++i)
      std::printf("%s%s", i ? "  " : "", row[i].c_str());
    std::printf("\n");
  };
  print_row(csv.header);
  for (const auto& row : csv.rows) print_row(row);
}

// ---- train -------------------------------------------------------------------

template <typename T>
void do_train(TrainConfig cfg, const DatasetManifest& full, const std::string& out_dir,
              const std::string& resume, ModelVariant variant) {
  auto [train_set, test_set] = split_dataset(full, cfg.train_ratio, cfg.seed);
  std::printf("training %s on %zu samples, evaluating on %zu\n",
              variant_name(variant).c_str(), train_set.samples.size(),
              test_set.samples.size());

  ModelSpec spec = make_model_spec(cfg, variant);
  TrainResult<T> state;
  int start_epoch = 0;
  if (!resume.empty()) {
    Checkpoint<T> ck = load_checkpoint<T>(resume);
    state.params = std::move(ck.params);
    if (ck.has_adam)
      state.adam = std::move(ck.adam);
    else
      state.adam.init(state.params);
    start_epoch = ck.epoch;
    std::printf("resumed %s at epoch %d\n", resume.c_str(), start_epoch);
  } else {
    model_init(state.params, spec, cfg.seed);
    state.adam.init(state.params);
  }

  fs::create_directories(out_dir);
  const std::string ckpt = (fs::path(out_dir) / "model.ckpt").string();
  std::function<void(const TrainResult<T>&, int)> on_epoch_end = [&](const TrainResult<T>& s,
                                                                     int epoch) {
    const EpochStats& st = s.metrics.history.back();
    std::printf("epoch %3d  lr %.3g  loss %.6f  (cls %.6f  sealig %.6f  l2 %.6f)\n", epoch,
                st.lr, st.loss.total, st.loss.cls, st.loss.sealig, st.loss.l2);
    if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0)
      save_checkpoint(ckpt, s.params, &s.adam, s.epochs_done, cfg);
  };
  LoadedDataset<T> data = load_dataset<T>(train_set);
  train_epochs(data, cfg, spec, state, start_epoch, on_epoch_end);
  save_checkpoint(ckpt, state.params, &state.adam, state.epochs_done, cfg);

  Csv hist;
  hist.header = {"epoch", "lr", "total", "cls", "sealig", "l2"};
  for (const EpochStats& st : state.metrics.history)
    hist.rows.push_back({std::to_string(st.epoch), csv_double(st.lr), csv_double(st.loss.total),
                         csv_double(st.loss.cls), csv_double(st.loss.sealig),
                         csv_double(st.loss.l2)});
  write_csv((fs::path(out_dir) / "history.csv").string(), hist);

  Metrics m = evaluate_model(state.params, spec, test_set, cfg.batch_size);
  std::printf("test overall accuracy %.4f\n", m.overall_accuracy);
  for (size_t c = 0; c < m.per_class.size(); ++c)
    std::printf("  class %zu accuracy %.4f\n", c, m.per_class[c]);
  std::printf("checkpoint written to %s\n", ckpt.c_str());
}

// ---- eval --------------------------------------------------------------------

template <typename T>
void do_eval(TrainConfig cfg, const std::string& ckpt_path, const DatasetManifest& data,
             ModelVariant variant) {
  Checkpoint<T> ck = load_checkpoint<T>(ckpt_path);
  ModelSpec spec = make_model_spec(cfg, variant);
  Metrics m = evaluate_model(ck.params, spec, data, cfg.batch_size);
  std::printf("overall accuracy %.4f over %zu samples (checkpoint epoch %d)\n",
              m.overall_accuracy, data.samples.size(), ck.epoch);
  for (size_t c = 0; c < m.per_class.size(); ++c)
    std::printf("  class %zu accuracy %.4f\n", c, m.per_class[c]);
}

// ---- export-heatmaps -----------------------------------------------------------

template <typename T>
void do_heatmaps(const TrainConfig& cfg, const std::string& ckpt_path,
                 const DatasetManifest& data, ModelVariant variant, size_t sample,
                 int class_flag, bool channel_mean, const std::string& out_dir) {
  if (sample >= data.samples.size())
    throw UsageError("--sample " + std::to_string(sample) + " out of range (dataset has " +
                     std::to_string(data.samples.size()) + " samples)");
  Checkpoint<T> ck = load_checkpoint<T>(ckpt_path);
  ModelSpec spec = make_model_spec(cfg, variant);

  Tensor<T> image = load_image(data.samples[sample].path).template cast<T>();
  Tape<T> tape;
  ParamBinding<T> bind(tape, ck.params);
  ModelOutput<T> out = model_forward(tape, bind, spec, image, {}, /*training=*/false, 0);

  const Tensor<T>& probs = tape.value(out.fused_probs);
  std::vector<double> row;
  for (int64_t c = 0; c < probs.shape.c; ++c)
    row.push_back(static_cast<double>(probs.at(0, 0, 0, c)));
  const int predicted = argmax_lowest(row);
  const int cls = channel_mean ? -1 : (class_flag >= 0 ? class_flag : predicted);
  std::printf("sample %zu (label %d) predicted class %d, exporting %s\n", sample,
              data.samples[sample].label, predicted,
              channel_mean ? "channel mean" : ("class " + std::to_string(cls)).c_str());

  fs::create_directories(out_dir);
  Tensor<double> fused;
  for (size_t t = 0; t < out.instance_maps.size(); ++t) {
    Tensor<double> m = tape.value(out.instance_maps[t]).template cast<double>();
    if (t == 0)
      fused = m;
    else
      for (size_t i = 0; i < fused.v.size(); ++i) fused.v[i] += m.v[i];
    std::string path = (fs::path(out_dir) / ("heatmap_grain" + std::to_string(t) + ".pgm")).string();
    export_heatmap(m, cls, path);
    std::printf("  %s (%lldx%lld)\n", path.c_str(), static_cast<long long>(m.shape.h),
                static_cast<long long>(m.shape.w));
  }
  for (double& v : fused.v) v /= static_cast<double>(out.instance_maps.size());
  std::string path = (fs::path(out_dir) / "heatmap_fused.pgm").string();
  export_heatmap(fused, cls, path);
  std::printf("  %s (average of %zu branch maps)\n", path.c_str(), out.instance_maps.size());
}

// ---- gradcheck -----------------------------------------------------------------

void do_gradcheck(const TrainConfig& cfg, const std::string& corrupt) {
  GradCheckReport report = gradcheck_model(cfg, 1e-5, 1e-5, corrupt);
  std::printf("%-36s %s\n", "parameter group", "max relative error");
  for (const GradCheckGroup& g : report.groups)
    std::printf("%-36s %.3e\n", g.name.c_str(), g.max_rel);
  std::printf("overall max %.3e, tolerance %.0e -> %s\n", report.overall_max_rel,
              report.tolerance, report.pass ? "PASS" : "FAIL");
  if (!report.pass) g_exit = 2; // numeric failure
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-grain scene classification workbench"};
  app.require_subcommand(1);

  // train
  {
    auto o = std::make_shared<CommonOpts>();
    auto variant = std::make_shared<std::string>("full");
    auto resume = std::make_shared<std::string>();
    CLI::App* sub = app.add_subcommand("train", "train a model and write a checkpoint");
    add_common(sub, o);
    sub->add_option("--variant", *variant, "model wiring: full, backbone, mgp, mgp_mbmir, "
                                           "mgp_ssf or full_cls_only");
    sub->add_option("--resume", *resume, "checkpoint to continue from");
    sub->callback([o, variant, resume]() {
      TrainConfig cfg = resolve_config(*o);
      DatasetManifest full = acquire_dataset(*o, cfg, /*adapt_model=*/true);
      ModelVariant v = variant_from_name(*variant);
      if (cfg.precision == Precision::Single)
        do_train<float>(cfg, full, o->out_dir, *resume, v);
      else
        do_train<double>(cfg, full, o->out_dir, *resume, v);
    });
  }

  // eval
  {
    auto o = std::make_shared<CommonOpts>();
    auto variant = std::make_shared<std::string>("full");
    auto ckpt = std::make_shared<std::string>();
    CLI::App* sub = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    add_common(sub, o);
    sub->add_option("--ckpt", *ckpt, "checkpoint path")->required();
    sub->add_option("--variant", *variant, "model wiring the checkpoint was trained with");
    sub->callback([o, variant, ckpt]() {
      // The checkpoint's config snapshot is the base; file and flags override.
      TrainConfig base;
      load_config_file(*ckpt + ".cfg", base);
      TrainConfig cfg = resolve_config(*o, base);
      DatasetManifest data = acquire_dataset(*o, cfg, /*adapt_model=*/false);
      ModelVariant v = variant_from_name(*variant);
      if (checkpoint_precision(*ckpt) == Precision::Single)
        do_eval<float>(cfg, *ckpt, data, v);
      else
        do_eval<double>(cfg, *ckpt, data, v);
    });
  }

  // gradcheck
  {
    auto o = std::make_shared<CommonOpts>();
    auto corrupt = std::make_shared<std::string>();
    CLI::App* sub = app.add_subcommand(
        "gradcheck", "compare analytic gradients against finite differences (tiny model)");
    add_common(sub, o);
    sub->add_option("--inject-grad-error", *corrupt,
                    "corrupt this parameter group's analytic gradient (negative control)")
        ->group(""); // hidden
    sub->callback([o, corrupt]() {
      TrainConfig cfg = resolve_config(*o, gradcheck_config());
      cfg.precision = Precision::Double; // the check is only meaningful in double
      do_gradcheck(cfg, *corrupt);
    });
  }

  // synth
  {
    auto o = std::make_shared<CommonOpts>();
    CLI::App* sub =
        app.add_subcommand("synth", "generate the synthetic scene dataset into <out-dir>");
    add_common(sub, o);
    sub->callback([o]() {
      TrainConfig cfg = resolve_config(*o);
      SynthResult r = synth_generate(synth_spec_from(cfg), cfg.seed, o->out_dir, cfg.downsample);
      std::printf("wrote %zu samples across %zu classes to %s\n", r.manifest.samples.size(),
                  r.manifest.classes.size(), o->out_dir.c_str());
    });
  }

  // experiment suite
  for (const char* name :
       {"ablate", "sweep-grains", "sweep-alpha", "ddc-variants", "fusion-compare", "covariance"}) {
    auto o = std::make_shared<CommonOpts>();
    std::string desc;
    ExperimentKind kind = experiment_kind_from_name(name);
    switch (kind) {
      case ExperimentKind::Ablate: desc = "accuracy of each model wiring"; break;
      case ExperimentKind::SweepGrains: desc = "accuracy across grain counts 0..5"; break;
      case ExperimentKind::SweepAlpha: desc = "accuracy across alignment-loss weights"; break;
      case ExperimentKind::DdcVariants: desc = "dilation/differencing on-off grid"; break;
      case ExperimentKind::FusionCompare: desc = "score-fusion strategies on one model"; break;
      case ExperimentKind::Covariance: desc = "bag-distribution covariance per fusion"; break;
    }
    CLI::App* sub = app.add_subcommand(name, desc);
    add_common(sub, o);
    sub->callback([o, kind]() {
      TrainConfig cfg = resolve_config(*o);
      DatasetManifest full = acquire_dataset(*o, cfg, /*adapt_model=*/true);
      Csv csv = run_experiment(kind, full, cfg, o->out_dir);
      print_csv(csv);
      std::printf("report written to %s\n",
                  (fs::path(o->out_dir) / (experiment_name(kind) + ".csv")).string().c_str());
    });
  }

  // export-heatmaps
  {
    auto o = std::make_shared<CommonOpts>();
    auto variant = std::make_shared<std::string>("full");
    auto ckpt = std::make_shared<std::string>();
    auto sample = std::make_shared<size_t>(0);
    auto cls = std::make_shared<int>(-1);
    auto mean = std::make_shared<bool>(false);
    CLI::App* sub = app.add_subcommand(
        "export-heatmaps", "write per-branch instance score maps of one sample as PGM images");
    add_common(sub, o);
    sub->add_option("--ckpt", *ckpt, "checkpoint path")->required();
    sub->add_option("--variant", *variant, "model wiring the checkpoint was trained with");
    sub->add_option("--sample", *sample, "dataset sample index");
    sub->add_option("--class", *cls, "class channel to export (default: predicted class)");
    sub->add_flag("--mean", *mean, "export the mean over class channels instead");
    sub->callback([o, variant, ckpt, sample, cls, mean]() {
      TrainConfig base;
      load_config_file(*ckpt + ".cfg", base);
      TrainConfig cfg = resolve_config(*o, base);
      DatasetManifest data = acquire_dataset(*o, cfg, /*adapt_model=*/false);
      ModelVariant v = variant_from_name(*variant);
      if (checkpoint_precision(*ckpt) == Precision::Single)
        do_heatmaps<float>(cfg, *ckpt, data, v, *sample, *cls, *mean, o->out_dir);
      else
        do_heatmaps<double>(cfg, *ckpt, data, v, *sample, *cls, *mean, o->out_dir);
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1; // flag/subcommand misuse is a usage error
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return g_exit;
}
