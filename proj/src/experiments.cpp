#include "agos/experiments.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>

#include "agos/mil.hpp"
#include "agos/trainer.hpp"

namespace fs = std::filesystem;

namespace agos {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string ratio_tag(double ratio) {
  return std::to_string(static_cast<int>(std::lround(ratio * 100.0)));
}

// Per-sample raw grain score vectors and fused distributions on a dataset.
template <typename T>
void collect_scores(const ParamStore<T>& params, const ModelSpec& spec,
                    const LoadedDataset<T>& data, int batch_size,
                    std::vector<std::vector<std::vector<double>>>* scores,
                    std::vector<BagDistribution>* fused, std::vector<int>* labels) {
  const size_t n = data.images.size();
  for (size_t start = 0; start < n; start += static_cast<size_t>(batch_size)) {
    size_t end = std::min(n, start + static_cast<size_t>(batch_size));
    std::vector<size_t> idx;
    for (size_t i = start; i < end; ++i) idx.push_back(i);
    Tensor<T> batch = assemble_batch(data, idx);

    Tape<T> tape;
    ParamBinding<T> bind(tape, params);
    ModelOutput<T> out = model_forward(tape, bind, spec, batch, {}, /*training=*/false, 0);

    const size_t grains = out.grain_scores.size();
    for (size_t i = 0; i < idx.size(); ++i) {
      std::vector<std::vector<double>> per_grain(grains);
      for (size_t t = 0; t < grains; ++t) {
        const Tensor<T>& y = tape.value(out.grain_scores[t]);
        per_grain[t].resize(static_cast<size_t>(y.shape.c));
        for (int64_t c = 0; c < y.shape.c; ++c)
          per_grain[t][static_cast<size_t>(c)] =
              static_cast<double>(y.at(static_cast<int64_t>(i), 0, 0, c));
      }
      if (scores) scores->push_back(std::move(per_grain));
      if (labels) labels->push_back(data.labels[idx[i]]);
    }
    if (fused) {
      auto rows = bag_rows(tape.value(out.fused_probs), BagSource::Fused);
      for (size_t i = 0; i < idx.size(); ++i) fused->push_back(std::move(rows[i]));
    }
  }
}

double fusion_accuracy(const FusionStrategy& strategy,
                       const std::vector<std::vector<std::vector<double>>>& scores,
                       const std::vector<int>& labels) {
  int64_t correct = 0;
  for (size_t s = 0; s < scores.size(); ++s)
    if (predict(fuse(strategy, scores[s])) == labels[s]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

template <typename T>
Csv ablate_impl(const DatasetManifest& full, const TrainConfig& cfg) {
  const ModelVariant variants[] = {ModelVariant::BackboneOnly, ModelVariant::MgpOnly,
                                   ModelVariant::MgpMbmir,     ModelVariant::MgpSsfShared,
                                   ModelVariant::FullClsOnly,  ModelVariant::Full};
  Csv csv;
  csv.header = {"variant"};
  for (double r : cfg.experiment_ratios) {
    csv.header.push_back("oa_mean_" + ratio_tag(r));
    csv.header.push_back("oa_std_" + ratio_tag(r));
  }
  csv.header.push_back("runtime_seconds");

  for (ModelVariant v : variants) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<std::string> row = {variant_name(v)};
    for (double r : cfg.experiment_ratios) {
      Metrics m = run_repeated<T>(full, cfg, v, r);
      row.push_back(csv_double(m.oa_mean));
      row.push_back(csv_double(m.oa_std));
    }
    row.push_back(csv_double(seconds_since(t0)));
    csv.rows.push_back(std::move(row));
  }
  return csv;
}

template <typename T>
Csv sweep_grains_impl(const DatasetManifest& full, const TrainConfig& cfg) {
  Csv csv;
  csv.header = {"variant", "oa_mean", "oa_std", "runtime_seconds"};
  for (int t = 0; t <= 5; ++t) {
    TrainConfig c = cfg;
    c.grains = t;
    auto t0 = std::chrono::steady_clock::now();
    Metrics m = run_repeated<T>(full, c, ModelVariant::Full, c.train_ratio);
    csv.rows.push_back({"grains_" + std::to_string(t), csv_double(m.oa_mean),
                        csv_double(m.oa_std), csv_double(seconds_since(t0))});
  }
  return csv;
}

template <typename T>
Csv sweep_alpha_impl(const DatasetManifest& full, const TrainConfig& cfg) {
  Csv csv;
  csv.header = {"variant", "oa_mean", "oa_std", "runtime_seconds"};
  for (int x = -2; x >= -5; --x) {
    TrainConfig c = cfg;
    c.alpha = 5.0 * std::pow(10.0, x);
    auto t0 = std::chrono::steady_clock::now();
    Metrics m = run_repeated<T>(full, c, ModelVariant::Full, c.train_ratio);
    csv.rows.push_back({"alpha_" + format_double(c.alpha), csv_double(m.oa_mean),
                        csv_double(m.oa_std), csv_double(seconds_since(t0))});
  }
  return csv;
}

template <typename T>
Csv ddc_variants_impl(const DatasetManifest& full, const TrainConfig& cfg) {
  struct Row {
    const char* name;
    bool use_dilation, use_diff;
  };
  // C: plain convs; DD-C: differencing without dilation growth;
  // D-DC: dilation growth without differencing; DDC: both.
  const Row rows[] = {{"C", false, false},
                      {"DD-C", false, true},
                      {"D-DC", true, false},
                      {"DDC", true, true}};
  Csv csv;
  csv.header = {"variant", "oa_mean", "oa_std", "runtime_seconds"};
  for (const Row& r : rows) {
    TrainConfig c = cfg;
    c.use_dilation = r.use_dilation;
    c.use_diff = r.use_diff;
    auto t0 = std::chrono::steady_clock::now();
    Metrics m = run_repeated<T>(full, c, ModelVariant::Full, c.train_ratio);
    csv.rows.push_back({r.name, csv_double(m.oa_mean), csv_double(m.oa_std),
                        csv_double(seconds_since(t0))});
  }
  return csv;
}

template <typename T>
Csv fusion_compare_impl(const DatasetManifest& full, const TrainConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  std::vector<std::vector<double>> oas(5); // mean, max, mv, ls, fused head

  for (int r = 0; r < cfg.runs; ++r) {
    TrainConfig run_cfg = cfg;
    run_cfg.seed = cfg.seed + static_cast<uint64_t>(r);
    auto [train_set, test_set] = split_dataset(full, run_cfg.train_ratio, run_cfg.seed);
    TrainResult<T> res = train_model<T>(train_set, run_cfg, ModelVariant::Full);
    ModelSpec spec = make_model_spec(run_cfg, ModelVariant::Full);

    LoadedDataset<T> train_data = load_dataset<T>(train_set);
    LoadedDataset<T> test_data = load_dataset<T>(test_set);
    std::vector<std::vector<std::vector<double>>> train_scores, test_scores;
    std::vector<int> train_labels, test_labels;
    std::vector<BagDistribution> test_fused;
    collect_scores(res.params, spec, train_data, run_cfg.batch_size, &train_scores, nullptr,
                   &train_labels);
    collect_scores(res.params, spec, test_data, run_cfg.batch_size, &test_scores, &test_fused,
                   &test_labels);

    FusionStrategy ls{FusionKind::LeastSquares,
                      fit_least_squares(train_scores, train_labels, cfg.classes)};
    oas[0].push_back(fusion_accuracy({FusionKind::Mean, {}}, test_scores, test_labels));
    oas[1].push_back(fusion_accuracy({FusionKind::Max, {}}, test_scores, test_labels));
    oas[2].push_back(fusion_accuracy({FusionKind::MajorityVote, {}}, test_scores, test_labels));
    oas[3].push_back(fusion_accuracy(ls, test_scores, test_labels));

    int64_t correct = 0;
    for (size_t s = 0; s < test_fused.size(); ++s)
      if (predict(test_fused[s]) == test_labels[s]) ++correct;
    oas[4].push_back(static_cast<double>(correct) / static_cast<double>(test_fused.size()));
  }

  const std::string names[] = {fusion_name(FusionKind::Mean), fusion_name(FusionKind::Max),
                               fusion_name(FusionKind::MajorityVote),
                               fusion_name(FusionKind::LeastSquares), "fused_softmax_sum"};
  const double elapsed = seconds_since(t0);
  Csv csv;
  csv.header = {"variant", "oa_mean", "oa_std", "runtime_seconds"};
  for (size_t i = 0; i < 5; ++i) {
    Metrics m;
    m.run_oas = oas[i];
    m.finalize_runs();
    csv.rows.push_back({names[i], csv_double(m.oa_mean), csv_double(m.oa_std),
                        csv_double(elapsed)});
  }
  return csv;
}

template <typename T>
Csv covariance_impl(const DatasetManifest& full, const TrainConfig& cfg,
                    const std::string& out_dir) {
  auto t0 = std::chrono::steady_clock::now();
  auto [train_set, test_set] = split_dataset(full, cfg.train_ratio, cfg.seed);
  TrainResult<T> res = train_model<T>(train_set, cfg, ModelVariant::Full);
  ModelSpec spec = make_model_spec(cfg, ModelVariant::Full);

  LoadedDataset<T> train_data = load_dataset<T>(train_set);
  LoadedDataset<T> test_data = load_dataset<T>(test_set);
  std::vector<std::vector<std::vector<double>>> train_scores, test_scores;
  std::vector<int> train_labels, test_labels;
  std::vector<BagDistribution> test_fused;
  collect_scores(res.params, spec, train_data, cfg.batch_size, &train_scores, nullptr,
                 &train_labels);
  collect_scores(res.params, spec, test_data, cfg.batch_size, &test_scores, &test_fused,
                 &test_labels);

  FusionStrategy ls{FusionKind::LeastSquares,
                    fit_least_squares(train_scores, train_labels, cfg.classes)};
  struct Entry {
    std::string name;
    std::vector<BagDistribution> dists;
  };
  std::vector<Entry> entries;
  for (FusionKind k :
       {FusionKind::Mean, FusionKind::Max, FusionKind::MajorityVote, FusionKind::LeastSquares}) {
    Entry e;
    e.name = fusion_name(k);
    FusionStrategy strat = (k == FusionKind::LeastSquares) ? ls : FusionStrategy{k, {}};
    for (const auto& s : test_scores) e.dists.push_back(fuse(strat, s));
    entries.push_back(std::move(e));
  }
  entries.push_back(Entry{"fused_softmax_sum", test_fused});

  Csv csv;
  csv.header = {"variant", "min_eigenvalue", "trace", "file"};
  for (const auto& e : entries) {
    std::vector<double> cov = covariance_matrix(e.dists, cfg.classes);
    std::string fname = "covariance_" + e.name + ".csv";
    write_matrix_csv((fs::path(out_dir) / fname).string(), cov, cfg.classes);
    std::vector<double> eig = symmetric_eigenvalues(cov, cfg.classes);
    double trace = 0.0;
    for (int i = 0; i < cfg.classes; ++i) trace += cov[static_cast<size_t>(i) * cfg.classes + i];
    csv.rows.push_back({e.name, csv_double(eig.front()), csv_double(trace), fname});
  }
  (void)seconds_since(t0);
  return csv;
}

template <typename T>
Csv run_experiment_impl(ExperimentKind kind, const DatasetManifest& full, const TrainConfig& cfg,
                        const std::string& out_dir) {
  switch (kind) {
    case ExperimentKind::Ablate: return ablate_impl<T>(full, cfg);
    case ExperimentKind::SweepGrains: return sweep_grains_impl<T>(full, cfg);
    case ExperimentKind::SweepAlpha: return sweep_alpha_impl<T>(full, cfg);
    case ExperimentKind::DdcVariants: return ddc_variants_impl<T>(full, cfg);
    case ExperimentKind::FusionCompare: return fusion_compare_impl<T>(full, cfg);
    case ExperimentKind::Covariance: return covariance_impl<T>(full, cfg, out_dir);
  }
  throw UsageError("unknown experiment kind");
}

}  // namespace

ExperimentKind experiment_kind_from_name(const std::string& name) {
  if (name == "ablate") return ExperimentKind::Ablate;
  if (name == "sweep-grains") return ExperimentKind::SweepGrains;
  if (name == "sweep-alpha") return ExperimentKind::SweepAlpha;
  if (name == "ddc-variants") return ExperimentKind::DdcVariants;
  if (name == "fusion-compare") return ExperimentKind::FusionCompare;
  if (name == "covariance") return ExperimentKind::Covariance;
  throw UsageError("unknown experiment: " + name);
}

std::string experiment_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Ablate: return "ablate";
    case ExperimentKind::SweepGrains: return "sweep_grains";
    case ExperimentKind::SweepAlpha: return "sweep_alpha";
    case ExperimentKind::DdcVariants: return "ddc_variants";
    case ExperimentKind::FusionCompare: return "fusion_compare";
    case ExperimentKind::Covariance: return "covariance";
  }
  return "unknown";
}

Csv run_experiment(ExperimentKind kind, const DatasetManifest& full, const TrainConfig& cfg,
                   const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + out_dir);

  Csv csv = cfg.precision == Precision::Single
                ? run_experiment_impl<float>(kind, full, cfg, out_dir)
                : run_experiment_impl<double>(kind, full, cfg, out_dir);
  write_csv((fs::path(out_dir) / (experiment_name(kind) + ".csv")).string(), csv);
  return csv;
}

}  // namespace agos
