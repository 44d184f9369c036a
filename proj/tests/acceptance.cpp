// Acceptance gate: nine end-to-end checks over the built library, each with a
// pinned tolerance and runtime budget. Prints one [PASS]/[FAIL] line per
// criterion and exits nonzero if any fail. Slower than the unit suites by
// design; the toy-learning check trains two real models.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "agos/checkpoint.hpp"
#include "agos/config.hpp"
#include "agos/dataio.hpp"
#include "agos/experiments.hpp"
#include "agos/gradcheck_run.hpp"
#include "agos/mgp.hpp"
#include "agos/mil.hpp"
#include "agos/model.hpp"
#include "agos/ops.hpp"
#include "agos/trainer.hpp"
#include "oracles.hpp"

using namespace agos;
namespace fs = std::filesystem;

namespace {

fs::path g_work;

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

bool fail(Outcome& o, const std::string& why) {
  o.pass = false;
  o.detail = why;
  return false;
}

// ---- 1. whole-model gradients vs central finite differences ----------------

Outcome gradient_oracle() {
  Outcome o;
  const double t0 = now_seconds();
  GradCheckReport report = gradcheck_model(gradcheck_config(), 1e-5, 1e-5);
  const double elapsed = now_seconds() - t0;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%zu param groups, max rel err %.3g (tol 1e-5), %.1fs",
                report.groups.size(), report.overall_max_rel, elapsed);
  o.detail = buf;
  o.pass = report.pass && elapsed < 120.0;
  if (report.pass && elapsed >= 120.0) o.detail += " [over the 120s budget]";
  return o;
}

// ---- 2. dilated conv vs naive nested-loop reference -------------------------

Outcome conv_oracle() {
  Outcome o;
  const double t0 = now_seconds();
  Rng rng(20250816);
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const int dilation = 2 * static_cast<int>(rng.uniform_int(0, 2)) + 1; // 1, 3, 5
    Shape in_s{rng.uniform_int(1, 2), rng.uniform_int(2, 8), rng.uniform_int(2, 8),
               rng.uniform_int(1, 4)};
    const int64_t cout = rng.uniform_int(1, 4);
    Tensor<double> in = Tensor<double>::uniform(in_s, -2.0, 2.0, rng);
    Tensor<double> w = Tensor<double>::uniform(Shape{3, 3, in_s.c, cout}, -2.0, 2.0, rng);
    Tensor<double> b = Tensor<double>::uniform(Shape{1, 1, 1, cout}, -2.0, 2.0, rng);

    Tape<double> tape;
    const Tensor<double>& got = tape.value(
        conv2d(tape, tape.leaf(in, false), tape.leaf(w, false), tape.leaf(b, false), dilation));
    Tensor<double> want = oracle::naive_conv2d(in, w, b, dilation, 1);
    if (!(got.shape == want.shape)) return (fail(o, "output shape mismatch"), o);
    for (size_t i = 0; i < got.v.size(); ++i)
      worst = std::max(worst, std::abs(got.v[i] - want.v[i]));
  }
  const double elapsed = now_seconds() - t0;
  char buf[120];
  std::snprintf(buf, sizeof(buf), "200 cases, max abs err %.3g (tol 1e-12), %.1fs", worst,
                elapsed);
  o.detail = buf;
  o.pass = worst <= 1e-12 && elapsed < 30.0;
  return o;
}

// ---- 3. bag-level invariants -------------------------------------------------

Outcome mil_invariants() {
  Outcome o;
  Rng rng(33);

  // Fused distribution under a common spatial permutation of the grain maps
  // (conv1x1 scoring is positionwise, so the instance maps permute with them).
  ParamStore<double> params;
  branch_init(params, 4, 6, 5, /*shared=*/false, rng, 0.4);
  std::vector<Tensor<double>> maps;
  for (int t = 0; t < 4; ++t)
    maps.push_back(Tensor<double>::uniform(Shape{2, 8, 8, 6}, -1.0, 1.0, rng));
  std::vector<size_t> perm(64);
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  rng.shuffle(perm);
  std::vector<Tensor<double>> permuted = maps;
  for (auto& m : permuted) m.fill(0.0);
  for (int t = 0; t < 4; ++t)
    for (size_t p = 0; p < perm.size(); ++p)
      for (int64_t n = 0; n < 2; ++n)
        for (int64_t c = 0; c < 6; ++c)
          permuted[static_cast<size_t>(t)].v[static_cast<size_t>((n * 64 + static_cast<int64_t>(p)) * 6 + c)] =
              maps[static_cast<size_t>(t)].v[static_cast<size_t>((n * 64 + static_cast<int64_t>(perm[p])) * 6 + c)];

  auto fused_probs = [&params](const std::vector<Tensor<double>>& ms) {
    Tape<double> tape;
    ParamBinding<double> bind(tape, params);
    std::vector<Var<double>> vars;
    for (const auto& m : ms) vars.push_back(tape.leaf(m, false));
    return tape.value(mbmir_forward(tape, vars, bind, false).fused_probs);
  };
  Tensor<double> base = fused_probs(maps);
  Tensor<double> shuf = fused_probs(permuted);
  double perm_err = 0.0;
  for (size_t i = 0; i < base.v.size(); ++i)
    perm_err = std::max(perm_err, std::abs(base.v[i] - shuf.v[i]));
  if (perm_err > 1e-12)
    return (fail(o, "fused distribution moved under permutation by " + std::to_string(perm_err)),
            o);

  // Bag rule vs brute-force OR on every 12-instance pattern.
  for (uint32_t pattern = 0; pattern < (1u << 12); ++pattern) {
    std::vector<uint8_t> bag(12);
    int any = 0;
    for (int i = 0; i < 12; ++i) {
      bag[static_cast<size_t>(i)] = (pattern >> i) & 1u;
      any |= bag[static_cast<size_t>(i)];
    }
    if (classic_bag_label(bag) != any)
      return (fail(o, "bag label disagrees with OR on pattern " + std::to_string(pattern)), o);
  }

  // Softmax rows are unit-sum across 10^4 random score vectors.
  const int rows = 10000, C = 10;
  Tensor<double> logits = Tensor<double>::uniform(Shape{rows, 1, 1, C}, -30.0, 30.0, rng);
  Tape<double> tape;
  const Tensor<double>& probs = tape.value(softmax(tape, tape.leaf(logits, false)));
  double worst_sum = 0.0;
  for (int64_t n = 0; n < rows; ++n) {
    double s = 0.0;
    for (int64_t c = 0; c < C; ++c) s += probs.at(n, 0, 0, c);
    worst_sum = std::max(worst_sum, std::abs(s - 1.0));
  }
  if (worst_sum > 1e-9)
    return (fail(o, "softmax row sum off by " + std::to_string(worst_sum)), o);

  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "permutation err %.2g (tol 1e-12); 4096 bag patterns; row-sum err %.2g (tol 1e-9)",
                perm_err, worst_sum);
  o.detail = buf;
  o.pass = true;
  return o;
}

// ---- 4. dilated 3x3 impulse footprint ---------------------------------------

Outcome receptive_field() {
  Outcome o;
  std::string spans;
  for (int r : {1, 3, 5}) {
    const int64_t HW = 15;
    Tensor<double> impulse(Shape{1, HW, HW, 1});
    impulse.at(0, HW / 2, HW / 2, 0) = 1.0;
    Tensor<double> w(Shape{3, 3, 1, 1});
    w.fill(1.0);
    Tensor<double> b(Shape{1, 1, 1, 1});

    Tape<double> tape;
    const Tensor<double>& out = tape.value(
        conv2d(tape, tape.leaf(impulse, false), tape.leaf(w, false), tape.leaf(b, false), r));
    int64_t hmin = HW, hmax = -1, wmin = HW, wmax = -1;
    for (int64_t h = 0; h < HW; ++h)
      for (int64_t x = 0; x < HW; ++x)
        if (out.at(0, h, x, 0) != 0.0) {
          hmin = std::min(hmin, h);
          hmax = std::max(hmax, h);
          wmin = std::min(wmin, x);
          wmax = std::max(wmax, x);
        }
    const int64_t span_h = hmax - hmin + 1, span_w = wmax - wmin + 1;
    spans += (spans.empty() ? "" : ", ") + std::to_string(span_h) + "x" + std::to_string(span_w);
    if (span_h != 2 * r + 1 || span_w != 2 * r + 1)
      return (fail(o, "dilation " + std::to_string(r) + " footprint is " +
                          std::to_string(span_h) + "x" + std::to_string(span_w) + ", want " +
                          std::to_string(2 * r + 1) + "x" + std::to_string(2 * r + 1)),
              o);
  }
  o.detail = "footprints " + spans + " for dilations 1, 3, 5";
  o.pass = true;
  return o;
}

// ---- 5. differential branches vanish on constant input ----------------------

Outcome differential_zero() {
  Outcome o;
  GrainConfig cfg{3, 3, 4, /*tie_weights=*/true, true, true};
  ParamStore<double> params;
  Rng rng(55);
  mgp_init(params, cfg, rng, 0.5);
  params.at("mgp.dshared.bias").fill(0.25);

  Tensor<double> x(Shape{1, 16, 16, 3});
  x.fill(0.7);
  Tape<double> tape;
  ParamBinding<double> bind(tape, params);
  std::vector<Var<double>> grains = mgp_forward(tape, tape.leaf(x, false), bind, cfg);

  double worst = 0.0;
  for (int t = 1; t <= 3; ++t) {
    const Tensor<double>& g = tape.value(grains[static_cast<size_t>(t)]);
    const int64_t margin = 2 * t - 1; // border the widest dilation can touch
    for (int64_t h = margin; h < g.shape.h - margin; ++h)
      for (int64_t w = margin; w < g.shape.w - margin; ++w)
        for (int64_t c = 0; c < g.shape.c; ++c)
          worst = std::max(worst, std::abs(g.at(0, h, w, c)));
  }
  char buf[120];
  std::snprintf(buf, sizeof(buf),
                "max interior |difference map| %.3g (tol 1e-9), grains 1..3, tied weights", worst);
  o.detail = buf;
  o.pass = worst <= 1e-9;
  return o;
}

// ---- 6. toy learning beats the backbone baseline -----------------------------

TrainConfig toy_config() {
  TrainConfig cfg;
  cfg.classes = 3;
  cfg.stem_channels = 16;
  cfg.num_blocks = 2;
  cfg.downsample = 4;
  cfg.out_channels = 32; // feature width the grain stack consumes
  cfg.grains = 3;
  cfg.grain_channels = 32;
  cfg.alpha = 5e-4;
  cfg.weight_decay = 5e-4;
  cfg.lr0 = 2e-3;
  cfg.lr_decay_factor = 0.5;
  cfg.lr_decay_every = 30;
  cfg.epochs = 30;
  cfg.batch_size = 32;
  cfg.dropout = 0.1;
  cfg.seed = 1;
  cfg.runs = 1;
  cfg.agos_init_std = 0.05;
  cfg.synth_classes = 3;
  cfg.synth_image = 64;
  cfg.synth_samples_per_class = 200;
  return cfg;
}

DatasetManifest toy_dataset(const TrainConfig& cfg, const std::string& name) {
  SyntheticSceneSpec spec;
  spec.classes = cfg.synth_classes;
  spec.image = cfg.synth_image;
  spec.object_min = cfg.synth_object_min;
  spec.object_max = cfg.synth_object_max;
  spec.distractors_min = cfg.synth_distractors_min;
  spec.distractors_max = cfg.synth_distractors_max;
  spec.noise_std = cfg.synth_noise_std;
  spec.samples_per_class = cfg.synth_samples_per_class;
  fs::path dir = g_work / name;
  fs::remove_all(dir);
  return synth_generate(spec, cfg.seed, dir.string(), cfg.downsample).manifest;
}

Outcome toy_learning() {
  Outcome o;
  const double t0 = now_seconds();
  TrainConfig cfg = toy_config();
  DatasetManifest full = toy_dataset(cfg, "toy64");
  auto [train_set, test_set] = split_dataset(full, 0.5, cfg.seed);

  TrainResult<float> full_model = train_model<float>(train_set, cfg, ModelVariant::Full);
  Metrics full_oa = evaluate_model(full_model.params, make_model_spec(cfg, ModelVariant::Full),
                                   test_set, cfg.batch_size);

  TrainResult<float> base_model = train_model<float>(train_set, cfg, ModelVariant::BackboneOnly);
  Metrics base_oa =
      evaluate_model(base_model.params, make_model_spec(cfg, ModelVariant::BackboneOnly),
                     test_set, cfg.batch_size);

  const double elapsed = now_seconds() - t0;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "300/300 split, 30 epochs: OA(full) %.4f (need >= 0.90), OA(backbone) %.4f, %.0fs",
                full_oa.overall_accuracy, base_oa.overall_accuracy, elapsed);
  o.detail = buf;
  o.pass = full_oa.overall_accuracy >= 0.90 &&
           full_oa.overall_accuracy >= base_oa.overall_accuracy && elapsed < 900.0;
  return o;
}

// ---- 7. schedule and default hyperparameters --------------------------------

Outcome schedule_fidelity() {
  Outcome o;
  if (lr_schedule(1e-4, 0.5, 30, 0) != 1e-4) return (fail(o, "lr at epoch 0"), o);
  if (lr_schedule(1e-4, 0.5, 30, 30) != 5e-5) return (fail(o, "lr at epoch 30"), o);
  if (lr_schedule(1e-4, 0.5, 30, 60) != 2.5e-5) return (fail(o, "lr at epoch 60"), o);

  TrainConfig defaults;
  std::string snap = defaults.snapshot();
  TrainConfig back;
  parse_config_text(snap, back);
  if (back.alpha != 5e-4) return (fail(o, "snapshot alpha is " + format_double(back.alpha)), o);
  if (back.weight_decay != 5e-4)
    return (fail(o, "snapshot weight decay is " + format_double(back.weight_decay)), o);
  if (snap.find("loss.alpha") == std::string::npos ||
      snap.find("loss.weight_decay") == std::string::npos)
    return (fail(o, "snapshot lacks the loss keys"), o);

  o.detail = "lr 1e-4/5e-5/2.5e-5 at epochs 0/30/60; snapshot alpha = weight_decay = 0.0005";
  o.pass = true;
  return o;
}

// ---- 8. experiment harness output shape --------------------------------------

TrainConfig harness_config() {
  TrainConfig cfg;
  cfg.classes = 3;
  cfg.stem_channels = 4;
  cfg.num_blocks = 1;
  cfg.downsample = 4;
  cfg.out_channels = 8;
  cfg.grains = 2;
  cfg.grain_channels = 8;
  cfg.lr0 = 1e-3;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.dropout = 0.1;
  cfg.seed = 9;
  cfg.runs = 2; // mean +- std needs at least two seeded runs
  cfg.agos_init_std = 0.05;
  cfg.train_ratio = 0.5;
  cfg.synth_classes = 3;
  cfg.synth_image = 32;
  cfg.synth_object_min = 8;
  cfg.synth_object_max = 14;
  cfg.synth_samples_per_class = 8;
  return cfg;
}

bool check_report(const fs::path& out_dir, const std::string& file,
                  const std::vector<std::string>& want_rows, std::string& err) {
  Csv csv;
  try {
    csv = read_csv((out_dir / file).string());
  } catch (const std::exception& e) {
    err = file + ": " + e.what();
    return false;
  }
  if (csv.header.size() < 3 || csv.header[0] != "variant") {
    err = file + ": unexpected header";
    return false;
  }
  std::set<std::string> have;
  for (const auto& row : csv.rows) {
    if (row.size() != csv.header.size()) {
      err = file + ": ragged row";
      return false;
    }
    have.insert(row[0]);
    for (size_t i = 1; i < row.size() - 1; ++i) {
      try {
        double x = std::stod(row[i]);
        if (!std::isfinite(x)) throw std::invalid_argument("nan");
      } catch (const std::exception&) {
        err = file + ": non-numeric cell '" + row[i] + "'";
        return false;
      }
    }
  }
  if (csv.rows.size() != want_rows.size()) {
    err = file + ": " + std::to_string(csv.rows.size()) + " rows, want " +
          std::to_string(want_rows.size());
    return false;
  }
  for (const auto& name : want_rows)
    if (!have.count(name)) {
      err = file + ": missing row '" + name + "'";
      return false;
    }
  return true;
}

Outcome harness_shape() {
  Outcome o;
  const double t0 = now_seconds();
  TrainConfig cfg = harness_config();
  DatasetManifest full = toy_dataset(cfg, "toy32");
  fs::path out_dir = g_work / "reports";
  fs::remove_all(out_dir);

  for (ExperimentKind kind :
       {ExperimentKind::Ablate, ExperimentKind::SweepGrains, ExperimentKind::SweepAlpha,
        ExperimentKind::DdcVariants, ExperimentKind::FusionCompare})
    run_experiment(kind, full, cfg, out_dir.string());

  std::string err;
  if (!check_report(out_dir, "ablate.csv",
                    {"backbone", "mgp", "mgp_mbmir", "mgp_ssf", "full_cls_only", "full"}, err))
    return (fail(o, err), o);
  if (!check_report(out_dir, "sweep_grains.csv",
                    {"grains_0", "grains_1", "grains_2", "grains_3", "grains_4", "grains_5"},
                    err))
    return (fail(o, err), o);
  if (!check_report(out_dir, "sweep_alpha.csv",
                    {"alpha_0.05", "alpha_0.005", "alpha_0.0005", "alpha_5e-05"}, err))
    return (fail(o, err), o);
  if (!check_report(out_dir, "ddc_variants.csv", {"C", "DD-C", "D-DC", "DDC"}, err))
    return (fail(o, err), o);
  if (!check_report(out_dir, "fusion_compare.csv",
                    {"mean", "max", "majority_vote", "least_squares", "fused_softmax_sum"}, err))
    return (fail(o, err), o);

  const double elapsed = now_seconds() - t0;
  char buf[120];
  std::snprintf(buf, sizeof(buf), "5 reports, every variant row present, 2 runs each, %.0fs",
                elapsed);
  o.detail = buf;
  o.pass = true;
  return o;
}

// ---- 9. artifact round trips --------------------------------------------------

Outcome artifact_io() {
  Outcome o;
  fs::path dir = g_work / "artifacts";
  fs::remove_all(dir);
  fs::create_directories(dir);
  Rng rng(99);

  // Raw tensor container, both payload widths.
  {
    RawTensor t64;
    t64.dtype = 1;
    t64.dims = {3, 7};
    for (int i = 0; i < 21; ++i) t64.values.push_back(rng.normal() * std::pow(10.0, i - 10));
    save_agt1((dir / "t64.agt1").string(), t64);
    RawTensor back = load_agt1((dir / "t64.agt1").string());
    for (size_t i = 0; i < t64.values.size(); ++i)
      if (back.values[i] != t64.values[i]) return (fail(o, "double payload round trip"), o);

    RawTensor t32;
    t32.dtype = 0;
    t32.dims = {16};
    for (int i = 0; i < 16; ++i)
      t32.values.push_back(static_cast<double>(static_cast<float>(rng.normal())));
    save_agt1((dir / "t32.agt1").string(), t32);
    back = load_agt1((dir / "t32.agt1").string());
    for (size_t i = 0; i < t32.values.size(); ++i)
      if (back.values[i] != t32.values[i]) return (fail(o, "float payload round trip"), o);
  }

  // Pixel containers, 8- and 16-bit gray plus color.
  {
    PnmImage gray;
    gray.w = 9;
    gray.h = 5;
    gray.channels = 1;
    gray.maxval = 255;
    for (int i = 0; i < 45; ++i)
      gray.px.push_back(static_cast<uint16_t>(rng.uniform_int(0, 255)));
    save_pnm((dir / "g.pgm").string(), gray);
    if (load_pnm((dir / "g.pgm").string()).px != gray.px)
      return (fail(o, "8-bit gray round trip"), o);

    PnmImage deep = gray;
    deep.maxval = 65535;
    for (auto& p : deep.px) p = static_cast<uint16_t>(rng.uniform_int(0, 65535));
    save_pnm((dir / "g16.pgm").string(), deep);
    if (load_pnm((dir / "g16.pgm").string()).px != deep.px)
      return (fail(o, "16-bit gray round trip"), o);

    PnmImage color;
    color.w = 4;
    color.h = 3;
    color.channels = 3;
    color.maxval = 255;
    for (int i = 0; i < 36; ++i)
      color.px.push_back(static_cast<uint16_t>(rng.uniform_int(0, 255)));
    save_pnm((dir / "c.ppm").string(), color);
    if (load_pnm((dir / "c.ppm").string()).px != color.px)
      return (fail(o, "color round trip"), o);
  }

  // Checkpoint: save -> load -> evaluate must not move a single prediction.
  double oa_before = 0.0, oa_after = 0.0;
  {
    TrainConfig cfg = harness_config();
    DatasetManifest full = toy_dataset(cfg, "toy_ckpt");
    auto [train_set, test_set] = split_dataset(full, 0.5, cfg.seed);
    TrainResult<float> r = train_model<float>(train_set, cfg, ModelVariant::Full);
    ModelSpec spec = make_model_spec(cfg, ModelVariant::Full);
    oa_before = evaluate_model(r.params, spec, test_set, cfg.batch_size).overall_accuracy;
    std::string ck_path = (dir / "model.ckpt").string();
    save_checkpoint(ck_path, r.params, &r.adam, r.epochs_done, cfg);
    Checkpoint<float> ck = load_checkpoint<float>(ck_path);
    oa_after = evaluate_model(ck.params, spec, test_set, cfg.batch_size).overall_accuracy;
    if (oa_before != oa_after)
      return (fail(o, "checkpoint OA moved from " + std::to_string(oa_before) + " to " +
                          std::to_string(oa_after)),
              o);
  }

  // Covariance matrices written by the experiment harness: symmetric, PSD.
  double min_eig = 0.0;
  {
    TrainConfig cfg = harness_config();
    cfg.runs = 1;
    DatasetManifest full = toy_dataset(cfg, "toy_cov");
    fs::path out_dir = g_work / "cov_reports";
    fs::remove_all(out_dir);
    run_experiment(ExperimentKind::Covariance, full, cfg, out_dir.string());

    Csv summary = read_csv((out_dir / "covariance.csv").string());
    if (summary.rows.size() != 5) return (fail(o, "covariance summary rows"), o);
    min_eig = 1.0;
    for (const auto& row : summary.rows) {
      int n = 0;
      std::vector<double> m = read_matrix_csv((out_dir / row.back()).string(), &n);
      if (n != cfg.classes) return (fail(o, row.back() + ": wrong size"), o);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          if (m[static_cast<size_t>(i) * n + j] != m[static_cast<size_t>(j) * n + i])
            return (fail(o, row.back() + ": asymmetric at " + std::to_string(i) + "," +
                                std::to_string(j)),
                    o);
      std::vector<double> eig = symmetric_eigenvalues(m, n);
      min_eig = std::min(min_eig, eig.front());
    }
    if (min_eig < -1e-10)
      return (fail(o, "covariance min eigenvalue " + std::to_string(min_eig)), o);
  }

  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "tensor/pixel round trips exact; checkpoint OA stable at %.4f; min cov eig %.2g",
                oa_after, min_eig);
  o.detail = buf;
  o.pass = true;
  return o;
}

}  // namespace

int main() {
  g_work = fs::temp_directory_path() / "agos_acceptance";
  fs::create_directories(g_work);

  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {"gradient-oracle", gradient_oracle},
      {"conv-oracle", conv_oracle},
      {"mil-invariants", mil_invariants},
      {"receptive-field", receptive_field},
      {"differential-zero", differential_zero},
      {"toy-learning", toy_learning},
      {"schedule-fidelity", schedule_fidelity},
      {"harness-shape", harness_shape},
      {"artifact-io", artifact_io},
  };

  int failed = 0;
  int index = 0;
  for (const Criterion& c : criteria) {
    ++index;
    Outcome o;
    const double t0 = now_seconds();
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double elapsed = now_seconds() - t0;
    std::printf("[%s] %d/9 %-18s %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", index, c.name,
                o.detail.c_str(), elapsed);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }

  if (failed) {
    std::printf("%d of 9 criteria failed\n", failed);
    return 1;
  }
  std::printf("all 9 criteria passed\n");
  return 0;
}
