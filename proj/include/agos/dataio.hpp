#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "agos/tensor.hpp"

namespace agos {

// ---- PGM (P5) / PPM (P6), binary variants ----------------------------------
// Samples are scaled to [0,1] on load; maxval up to 65535 (two-byte samples
// are big-endian per the format).

struct PnmImage {
  int w = 0, h = 0, channels = 0, maxval = 255;
  std::vector<uint16_t> px; // row-major, channel-interleaved
};

PnmImage load_pnm(const std::string& path);
void save_pnm(const std::string& path, const PnmImage& img);

// (1,H,W,C) in [0,1] from integer samples, and back (round to nearest).
Tensor<double> pnm_to_tensor(const PnmImage& img);
PnmImage tensor_to_pnm(const Tensor<double>& img, int maxval);

// ---- AGT1 raw tensor container ----------------------------------------------
// magic "AGT1" | u8 dtype (0 = f32, 1 = f64) | u8 rank | rank x u32 LE dims |
// payload, little-endian row-major.

struct RawTensor {
  int dtype = 0; // 0 f32, 1 f64
  std::vector<uint32_t> dims;
  std::vector<double> values; // lossless for both payload types

  int64_t numel() const {
    int64_t n = 1;
    for (uint32_t d : dims) n *= d;
    return n;
  }
};

RawTensor load_agt1(const std::string& path);
void save_agt1(const std::string& path, const RawTensor& t);
RawTensor read_agt1_stream(std::istream& in);
void write_agt1_stream(std::ostream& out, const RawTensor& t);

// ---- images of any supported format ----------------------------------------

// Dispatches on content: PGM/PPM scaled by maxval, AGT1 taken as-is
// (rank 2 -> (1,H,W,1), rank 3 -> (1,H,W,C), rank 4 -> as stored with N = 1).
Tensor<double> load_image(const std::string& path);

// ---- datasets ----------------------------------------------------------------

struct Sample {
  std::string path;
  int label = 0;
};

// Scene dataset: one subdirectory per class (lexicographic order = class
// index), image files sorted by name within each class.
struct DatasetManifest {
  std::vector<std::string> classes;
  std::vector<Sample> samples;
  int image_h = 0, image_w = 0, channels = 0;
};

DatasetManifest scan_dataset(const std::string& root);

// Per-class stratified split: shuffle each class's samples with the seeded
// stream, ceil(ratio * n_c) go to train. Disjoint and exhaustive.
std::pair<DatasetManifest, DatasetManifest> split_dataset(const DatasetManifest& full,
                                                          double ratio, uint64_t seed);

// ---- synthetic scenes ---------------------------------------------------------

// Weak supervision on the model's feature grid: cell = 1 iff a class-defining
// object overlaps it. The OR over these labels recovers the scene's class
// membership (bag rule).
struct WeakInstanceLabels {
  int grid_h = 0, grid_w = 0;
  std::vector<uint8_t> labels;
  int bag_category = 0;
};

struct SyntheticSceneSpec {
  int classes = 3;
  int image = 64;
  int object_min = 12, object_max = 28;
  int distractors_min = 2, distractors_max = 6;
  double noise_std = 0.03;
  int samples_per_class = 200;
};

struct SynthResult {
  DatasetManifest manifest;
  std::vector<WeakInstanceLabels> weak_labels; // parallel to manifest.samples
};

// Writes <out_dir>/class<k>/s<idx>.pgm plus manifest.txt. Class identity is
// carried by object shape only; distractor statistics and intensities are
// class-independent. grid_downsample maps pixels to weak-label cells.
SynthResult synth_generate(const SyntheticSceneSpec& spec, uint64_t seed,
                           const std::string& out_dir, int grid_downsample);

// ---- heatmaps ------------------------------------------------------------------

// One channel (or the channel mean when class_index < 0) of a (1,H,W,C) map,
// min-max normalized to [0,255], written as binary PGM at native resolution.
// A constant map writes all zeros.
void export_heatmap(const Tensor<double>& map, int class_index, const std::string& path);

// ---- CSV -----------------------------------------------------------------------

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

void write_csv(const std::string& path, const Csv& csv);
Csv read_csv(const std::string& path);
std::string csv_double(double x); // 9 significant digits

void write_matrix_csv(const std::string& path, const std::vector<double>& m, int n);
std::vector<double> read_matrix_csv(const std::string& path, int* n_out);

}  // namespace agos
