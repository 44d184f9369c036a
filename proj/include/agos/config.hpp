#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace agos {

enum class Precision { Single, Double };

// Every knob the trainer, model builders, experiments, and synthetic
// generator read. Defaults are the desk-scale training recipe; config files
// are line-oriented `key = value` with `#` comments, and CLI flags override
// file values.
struct TrainConfig {
  // model
  int classes = 3;
  int in_channels = 1;

  // backbone
  int stem_channels = 16;
  int num_blocks = 2;
  int downsample = 4;
  int out_channels = 32;

  // grain stack
  int grains = 3;          // T differential branches on top of the base branch
  int grain_channels = 32; // channels of every grain feature map
  bool tie_weights = false;
  bool use_dilation = true; // dilation schedule 1,1,3,5,... vs all-1
  bool use_diff = true;     // adjacent-scale differencing vs raw conv outputs

  // loss
  double alpha = 5e-4;        // semantic-aligning term weight
  double weight_decay = 5e-4; // l2 penalty on .weight parameters
  bool enable_sealig = true;
  bool l2_in_gradient = false; // fold decay into Adam grads instead of the loss

  // optimizer / schedule
  double lr0 = 1e-4;
  double lr_decay_factor = 0.5;
  int lr_decay_every = 30;
  int epochs = 120;
  int batch_size = 32;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double dropout = 0.2;
  uint64_t seed = 1;
  int runs = 10;
  Precision precision = Precision::Single;
  double train_ratio = 0.5;
  int checkpoint_every = 0; // 0: only at the end

  // initialization
  double agos_init_std = 0.001; // grain/branch layers; backbone uses fan-in scaling

  // synthetic scene generator
  int synth_classes = 3;
  int synth_image = 64;
  int synth_object_min = 12;
  int synth_object_max = 28;
  int synth_distractors_min = 2;
  int synth_distractors_max = 6;
  double synth_noise_std = 0.03;
  int synth_samples_per_class = 200;

  // experiment harness
  std::vector<double> experiment_ratios = {0.5};

  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  // Full `key = value` snapshot, one line per key, stable order.
  std::string snapshot() const;

  void validate() const;
};

// Parses `key = value` lines into cfg. Unknown keys and malformed lines are
// usage errors; `#` starts a comment anywhere on a line.
void parse_config_text(const std::string& text, TrainConfig& cfg);
void load_config_file(const std::string& path, TrainConfig& cfg);

// Shortest decimal form that parses back to exactly the same double.
std::string format_double(double x);

}  // namespace agos
