#include "agos/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "agos/errors.hpp"

namespace agos {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

int64_t parse_int(const std::string& key, const std::string& v) {
  size_t pos = 0;
  int64_t out;
  try {
    out = std::stoll(v, &pos);
  } catch (const std::exception&) {
    throw UsageError("config: bad integer for " + key + ": '" + v + "'");
  }
  if (pos != v.size()) throw UsageError("config: bad integer for " + key + ": '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  size_t pos = 0;
  double out;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw UsageError("config: bad number for " + key + ": '" + v + "'");
  }
  if (pos != v.size()) throw UsageError("config: bad number for " + key + ": '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw UsageError("config: bad boolean for " + key + ": '" + v + "'");
}

std::vector<double> parse_double_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw UsageError("config: empty list element for " + key);
    out.push_back(parse_double(key, item));
  }
  if (out.empty()) throw UsageError("config: empty list for " + key);
  return out;
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

struct KeyEntry {
  const char* key;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

const std::vector<KeyEntry>& key_table() {
  static const std::vector<KeyEntry> table = [] {
    std::vector<KeyEntry> t;
    auto add_int = [&t](const char* k, int TrainConfig::* f) {
      t.push_back({k,
                   [k, f](TrainConfig& c, const std::string& v) {
                     c.*f = static_cast<int>(parse_int(k, v));
                   },
                   [f](const TrainConfig& c) { return std::to_string(c.*f); }});
    };
    auto add_double = [&t](const char* k, double TrainConfig::* f) {
      t.push_back({k,
                   [k, f](TrainConfig& c, const std::string& v) { c.*f = parse_double(k, v); },
                   [f](const TrainConfig& c) { return format_double(c.*f); }});
    };
    auto add_bool = [&t](const char* k, bool TrainConfig::* f) {
      t.push_back({k,
                   [k, f](TrainConfig& c, const std::string& v) { c.*f = parse_bool(k, v); },
                   [f](const TrainConfig& c) { return bool_str(c.*f); }});
    };

    add_int("model.classes", &TrainConfig::classes);
    add_int("model.in_channels", &TrainConfig::in_channels);
    add_int("backbone.stem_channels", &TrainConfig::stem_channels);
    add_int("backbone.num_blocks", &TrainConfig::num_blocks);
    add_int("backbone.downsample", &TrainConfig::downsample);
    add_int("backbone.out_channels", &TrainConfig::out_channels);
    add_int("mgp.grains", &TrainConfig::grains);
    add_int("mgp.channels", &TrainConfig::grain_channels);
    add_bool("mgp.tie_weights", &TrainConfig::tie_weights);
    add_bool("mgp.use_dilation", &TrainConfig::use_dilation);
    add_bool("mgp.use_diff", &TrainConfig::use_diff);
    add_double("loss.alpha", &TrainConfig::alpha);
    add_double("loss.weight_decay", &TrainConfig::weight_decay);
    add_bool("loss.enable_sealig", &TrainConfig::enable_sealig);
    add_bool("loss.l2_in_gradient", &TrainConfig::l2_in_gradient);
    add_double("train.lr0", &TrainConfig::lr0);
    add_double("train.lr_decay_factor", &TrainConfig::lr_decay_factor);
    add_int("train.lr_decay_every", &TrainConfig::lr_decay_every);
    add_int("train.epochs", &TrainConfig::epochs);
    add_int("train.batch_size", &TrainConfig::batch_size);
    add_double("train.adam_beta1", &TrainConfig::adam_beta1);
    add_double("train.adam_beta2", &TrainConfig::adam_beta2);
    add_double("train.adam_eps", &TrainConfig::adam_eps);
    add_double("train.dropout", &TrainConfig::dropout);
    t.push_back({"train.seed",
                 [](TrainConfig& c, const std::string& v) {
                   c.seed = static_cast<uint64_t>(parse_int("train.seed", v));
                 },
                 [](const TrainConfig& c) { return std::to_string(c.seed); }});
    add_int("train.runs", &TrainConfig::runs);
    t.push_back({"train.precision",
                 [](TrainConfig& c, const std::string& v) {
                   if (v == "single")
                     c.precision = Precision::Single;
                   else if (v == "double")
                     c.precision = Precision::Double;
                   else
                     throw UsageError("config: train.precision must be single or double");
                 },
                 [](const TrainConfig& c) {
                   return std::string(c.precision == Precision::Single ? "single" : "double");
                 }});
    add_double("train.ratio", &TrainConfig::train_ratio);
    add_int("train.checkpoint_every", &TrainConfig::checkpoint_every);
    add_double("init.agos_std", &TrainConfig::agos_init_std);
    add_int("synth.classes", &TrainConfig::synth_classes);
    add_int("synth.image", &TrainConfig::synth_image);
    add_int("synth.object_min", &TrainConfig::synth_object_min);
    add_int("synth.object_max", &TrainConfig::synth_object_max);
    add_int("synth.distractors_min", &TrainConfig::synth_distractors_min);
    add_int("synth.distractors_max", &TrainConfig::synth_distractors_max);
    add_double("synth.noise_std", &TrainConfig::synth_noise_std);
    add_int("synth.samples_per_class", &TrainConfig::synth_samples_per_class);
    t.push_back({"experiment.ratios",
                 [](TrainConfig& c, const std::string& v) {
                   c.experiment_ratios = parse_double_list("experiment.ratios", v);
                 },
                 [](const TrainConfig& c) {
                   std::string s;
                   for (size_t i = 0; i < c.experiment_ratios.size(); ++i) {
                     if (i) s += ",";
                     s += format_double(c.experiment_ratios[i]);
                   }
                   return s;
                 }});
    return t;
  }();
  return table;
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  for (int prec = 9; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
    if (std::stod(buf) == x) break;
  }
  return buf;
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  for (const auto& e : key_table()) {
    if (key == e.key) {
      e.set(*this, value);
      return;
    }
  }
  throw UsageError("config: unknown key '" + key + "'");
}

std::string TrainConfig::get(const std::string& key) const {
  for (const auto& e : key_table())
    if (key == e.key) return e.get(*this);
  throw UsageError("config: unknown key '" + key + "'");
}

const std::vector<std::string>& TrainConfig::keys() {
  static const std::vector<std::string> ks = [] {
    std::vector<std::string> v;
    for (const auto& e : key_table()) v.push_back(e.key);
    return v;
  }();
  return ks;
}

std::string TrainConfig::snapshot() const {
  std::string out;
  for (const auto& e : key_table()) {
    out += e.key;
    out += " = ";
    out += e.get(*this);
    out += "\n";
  }
  return out;
}

void TrainConfig::validate() const {
  auto positive = [](int v, const char* what) {
    if (v <= 0) throw UsageError(std::string("config: ") + what + " must be positive");
  };
  positive(classes, "model.classes");
  if (in_channels != 1 && in_channels != 3)
    throw UsageError("config: model.in_channels must be 1 or 3");
  positive(stem_channels, "backbone.stem_channels");
  positive(num_blocks, "backbone.num_blocks");
  positive(out_channels, "backbone.out_channels");
  if (downsample < 1 || (downsample & (downsample - 1)) != 0)
    throw UsageError("config: backbone.downsample must be a power of two");
  if (grains < 0) throw UsageError("config: mgp.grains must be >= 0");
  positive(grain_channels, "mgp.channels");
  if (alpha < 0) throw UsageError("config: loss.alpha must be >= 0");
  if (weight_decay < 0) throw UsageError("config: loss.weight_decay must be >= 0");
  if (lr0 <= 0) throw UsageError("config: train.lr0 must be positive");
  if (lr_decay_factor <= 0 || lr_decay_factor > 1)
    throw UsageError("config: train.lr_decay_factor must be in (0, 1]");
  positive(lr_decay_every, "train.lr_decay_every");
  positive(epochs, "train.epochs");
  positive(batch_size, "train.batch_size");
  if (dropout < 0 || dropout >= 1) throw UsageError("config: train.dropout must be in [0, 1)");
  positive(runs, "train.runs");
  if (train_ratio <= 0 || train_ratio > 1)
    throw UsageError("config: train.ratio must be in (0, 1]");
  if (checkpoint_every < 0) throw UsageError("config: train.checkpoint_every must be >= 0");
  positive(synth_classes, "synth.classes");
  positive(synth_image, "synth.image");
  if (synth_object_min < 2 || synth_object_max < synth_object_min ||
      synth_object_max > synth_image)
    throw UsageError("config: bad synth object size range");
  if (synth_distractors_min < 0 || synth_distractors_max < synth_distractors_min)
    throw UsageError("config: bad synth distractor count range");
  if (synth_noise_std < 0) throw UsageError("config: synth.noise_std must be >= 0");
  positive(synth_samples_per_class, "synth.samples_per_class");
  for (double r : experiment_ratios)
    if (r <= 0 || r > 1) throw UsageError("config: experiment.ratios entries must be in (0, 1]");
}

void parse_config_text(const std::string& text, TrainConfig& cfg) {
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("config: line " + std::to_string(lineno) + " is not 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw UsageError("config: line " + std::to_string(lineno) + " is not 'key = value'");
    cfg.set(key, value);
  }
}

void load_config_file(const std::string& path, TrainConfig& cfg) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open config file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  parse_config_text(ss.str(), cfg);
}

}  // namespace agos
