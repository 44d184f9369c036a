#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "agos/config.hpp"
#include "agos/dataio.hpp"
#include "agos/optimizer.hpp"
#include "agos/params.hpp"

namespace agos {

// Checkpoint = three files:
//   <path>      concatenated AGT1 tensor records (params, then Adam moments)
//   <path>.idx  text index: header lines, then `tensor <name> <offset> <bytes> <dims>`
//   <path>.cfg  full config snapshot, reloadable as a config file
// Optimizer moments plus the epoch counter are enough for bitwise resume
// because all training randomness is derived per (seed, epoch, batch).

namespace detail {

template <typename T>
RawTensor to_raw(const Tensor<T>& t) {
  RawTensor raw;
  raw.dtype = std::is_same_v<T, float> ? 0 : 1;
  raw.dims = {static_cast<uint32_t>(t.shape.n), static_cast<uint32_t>(t.shape.h),
              static_cast<uint32_t>(t.shape.w), static_cast<uint32_t>(t.shape.c)};
  raw.values.assign(t.v.begin(), t.v.end());
  return raw;
}

template <typename T>
Tensor<T> from_raw(const RawTensor& raw, const std::string& name) {
  if (raw.dims.size() != 4) throw IoError("checkpoint: tensor " + name + " is not rank 4");
  const int want = std::is_same_v<T, float> ? 0 : 1;
  if (raw.dtype != want)
    throw IoError("checkpoint: precision mismatch for " + name +
                  " (stored dtype differs from requested precision)");
  Tensor<T> t(Shape{raw.dims[0], raw.dims[1], raw.dims[2], raw.dims[3]});
  for (size_t i = 0; i < raw.values.size(); ++i) t.v[i] = static_cast<T>(raw.values[i]);
  return t;
}

}  // namespace detail

template <typename T>
void save_checkpoint(const std::string& path, const ParamStore<T>& params,
                     const AdamState<T>* adam, int epoch, const TrainConfig& cfg) {
  std::ostringstream bin;
  std::ostringstream idx;
  idx << "ckpt 1\n";
  idx << "precision " << (std::is_same_v<T, float> ? "single" : "double") << "\n";
  idx << "epoch " << epoch << "\n";
  idx << "step " << (adam ? adam->step : 0) << "\n";

  auto emit = [&bin, &idx](const std::string& name, const RawTensor& raw) {
    int64_t offset = bin.tellp();
    write_agt1_stream(bin, raw);
    int64_t bytes = static_cast<int64_t>(bin.tellp()) - offset;
    idx << "tensor " << name << " " << offset << " " << bytes << " " << raw.dims[0] << "x"
        << raw.dims[1] << "x" << raw.dims[2] << "x" << raw.dims[3] << "\n";
  };

  for (const auto& [name, t] : params.all()) emit(name, detail::to_raw(t));
  if (adam) {
    for (const auto& [name, t] : adam->m) emit("m/" + name, detail::to_raw(t));
    for (const auto& [name, t] : adam->v) emit("v/" + name, detail::to_raw(t));
  }

  {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot create checkpoint file: " + path);
    std::string payload = bin.str();
    f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!f) throw IoError("checkpoint write failed: " + path);
  }
  {
    std::ofstream f(path + ".idx", std::ios::binary);
    if (!f) throw IoError("cannot create checkpoint index: " + path + ".idx");
    f << idx.str();
  }
  {
    std::ofstream f(path + ".cfg", std::ios::binary);
    if (!f) throw IoError("cannot create checkpoint config: " + path + ".cfg");
    f << cfg.snapshot();
  }
}

template <typename T>
struct Checkpoint {
  ParamStore<T> params;
  AdamState<T> adam;
  bool has_adam = false;
  int epoch = 0;
};

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
  std::ifstream idxf(path + ".idx", std::ios::binary);
  if (!idxf) throw IoError("cannot open checkpoint index: " + path + ".idx");
  std::ifstream binf(path, std::ios::binary);
  if (!binf) throw IoError("cannot open checkpoint file: " + path);

  Checkpoint<T> ck;
  std::string line;
  if (!std::getline(idxf, line) || line != "ckpt 1")
    throw IoError("checkpoint index has unknown format: " + path + ".idx");

  const std::string want_precision = std::is_same_v<T, float> ? "single" : "double";
  while (std::getline(idxf, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "precision") {
      std::string p;
      ls >> p;
      if (p != want_precision)
        throw IoError("checkpoint precision is " + p + ", expected " + want_precision);
    } else if (tag == "epoch") {
      ls >> ck.epoch;
    } else if (tag == "step") {
      ls >> ck.adam.step;
    } else if (tag == "tensor") {
      std::string name, dims;
      int64_t offset = 0, bytes = 0;
      ls >> name >> offset >> bytes >> dims;
      if (name.empty() || !ls) throw IoError("bad tensor line in checkpoint index");
      binf.seekg(offset);
      RawTensor raw = read_agt1_stream(binf);
      if (name.rfind("m/", 0) == 0) {
        ck.adam.m.emplace(name.substr(2), detail::from_raw<T>(raw, name));
        ck.has_adam = true;
      } else if (name.rfind("v/", 0) == 0) {
        ck.adam.v.emplace(name.substr(2), detail::from_raw<T>(raw, name));
        ck.has_adam = true;
      } else {
        ck.params.add(name, detail::from_raw<T>(raw, name));
      }
    } else {
      throw IoError("unknown checkpoint index entry: " + tag);
    }
  }
  return ck;
}

// Precision recorded in a checkpoint index, so the caller can dispatch
// before committing to a template instantiation.
inline Precision checkpoint_precision(const std::string& path) {
  std::ifstream idxf(path + ".idx", std::ios::binary);
  if (!idxf) throw IoError("cannot open checkpoint index: " + path + ".idx");
  std::string line;
  while (std::getline(idxf, line)) {
    std::istringstream ls(line);
    std::string tag, val;
    ls >> tag >> val;
    if (tag == "precision") {
      if (val == "single") return Precision::Single;
      if (val == "double") return Precision::Double;
      throw IoError("checkpoint precision is unknown: " + val);
    }
  }
  throw IoError("checkpoint index lacks a precision entry: " + path + ".idx");
}

}  // namespace agos
