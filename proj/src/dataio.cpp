#include "agos/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "agos/config.hpp"
#include "agos/errors.hpp"
#include "agos/rng.hpp"

namespace fs = std::filesystem;

namespace agos {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& data) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot create file: " + path);
  f.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!f) throw IoError("write failed: " + path);
}

// Next whitespace-delimited header token, honoring '#' comments.
size_t next_token(const std::string& s, size_t pos, std::string& tok) {
  while (pos < s.size()) {
    char c = s[pos];
    if (c == '#') {
      while (pos < s.size() && s[pos] != '\n') ++pos;
    } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      ++pos;
    } else {
      break;
    }
  }
  size_t start = pos;
  while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  tok = s.substr(start, pos - start);
  return pos;
}

int parse_header_int(const std::string& tok, const std::string& path) {
  if (tok.empty()) throw IoError("truncated header: " + path);
  for (char c : tok)
    if (!std::isdigit(static_cast<unsigned char>(c)))
      throw IoError("bad header token '" + tok + "' in " + path);
  return std::stoi(tok);
}

}  // namespace

PnmImage load_pnm(const std::string& path) {
  std::string data = read_file(path);
  if (data.size() < 2 || data[0] != 'P' || (data[1] != '5' && data[1] != '6'))
    throw IoError("not a binary PGM/PPM file: " + path);
  PnmImage img;
  img.channels = data[1] == '5' ? 1 : 3;

  std::string tok;
  size_t pos = 2;
  pos = next_token(data, pos, tok);
  img.w = parse_header_int(tok, path);
  pos = next_token(data, pos, tok);
  img.h = parse_header_int(tok, path);
  pos = next_token(data, pos, tok);
  img.maxval = parse_header_int(tok, path);
  if (img.w <= 0 || img.h <= 0) throw IoError("bad image dimensions in " + path);
  if (img.maxval < 1 || img.maxval > 65535) throw IoError("bad maxval in " + path);
  if (pos >= data.size()) throw IoError("truncated payload: " + path);
  ++pos; // single whitespace byte separates header from payload

  const size_t count = static_cast<size_t>(img.w) * img.h * img.channels;
  const int bytes_per = img.maxval > 255 ? 2 : 1;
  if (data.size() - pos < count * bytes_per) throw IoError("truncated payload: " + path);

  img.px.resize(count);
  const unsigned char* p = reinterpret_cast<const unsigned char*>(data.data()) + pos;
  if (bytes_per == 1) {
    for (size_t i = 0; i < count; ++i) img.px[i] = p[i];
  } else {
    for (size_t i = 0; i < count; ++i)
      img.px[i] = static_cast<uint16_t>((p[2 * i] << 8) | p[2 * i + 1]); // big-endian
  }
  for (uint16_t v : img.px)
    if (v > img.maxval) throw IoError("sample exceeds maxval in " + path);
  return img;
}

void save_pnm(const std::string& path, const PnmImage& img) {
  if (img.channels != 1 && img.channels != 3)
    throw UsageError("save_pnm: channels must be 1 or 3");
  if (img.maxval < 1 || img.maxval > 65535) throw UsageError("save_pnm: bad maxval");
  const size_t count = static_cast<size_t>(img.w) * img.h * img.channels;
  if (img.px.size() != count) throw UsageError("save_pnm: payload size mismatch");

  std::string out;
  out += img.channels == 1 ? "P5\n" : "P6\n";
  out += std::to_string(img.w) + " " + std::to_string(img.h) + "\n";
  out += std::to_string(img.maxval) + "\n";
  if (img.maxval > 255) {
    for (uint16_t v : img.px) {
      out.push_back(static_cast<char>(v >> 8));
      out.push_back(static_cast<char>(v & 0xff));
    }
  } else {
    for (uint16_t v : img.px) out.push_back(static_cast<char>(v & 0xff));
  }
  write_file(path, out);
}

Tensor<double> pnm_to_tensor(const PnmImage& img) {
  Tensor<double> t(Shape{1, img.h, img.w, img.channels});
  const double inv = 1.0 / img.maxval;
  for (size_t i = 0; i < img.px.size(); ++i) t.v[i] = img.px[i] * inv;
  return t;
}

PnmImage tensor_to_pnm(const Tensor<double>& img, int maxval) {
  if (img.shape.n != 1) throw UsageError("tensor_to_pnm: batch must be 1");
  PnmImage out;
  out.w = static_cast<int>(img.shape.w);
  out.h = static_cast<int>(img.shape.h);
  out.channels = static_cast<int>(img.shape.c);
  out.maxval = maxval;
  out.px.resize(img.v.size());
  for (size_t i = 0; i < img.v.size(); ++i) {
    double v = std::min(1.0, std::max(0.0, img.v[i]));
    out.px[i] = static_cast<uint16_t>(std::lround(v * maxval));
  }
  return out;
}

namespace {

void put_u32le(std::string& s, uint32_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 24) & 0xff));
}

uint32_t get_u32le(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

void write_agt1_stream(std::ostream& out, const RawTensor& t) {
  if (t.dtype != 0 && t.dtype != 1) throw UsageError("agt1: dtype must be 0 (f32) or 1 (f64)");
  if (t.dims.empty() || t.dims.size() > 8) throw UsageError("agt1: rank must be 1..8");
  if (static_cast<int64_t>(t.values.size()) != t.numel())
    throw UsageError("agt1: value count does not match dims");

  std::string buf = "AGT1";
  buf.push_back(static_cast<char>(t.dtype));
  buf.push_back(static_cast<char>(t.dims.size()));
  for (uint32_t d : t.dims) put_u32le(buf, d);
  if (t.dtype == 0) {
    for (double v : t.values) {
      float f = static_cast<float>(v);
      uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_u32le(buf, bits);
    }
  } else {
    for (double v : t.values) {
      uint64_t bits;
      std::memcpy(&bits, &v, 8);
      put_u32le(buf, static_cast<uint32_t>(bits & 0xffffffffu));
      put_u32le(buf, static_cast<uint32_t>(bits >> 32));
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("agt1: stream write failed");
}

RawTensor read_agt1_stream(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "AGT1", 4) != 0)
    throw IoError("agt1: bad magic");
  unsigned char hdr[2];
  if (!in.read(reinterpret_cast<char*>(hdr), 2)) throw IoError("agt1: truncated header");
  RawTensor t;
  t.dtype = hdr[0];
  int rank = hdr[1];
  if (t.dtype != 0 && t.dtype != 1) throw IoError("agt1: unknown dtype code");
  if (rank < 1 || rank > 8) throw IoError("agt1: bad rank");
  std::vector<unsigned char> dimbuf(static_cast<size_t>(rank) * 4);
  if (!in.read(reinterpret_cast<char*>(dimbuf.data()),
               static_cast<std::streamsize>(dimbuf.size())))
    throw IoError("agt1: truncated dims");
  int64_t numel = 1;
  for (int i = 0; i < rank; ++i) {
    uint32_t d = get_u32le(dimbuf.data() + 4 * i);
    if (d == 0) throw IoError("agt1: zero dimension");
    t.dims.push_back(d);
    numel *= d;
    if (numel > (int64_t(1) << 31)) throw IoError("agt1: tensor too large");
  }
  const int bytes_per = t.dtype == 0 ? 4 : 8;
  std::vector<unsigned char> payload(static_cast<size_t>(numel) * bytes_per);
  if (!in.read(reinterpret_cast<char*>(payload.data()),
               static_cast<std::streamsize>(payload.size())))
    throw IoError("agt1: truncated payload");
  t.values.resize(static_cast<size_t>(numel));
  if (t.dtype == 0) {
    for (int64_t i = 0; i < numel; ++i) {
      uint32_t bits = get_u32le(payload.data() + 4 * i);
      float f;
      std::memcpy(&f, &bits, 4);
      t.values[static_cast<size_t>(i)] = f;
    }
  } else {
    for (int64_t i = 0; i < numel; ++i) {
      uint64_t lo = get_u32le(payload.data() + 8 * i);
      uint64_t hi = get_u32le(payload.data() + 8 * i + 4);
      uint64_t bits = lo | (hi << 32);
      double d;
      std::memcpy(&d, &bits, 8);
      t.values[static_cast<size_t>(i)] = d;
    }
  }
  return t;
}

RawTensor load_agt1(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open file: " + path);
  return read_agt1_stream(f);
}

void save_agt1(const std::string& path, const RawTensor& t) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot create file: " + path);
  write_agt1_stream(f, t);
}

Tensor<double> load_image(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw IoError("cannot open file: " + path);
  char magic[4] = {0, 0, 0, 0};
  probe.read(magic, 4);
  probe.close();

  if (std::memcmp(magic, "AGT1", 4) == 0) {
    RawTensor raw = load_agt1(path);
    Shape s;
    if (raw.dims.size() == 2) {
      s = Shape{1, raw.dims[0], raw.dims[1], 1};
    } else if (raw.dims.size() == 3) {
      s = Shape{1, raw.dims[0], raw.dims[1], raw.dims[2]};
    } else if (raw.dims.size() == 4) {
      if (raw.dims[0] != 1) throw IoError("image tensor must have batch 1: " + path);
      s = Shape{1, raw.dims[1], raw.dims[2], raw.dims[3]};
    } else {
      throw IoError("image tensor must be rank 2..4: " + path);
    }
    return Tensor<double>(s, std::move(raw.values));
  }
  if (magic[0] == 'P' && (magic[1] == '5' || magic[1] == '6')) return pnm_to_tensor(load_pnm(path));
  throw IoError("unrecognized image format: " + path);
}

DatasetManifest scan_dataset(const std::string& root) {
  if (!fs::is_directory(root)) throw IoError("dataset root is not a directory: " + root);
  DatasetManifest m;
  std::vector<std::string> class_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) class_dirs.push_back(e.path().filename().string());
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) throw IoError("dataset has no class directories: " + root);

  for (size_t k = 0; k < class_dirs.size(); ++k) {
    m.classes.push_back(class_dirs[k]);
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(fs::path(root) / class_dirs[k]))
      if (e.is_regular_file()) files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("class directory is empty: " + class_dirs[k]);
    for (auto& f : files) m.samples.push_back(Sample{f, static_cast<int>(k)});
  }

  Tensor<double> first = load_image(m.samples[0].path);
  m.image_h = static_cast<int>(first.shape.h);
  m.image_w = static_cast<int>(first.shape.w);
  m.channels = static_cast<int>(first.shape.c);
  return m;
}

std::pair<DatasetManifest, DatasetManifest> split_dataset(const DatasetManifest& full,
                                                          double ratio, uint64_t seed) {
  if (ratio <= 0.0 || ratio > 1.0) throw UsageError("split_dataset: ratio must be in (0, 1]");
  DatasetManifest train = full, test = full;
  train.samples.clear();
  test.samples.clear();

  Rng rng(mix_seed(seed, 0x73706c69)); // "spli"
  for (size_t k = 0; k < full.classes.size(); ++k) {
    std::vector<size_t> idx;
    for (size_t i = 0; i < full.samples.size(); ++i)
      if (full.samples[i].label == static_cast<int>(k)) idx.push_back(i);
    rng.shuffle(idx);
    size_t n_train = static_cast<size_t>(
        std::ceil(ratio * static_cast<double>(idx.size()) - 1e-9));
    n_train = std::min(n_train, idx.size());
    std::vector<size_t> tr(idx.begin(), idx.begin() + static_cast<int64_t>(n_train));
    std::vector<size_t> te(idx.begin() + static_cast<int64_t>(n_train), idx.end());
    std::sort(tr.begin(), tr.end());
    std::sort(te.begin(), te.end());
    for (size_t i : tr) train.samples.push_back(full.samples[i]);
    for (size_t i : te) test.samples.push_back(full.samples[i]);
  }
  return {train, test};
}

namespace {

// Class-defining object archetypes; identity is shape alone.
void draw_shape(std::vector<double>& buf, int H, int W, int kind, int cx, int cy, int size,
                double intensity, int grid_down, WeakInstanceLabels* weak) {
  const int r = size / 2;
  const int thick = std::max(1, r / 3);
  for (int y = cy - r; y <= cy + r; ++y) {
    if (y < 0 || y >= H) continue;
    for (int x = cx - r; x <= cx + r; ++x) {
      if (x < 0 || x >= W) continue;
      int dx = x - cx, dy = y - cy;
      bool on = false;
      switch (kind % 6) {
        case 0: on = true; break;                                  // filled square
        case 1: on = dx * dx + dy * dy <= r * r; break;            // disk
        case 2: on = std::abs(dx) <= thick || std::abs(dy) <= thick; break; // plus
        case 3: on = std::max(std::abs(dx), std::abs(dy)) >= r - thick; break; // ring
        case 4: on = std::abs(std::abs(dx) - std::abs(dy)) <= thick; break;    // x-cross
        case 5: on = std::abs(dx) * 2 <= (dy + r); break;          // triangle
      }
      if (!on) continue;
      buf[static_cast<size_t>(y) * W + x] = intensity;
      if (weak) {
        int gy = y / grid_down, gx = x / grid_down;
        if (gy < weak->grid_h && gx < weak->grid_w)
          weak->labels[static_cast<size_t>(gy) * weak->grid_w + gx] = 1;
      }
    }
  }
}

void draw_distractor(std::vector<double>& buf, int H, int W, Rng& rng) {
  double intensity = 0.35 + 0.2 * rng.uniform();
  int kind = static_cast<int>(rng.uniform_int(0, 2));
  int x = static_cast<int>(rng.uniform_int(0, W - 1));
  int y = static_cast<int>(rng.uniform_int(0, H - 1));
  int len = static_cast<int>(rng.uniform_int(3, 8));
  auto put = [&](int yy, int xx) {
    if (yy >= 0 && yy < H && xx >= 0 && xx < W)
      buf[static_cast<size_t>(yy) * W + xx] = intensity;
  };
  if (kind == 0) { // dot
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) put(y + dy, x + dx);
  } else if (kind == 1) { // horizontal dash
    for (int d = 0; d < len; ++d) put(y, x + d);
  } else { // vertical dash
    for (int d = 0; d < len; ++d) put(y + d, x);
  }
}

}  // namespace

SynthResult synth_generate(const SyntheticSceneSpec& spec, uint64_t seed,
                           const std::string& out_dir, int grid_downsample) {
  if (spec.classes < 1) throw UsageError("synth: classes must be >= 1");
  if (spec.object_max < spec.object_min || spec.object_min < 2)
    throw UsageError("synth: bad object size range");
  if (spec.object_max > spec.image) throw UsageError("synth: objects larger than the image");
  if (grid_downsample < 1 || spec.image % grid_downsample != 0)
    throw UsageError("synth: grid downsample must divide the image size");

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + out_dir);

  const int H = spec.image, W = spec.image;
  const int grid = spec.image / grid_downsample;
  SynthResult result;
  result.manifest.image_h = H;
  result.manifest.image_w = W;
  result.manifest.channels = 1;

  for (int k = 0; k < spec.classes; ++k) {
    char cname[16];
    std::snprintf(cname, sizeof(cname), "class%02d", k);
    result.manifest.classes.push_back(cname);
    fs::create_directories(fs::path(out_dir) / cname, ec);
    if (ec) throw IoError("cannot create class directory");

    for (int s = 0; s < spec.samples_per_class; ++s) {
      Rng rng(mix_seed(seed, static_cast<uint64_t>(k), static_cast<uint64_t>(s)));
      std::vector<double> buf(static_cast<size_t>(H) * W, 0.08);

      int n_distract = static_cast<int>(
          rng.uniform_int(spec.distractors_min, spec.distractors_max));
      for (int d = 0; d < n_distract; ++d) draw_distractor(buf, H, W, rng);

      WeakInstanceLabels weak;
      weak.grid_h = grid;
      weak.grid_w = grid;
      weak.labels.assign(static_cast<size_t>(grid) * grid, 0);
      weak.bag_category = k;

      int n_objects = 1 + (rng.uniform() < 0.3 ? 1 : 0);
      for (int o = 0; o < n_objects; ++o) {
        int size = static_cast<int>(rng.uniform_int(spec.object_min, spec.object_max));
        int r = size / 2;
        int cx = static_cast<int>(rng.uniform_int(r, W - 1 - r));
        int cy = static_cast<int>(rng.uniform_int(r, H - 1 - r));
        double intensity = 0.85 + 0.1 * rng.uniform();
        draw_shape(buf, H, W, k, cx, cy, size, intensity, grid_downsample, &weak);
      }

      if (spec.noise_std > 0)
        for (double& v : buf) v = std::min(1.0, std::max(0.0, v + spec.noise_std * rng.normal()));

      Tensor<double> img(Shape{1, H, W, 1}, std::move(buf));
      char fname[16];
      std::snprintf(fname, sizeof(fname), "s%04d.pgm", s);
      std::string path = (fs::path(out_dir) / cname / fname).string();
      save_pnm(path, tensor_to_pnm(img, 255));
      result.manifest.samples.push_back(Sample{path, k});
      result.weak_labels.push_back(std::move(weak));
    }
  }

  std::string manifest_txt;
  manifest_txt += "classes " + std::to_string(spec.classes) + "\n";
  manifest_txt += "image " + std::to_string(spec.image) + "\n";
  manifest_txt += "samples_per_class " + std::to_string(spec.samples_per_class) + "\n";
  write_file((fs::path(out_dir) / "manifest.txt").string(), manifest_txt);
  return result;
}

void export_heatmap(const Tensor<double>& map, int class_index, const std::string& path) {
  if (map.shape.n != 1) throw UsageError("export_heatmap: batch must be 1");
  const int H = static_cast<int>(map.shape.h), W = static_cast<int>(map.shape.w);
  const int C = static_cast<int>(map.shape.c);
  if (class_index >= C) throw UsageError("export_heatmap: class index out of range");

  std::vector<double> plane(static_cast<size_t>(H) * W);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double v;
      if (class_index >= 0) {
        v = map.at(0, y, x, class_index);
      } else {
        v = 0.0;
        for (int c = 0; c < C; ++c) v += map.at(0, y, x, c);
        v /= C;
      }
      plane[static_cast<size_t>(y) * W + x] = v;
    }
  }
  double lo = plane[0], hi = plane[0];
  for (double v : plane) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }

  PnmImage img;
  img.w = W;
  img.h = H;
  img.channels = 1;
  img.maxval = 255;
  img.px.resize(plane.size());
  if (hi - lo <= 0.0) {
    std::fill(img.px.begin(), img.px.end(), 0);
  } else {
    const double scale = 255.0 / (hi - lo);
    for (size_t i = 0; i < plane.size(); ++i)
      img.px[i] = static_cast<uint16_t>(std::lround((plane[i] - lo) * scale));
  }
  save_pnm(path, img);
}

std::string csv_double(double x) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return buf;
}

void write_csv(const std::string& path, const Csv& csv) {
  std::string out;
  for (size_t i = 0; i < csv.header.size(); ++i) {
    if (i) out += ",";
    out += csv.header[i];
  }
  out += "\n";
  for (const auto& row : csv.rows) {
    if (row.size() != csv.header.size())
      throw UsageError("write_csv: row width does not match header");
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out += ",";
      out += row[i];
    }
    out += "\n";
  }
  write_file(path, out);
}

Csv read_csv(const std::string& path) {
  std::string data = read_file(path);
  Csv csv;
  std::stringstream ss(data);
  std::string line;
  bool first = true;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (line.back() == ',') fields.push_back("");
    if (first) {
      csv.header = std::move(fields);
      first = false;
    } else {
      csv.rows.push_back(std::move(fields));
    }
  }
  if (first) throw IoError("read_csv: empty file: " + path);
  return csv;
}

// Matrix artifacts carry round-trip-exact values (unlike report CSVs, which
// round to 9 digits): downstream symmetry/eigenvalue checks must see the
// matrix that was computed, not a rounded cousin.
void write_matrix_csv(const std::string& path, const std::vector<double>& m, int n) {
  if (static_cast<int>(m.size()) != n * n) throw UsageError("write_matrix_csv: not square");
  std::string out;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j) out += ",";
      out += format_double(m[static_cast<size_t>(i) * n + j]);
    }
    out += "\n";
  }
  write_file(path, out);
}

std::vector<double> read_matrix_csv(const std::string& path, int* n_out) {
  std::string data = read_file(path);
  std::vector<double> m;
  std::stringstream ss(data);
  std::string line;
  int rows = 0;
  int cols = -1;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string field;
    int c = 0;
    while (std::getline(ls, field, ',')) {
      m.push_back(std::stod(field));
      ++c;
    }
    if (cols < 0) cols = c;
    if (c != cols) throw IoError("read_matrix_csv: ragged rows in " + path);
    ++rows;
  }
  if (rows != cols) throw IoError("read_matrix_csv: matrix is not square in " + path);
  if (n_out) *n_out = rows;
  return m;
}

}  // namespace agos
