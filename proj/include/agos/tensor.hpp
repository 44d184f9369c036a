#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "agos/errors.hpp"
#include "agos/rng.hpp"

namespace agos {

// All tensors are dense row-major with a fixed rank-4 shape (N, H, W, C).
// Convolution kernels reuse the same container with the convention
// (Kh, Kw, Cin, Cout); biases are (1, 1, 1, Cout); scalars are (1, 1, 1, 1).
struct Shape {
  int64_t n = 1, h = 1, w = 1, c = 1;

  int64_t numel() const { return n * h * w * c; }
  bool operator==(const Shape&) const = default;
  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(h) + "," + std::to_string(w) + "," +
           std::to_string(c) + ")";
  }
};

template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> v;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(s), v(static_cast<size_t>(s.numel()), T(0)) {}
  Tensor(Shape s, std::vector<T> data) : shape(s), v(std::move(data)) {
    if (static_cast<int64_t>(v.size()) != s.numel())
      throw UsageError("tensor data size does not match shape " + s.str());
  }

  int64_t numel() const { return shape.numel(); }

  T& at(int64_t n_, int64_t h_, int64_t w_, int64_t c_) {
    return v[static_cast<size_t>(((n_ * shape.h + h_) * shape.w + w_) * shape.c + c_)];
  }
  const T& at(int64_t n_, int64_t h_, int64_t w_, int64_t c_) const {
    return v[static_cast<size_t>(((n_ * shape.h + h_) * shape.w + w_) * shape.c + c_)];
  }

  T* data() { return v.data(); }
  const T* data() const { return v.data(); }

  void fill(T x) { std::fill(v.begin(), v.end(), x); }

  bool all_finite() const {
    for (T x : v)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }

  static Tensor scalar(T x) {
    Tensor t(Shape{1, 1, 1, 1});
    t.v[0] = x;
    return t;
  }

  static Tensor normal(Shape s, double stddev, Rng& rng) {
    Tensor t(s);
    for (auto& x : t.v) x = static_cast<T>(stddev * rng.normal());
    return t;
  }

  static Tensor uniform(Shape s, double lo, double hi, Rng& rng) {
    Tensor t(s);
    for (auto& x : t.v) x = static_cast<T>(lo + (hi - lo) * rng.uniform());
    return t;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.v.resize(v.size());
    for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
    return out;
  }
};

// Index of the largest entry; ties resolve to the lowest index.
template <typename Vec>
int argmax_lowest(const Vec& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

// Numerically stable softmax over a plain vector (analysis paths; the
// differentiable op lives in ops.hpp).
inline std::vector<double> softmax_vec(const std::vector<double>& x) {
  std::vector<double> out(x.size());
  double m = x[0];
  for (double e : x) m = std::max(m, e);
  double s = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - m);
    s += out[i];
  }
  for (double& e : out) e /= s;
  return out;
}

}  // namespace agos
