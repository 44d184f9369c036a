#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "agos/rng.hpp"
#include "agos/tape.hpp"
#include "agos/tensor.hpp"

// Differentiable kernels. Every op validates shapes, computes the forward
// value eagerly, and records a backward closure on the tape. Kernels are
// single-threaded with fixed iteration order, so gradients are bitwise
// reproducible for a given seed and config.

namespace agos {

namespace detail {

// Output spatial size for "same" zero padding: pad = dilation*(K-1)/2 per
// side, so stride 1 preserves H and stride s yields ceil(H/s) for odd K.
inline int64_t conv_out_size(int64_t in, int64_t k, int64_t dilation, int64_t stride) {
  int64_t pad = dilation * (k - 1) / 2;
  return (in + 2 * pad - ((k - 1) * dilation + 1)) / stride + 1;
}

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& in, const Tensor<T>& w, const Tensor<T>& b,
                         int64_t dilation, int64_t stride) {
  const int64_t N = in.shape.n, H = in.shape.h, W = in.shape.w, Cin = in.shape.c;
  const int64_t Kh = w.shape.n, Kw = w.shape.h, Cout = w.shape.c;
  const int64_t ph = dilation * (Kh - 1) / 2, pw = dilation * (Kw - 1) / 2;
  const int64_t Ho = conv_out_size(H, Kh, dilation, stride);
  const int64_t Wo = conv_out_size(W, Kw, dilation, stride);

  Tensor<T> out(Shape{N, Ho, Wo, Cout});
  const T* inp = in.data();
  const T* wp = w.data();
  const T* bp = b.data();
  T* op = out.data();

  for (int64_t n = 0; n < N; ++n) {
    for (int64_t oh = 0; oh < Ho; ++oh) {
      for (int64_t ow = 0; ow < Wo; ++ow) {
        T* orow = op + ((n * Ho + oh) * Wo + ow) * Cout;
        for (int64_t co = 0; co < Cout; ++co) orow[co] = bp[co];
        for (int64_t kh = 0; kh < Kh; ++kh) {
          int64_t ih = oh * stride - ph + kh * dilation;
          if (ih < 0 || ih >= H) continue;
          for (int64_t kw = 0; kw < Kw; ++kw) {
            int64_t iw = ow * stride - pw + kw * dilation;
            if (iw < 0 || iw >= W) continue;
            const T* irow = inp + ((n * H + ih) * W + iw) * Cin;
            const T* wrow = wp + (kh * Kw + kw) * Cin * Cout;
            for (int64_t ci = 0; ci < Cin; ++ci) {
              T a = irow[ci];
              const T* wcol = wrow + ci * Cout;
              for (int64_t co = 0; co < Cout; ++co) orow[co] += a * wcol[co];
            }
          }
        }
      }
    }
  }
  return out;
}

// Scatters d(loss)/d(out) into whichever of gin/gw/gb are non-null.
// Accumulates (+=): buffers may already hold contributions from other uses.
template <typename T>
void conv2d_backward(const Tensor<T>& in, const Tensor<T>& w, const Tensor<T>& gout,
                     int64_t dilation, int64_t stride, std::vector<T>* gin, std::vector<T>* gw,
                     std::vector<T>* gb) {
  const int64_t N = in.shape.n, H = in.shape.h, W = in.shape.w, Cin = in.shape.c;
  const int64_t Kh = w.shape.n, Kw = w.shape.h, Cout = w.shape.c;
  const int64_t ph = dilation * (Kh - 1) / 2, pw = dilation * (Kw - 1) / 2;
  const int64_t Ho = gout.shape.h, Wo = gout.shape.w;

  const T* inp = in.data();
  const T* wp = w.data();
  const T* gp = gout.data();

  if (gb) {
    T* gbp = gb->data();
    for (int64_t n = 0; n < N; ++n)
      for (int64_t oh = 0; oh < Ho; ++oh)
        for (int64_t ow = 0; ow < Wo; ++ow) {
          const T* grow = gp + ((n * Ho + oh) * Wo + ow) * Cout;
          for (int64_t co = 0; co < Cout; ++co) gbp[co] += grow[co];
        }
  }

  for (int64_t n = 0; n < N; ++n) {
    for (int64_t oh = 0; oh < Ho; ++oh) {
      for (int64_t ow = 0; ow < Wo; ++ow) {
        const T* grow = gp + ((n * Ho + oh) * Wo + ow) * Cout;
        for (int64_t kh = 0; kh < Kh; ++kh) {
          int64_t ih = oh * stride - ph + kh * dilation;
          if (ih < 0 || ih >= H) continue;
          for (int64_t kw = 0; kw < Kw; ++kw) {
            int64_t iw = ow * stride - pw + kw * dilation;
            if (iw < 0 || iw >= W) continue;
            const int64_t ioff = ((n * H + ih) * W + iw) * Cin;
            const int64_t woff = (kh * Kw + kw) * Cin * Cout;
            if (gw) {
              T* gwp = gw->data() + woff;
              const T* irow = inp + ioff;
              for (int64_t ci = 0; ci < Cin; ++ci) {
                T a = irow[ci];
                T* gwcol = gwp + ci * Cout;
                for (int64_t co = 0; co < Cout; ++co) gwcol[co] += a * grow[co];
              }
            }
            if (gin) {
              T* girow = gin->data() + ioff;
              const T* wrow = wp + woff;
              for (int64_t ci = 0; ci < Cin; ++ci) {
                const T* wcol = wrow + ci * Cout;
                T s = T(0);
                for (int64_t co = 0; co < Cout; ++co) s += wcol[co] * grow[co];
                girow[ci] += s;
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void check_conv_args(const Tensor<T>& in, const Tensor<T>& w, const Tensor<T>& b, int64_t dilation,
                     int64_t stride) {
  if (dilation < 1) throw UsageError("conv2d: dilation must be >= 1");
  if (stride < 1) throw UsageError("conv2d: stride must be >= 1");
  if (w.shape.n % 2 == 0 || w.shape.h % 2 == 0)
    throw UsageError("conv2d: kernel extent must be odd, got " + w.shape.str());
  if (in.shape.c != w.shape.w)
    throw UsageError("conv2d: input channels " + std::to_string(in.shape.c) +
                     " do not match kernel input channels " + std::to_string(w.shape.w));
  Shape want_bias{1, 1, 1, w.shape.c};
  if (!(b.shape == want_bias))
    throw UsageError("conv2d: bias shape must be " + want_bias.str() + ", got " + b.shape.str());
}

}  // namespace detail

// Dilated 2D convolution, "same" zero padding. Kernel layout (Kh,Kw,Cin,Cout),
// bias (1,1,1,Cout). Stride 1 everywhere except the backbone stem.
template <typename T>
Var<T> conv2d(Tape<T>& tape, Var<T> input, Var<T> weight, Var<T> bias, int dilation,
              int stride = 1) {
  const Tensor<T>& in = tape.value(input);
  const Tensor<T>& w = tape.value(weight);
  const Tensor<T>& b = tape.value(bias);
  detail::check_conv_args(in, w, b, dilation, stride);

  Tensor<T> out = detail::conv2d_forward(in, w, b, dilation, stride);
  bool rg = tape.requires_grad(input) || tape.requires_grad(weight) || tape.requires_grad(bias);

  Var<T> out_var = tape.emplace(OpKind::Conv2d, {input.id, weight.id, bias.id}, std::move(out),
                                nullptr, rg);
  if (rg) {
    tape.set_backward(out_var, [out_id = out_var.id, in_id = input.id, w_id = weight.id,
                                b_id = bias.id, dilation, stride](Tape<T>& t) {
      const Tensor<T>& gout = t.grad(Var<T>{out_id});
      const Tensor<T>& inv = t.value(in_id);
      const Tensor<T>& wv = t.value(w_id);
      std::vector<T>* gin = t.requires_grad(Var<T>{in_id}) ? &t.grad_data(in_id) : nullptr;
      std::vector<T>* gw = t.requires_grad(Var<T>{w_id}) ? &t.grad_data(w_id) : nullptr;
      std::vector<T>* gb = t.requires_grad(Var<T>{b_id}) ? &t.grad_data(b_id) : nullptr;
      detail::conv2d_backward(inv, wv, gout, dilation, stride, gin, gw, gb);
    });
  }
  return out_var;
}

// Pointwise convolution: a per-position matrix multiply. Kernel (1,1,Cin,Cout).
template <typename T>
Var<T> conv1x1(Tape<T>& tape, Var<T> input, Var<T> weight, Var<T> bias) {
  const Tensor<T>& in = tape.value(input);
  const Tensor<T>& w = tape.value(weight);
  const Tensor<T>& b = tape.value(bias);
  if (w.shape.n != 1 || w.shape.h != 1)
    throw UsageError("conv1x1: kernel must be 1x1, got " + w.shape.str());
  detail::check_conv_args(in, w, b, 1, 1);

  const int64_t P = in.shape.n * in.shape.h * in.shape.w;
  const int64_t Cin = in.shape.c, Cout = w.shape.c;
  Tensor<T> out(Shape{in.shape.n, in.shape.h, in.shape.w, Cout});
  {
    const T* inp = in.data();
    const T* wp = w.data();
    const T* bp = b.data();
    T* op = out.data();
    for (int64_t p = 0; p < P; ++p) {
      const T* irow = inp + p * Cin;
      T* orow = op + p * Cout;
      for (int64_t co = 0; co < Cout; ++co) orow[co] = bp[co];
      for (int64_t ci = 0; ci < Cin; ++ci) {
        T a = irow[ci];
        const T* wcol = wp + ci * Cout;
        for (int64_t co = 0; co < Cout; ++co) orow[co] += a * wcol[co];
      }
    }
  }

  bool rg = tape.requires_grad(input) || tape.requires_grad(weight) || tape.requires_grad(bias);
  Var<T> out_var =
      tape.emplace(OpKind::Conv1x1, {input.id, weight.id, bias.id}, std::move(out), nullptr, rg);
  if (rg) {
    tape.set_backward(out_var, [out_id = out_var.id, in_id = input.id, w_id = weight.id,
                                b_id = bias.id, P, Cin, Cout](Tape<T>& t) {
      const T* gp = t.grad(Var<T>{out_id}).data();
      const T* inp = t.value(in_id).data();
      const T* wp = t.value(w_id).data();
      std::vector<T>* gin = t.requires_grad(Var<T>{in_id}) ? &t.grad_data(in_id) : nullptr;
      std::vector<T>* gw = t.requires_grad(Var<T>{w_id}) ? &t.grad_data(w_id) : nullptr;
      std::vector<T>* gb = t.requires_grad(Var<T>{b_id}) ? &t.grad_data(b_id) : nullptr;
      for (int64_t p = 0; p < P; ++p) {
        const T* grow = gp + p * Cout;
        const T* irow = inp + p * Cin;
        if (gb) {
          T* gbp = gb->data();
          for (int64_t co = 0; co < Cout; ++co) gbp[co] += grow[co];
        }
        for (int64_t ci = 0; ci < Cin; ++ci) {
          const T* wcol = wp + ci * Cout;
          if (gw) {
            T* gwcol = gw->data() + ci * Cout;
            T a = irow[ci];
            for (int64_t co = 0; co < Cout; ++co) gwcol[co] += a * grow[co];
          }
          if (gin) {
            T s = T(0);
            for (int64_t co = 0; co < Cout; ++co) s += wcol[co] * grow[co];
            (*gin)[p * Cin + ci] += s;
          }
        }
      }
    });
  }
  return out_var;
}

// Elementwise |a - b|; the subgradient at ties is 0.
template <typename T>
Var<T> abs_diff(Tape<T>& tape, Var<T> a, Var<T> b) {
  const Tensor<T>& av = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  if (!(av.shape == bv.shape))
    throw UsageError("abs_diff: shape mismatch " + av.shape.str() + " vs " + bv.shape.str());
  Tensor<T> out(av.shape);
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = std::abs(av.v[i] - bv.v[i]);

  bool rg = tape.requires_grad(a) || tape.requires_grad(b);
  Var<T> out_var = tape.emplace(OpKind::AbsDiff, {a.id, b.id}, std::move(out), nullptr, rg);
  if (rg) {
    tape.set_backward(out_var, [out_id = out_var.id, a_id = a.id, b_id = b.id](Tape<T>& t) {
      const Tensor<T>& g = t.grad(Var<T>{out_id});
      const Tensor<T>& av2 = t.value(a_id);
      const Tensor<T>& bv2 = t.value(b_id);
      std::vector<T>* ga = t.requires_grad(Var<T>{a_id}) ? &t.grad_data(a_id) : nullptr;
      std::vector<T>* gb = t.requires_grad(Var<T>{b_id}) ? &t.grad_data(b_id) : nullptr;
      for (size_t i = 0; i < g.v.size(); ++i) {
        T d = av2.v[i] - bv2.v[i];
        T s = (d > T(0)) ? T(1) : (d < T(0) ? T(-1) : T(0));
        if (ga) (*ga)[i] += g.v[i] * s;
        if (gb) (*gb)[i] -= g.v[i] * s;
      }
    });
  }
  return out_var;
}

// Mean over the spatial extent: (N,H,W,C) -> (N,1,1,C). Compensated summation
// keeps the result invariant under spatial permutations of the input.
template <typename T>
Var<T> global_avg_pool(Tape<T>& tape, Var<T> x) {
  const Tensor<T>& in = tape.value(x);
  const int64_t N = in.shape.n, H = in.shape.h, W = in.shape.w, C = in.shape.c;
  Tensor<T> out(Shape{N, 1, 1, C});
  {
    std::vector<double> acc(static_cast<size_t>(C));
    std::vector<double> comp(static_cast<size_t>(C));
    const T* inp = in.data();
    const double inv = 1.0 / static_cast<double>(H * W);
    for (int64_t n = 0; n < N; ++n) {
      std::fill(acc.begin(), acc.end(), 0.0);
      std::fill(comp.begin(), comp.end(), 0.0);
      const T* base = inp + n * H * W * C;
      for (int64_t p = 0; p < H * W; ++p) {
        const T* row = base + p * C;
        for (int64_t c = 0; c < C; ++c) {
          double y = static_cast<double>(row[c]) - comp[c];
          double tsum = acc[c] + y;
          comp[c] = (tsum - acc[c]) - y;
          acc[c] = tsum;
        }
      }
      for (int64_t c = 0; c < C; ++c) out.at(n, 0, 0, c) = static_cast<T>(acc[c] * inv);
    }
  }

  bool rg = tape.requires_grad(x);
  Var<T> out_var = tape.emplace(OpKind::GlobalAvgPool, {x.id}, std::move(out), nullptr, rg);
  if (rg) {
    tape.set_backward(out_var, [out_id = out_var.id, x_id = x.id, N, H, W, C](Tape<T>& t) {
      const Tensor<T>& g = t.grad(Var<T>{out_id});
      std::vector<T>& gin = t.grad_data(x_id);
      const T inv = static_cast<T>(1.0 / static_cast<double>(H * W));
      for (int64_t n = 0; n < N; ++n)
        for (int64_t p = 0; p < H * W; ++p)
          for (int64_t c = 0; c < C; ++c)
            gin[static_cast<size_t>((n * H * W + p) * C + c)] += g.at(n, 0, 0, c) * inv;
    });
  }
  return out_var;
}

// Softmax over the channel axis at every (n,h,w) position, max-shifted for
// stability. Internal math in double.
template <typename T>
Var<T> softmax(Tape<T>& tape, Var<T> x) {
  const Tensor<T>& in = tape.value(x);
  const int64_t P = in.shape.n * in.shape.h * in.shape.w;
  const int64_t C = in.shape.c;
  if (C < 1) throw UsageError("softmax: empty channel axis");
  Tensor<T> out(in.shape);
  for (int64_t p = 0; p < P; ++p) {
    const T* row = in.data() + p * C;
    T* orow = out.data() + p * C;
    double m = static_cast<double>(row[0]);
    for (int64_t c = 1; c < C; ++c) m = std::max(m, static_cast<double>(row[c]));
    double s = 0.0;
    for (int64_t c = 0; c < C; ++c) {
      double e = std::exp(static_cast<double>(row[c]) - m);
      orow[c] = static_cast<T>(e);
      s += e;
    }
    double invs = 1.0 / s;
    for (int64_t c = 0; c < C; ++c) orow[c] = static_cast<T>(static_cast<double>(orow[c]) * invs);
  }

  bool rg = tape.requires_grad(x);
  Var<T> out_var = tape.emplace(OpKind::Softmax, {x.id}, std::move(out), nullptr, rg);
  if (rg) {
    tape.set_backward(out_var, [out_id = out_var.id, x_id = x.id, P, C](Tape<T>& t) {
      const Tensor<T>& p = t.value(out_id);
      const Tensor<T>& g = t.grad(Var<T>{out_id});
      std::vector<T>& gin = t.grad_data(x_id);
      for (int64_t r = 0; r < P; ++r) {
        const T* prow = p.data() + r * C;
        const T* grow = g.data() + r * C;
        double dot = 0.0;
        for (int64_t c = 0; c < C; ++c)
          dot += static_cast<double>(grow[c]) * static_cast<double>(prow[c]);
        for (int64_t c = 0; c < C; ++c)
          gin[static_cast<size_t>(r * C + c)] +=
              static_cast<T>(static_cast<double>(prow[c]) * (static_cast<double>(grow[c]) - dot));
      }
    });
  }
  return out_var;
}

// Class-balanced binary cross entropy over a probability vector:
//   l = -(1/C) * sum_i [ t_i*log(p_i) + (1-t_i)*log(1-p_i) ],
// p clamped to [eps, 1-eps] with eps = 1e-12, averaged over the batch.
// Input must be (N,1,1,C); labels give the true class index per batch row.
inline constexpr double kCrossEntropyEps = 1e-12;

template <typename T>
Var<T> cross_entropy(Tape<T>& tape, Var<T> probs, std::vector<int> labels) {
  constexpr double kEps = kCrossEntropyEps;
  const Tensor<T>& p = tape.value(probs);
  if (p.shape.h != 1 || p.shape.w != 1)
    throw UsageError("cross_entropy: expected (N,1,1,C) probabilities, got " + p.shape.str());
  const int64_t N = p.shape.n, C = p.shape.c;
  if (static_cast<int64_t>(labels.size()) != N)
    throw UsageError("cross_entropy: label count does not match batch size");
  for (int lb : labels)
    if (lb < 0 || lb >= C) throw UsageError("cross_entropy: label out of range");

  double total = 0.0;
  for (int64_t n = 0; n < N; ++n) {
    double l = 0.0;
    for (int64_t c = 0; c < C; ++c) {
      double pc = std::min(1.0 - kEps, std::max(kEps, static_cast<double>(p.at(n, 0, 0, c))));
      double t = (c == labels[static_cast<size_t>(n)]) ? 1.0 : 0.0;
      l -= t * std::log(pc) + (1.0 - t) * std::log(1.0 - pc);
    }
    total += l / static_cast<double>(C);
  }
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(total / static_cast<double>(N)));

  bool rg = tape.requires_grad(probs);
  Var<T> out_var = tape.emplace(OpKind::CrossEntropy, {probs.id}, std::move(out), nullptr, rg);
  if (rg) {
    tape.set_backward(out_var, [out_id = out_var.id, p_id = probs.id,
                                labels = std::move(labels), N, C](Tape<T>& t) {
      const double gscale = static_cast<double>(t.grad(Var<T>{out_id}).v[0]);
      const Tensor<T>& pv = t.value(p_id);
      std::vector<T>& gin = t.grad_data(p_id);
      const double norm = gscale / (static_cast<double>(N) * static_cast<double>(C));
      for (int64_t n = 0; n < N; ++n) {
        for (int64_t c = 0; c < C; ++c) {
          double pc = static_cast<double>(pv.at(n, 0, 0, c));
          if (pc <= kCrossEntropyEps || pc >= 1.0 - kCrossEntropyEps) continue;  // clamped: flat
          double tlab = (c == labels[static_cast<size_t>(n)]) ? 1.0 : 0.0;
          double d = -(tlab / pc) + (1.0 - tlab) / (1.0 - pc);
          gin[static_cast<size_t>(n * C + c)] += static_cast<T>(norm * d);
        }
      }
    });
  }
  return out_var;
}

// Inverted dropout: keeps each element with probability 1-rate and scales by
// 1/(1-rate), so the expected value is unchanged. Identity when not training
// or rate == 0. The mask is a pure function of the seed.
template <typename T>
Var<T> dropout(Tape<T>& tape, Var<T> x, double rate, bool training, uint64_t seed) {
  if (rate < 0.0 || rate >= 1.0) throw UsageError("dropout: rate must be in [0, 1)");
  if (!training || rate == 0.0) return x;

  const Tensor<T>& in = tape.value(x);
  Rng rng(seed);
  std::vector<uint8_t> keep(in.v.size());
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  Tensor<T> out(in.shape);
  for (size_t i = 0; i < in.v.size(); ++i) {
    keep[i] = rng.uniform() >= rate ? 1 : 0;
    out.v[i] = keep[i] ? in.v[i] * scale : T(0);
  }

  bool rg = tape.requires_grad(x);
  Var<T> out_var = tape.emplace(OpKind::Dropout, {x.id}, std::move(out), nullptr, rg);
  if (rg) {
    tape.set_backward(out_var,
                      [out_id = out_var.id, x_id = x.id, keep = std::move(keep), scale](Tape<T>& t) {
                        const Tensor<T>& g = t.grad(Var<T>{out_id});
                        std::vector<T>& gin = t.grad_data(x_id);
                        for (size_t i = 0; i < g.v.size(); ++i)
                          if (keep[i]) gin[i] += g.v[i] * scale;
                      });
  }
  return out_var;
}

template <typename T>
Var<T> relu(Tape<T>& tape, Var<T> x) {
  const Tensor<T>& in = tape.value(x);
  Tensor<T> out(in.shape);
  for (size_t i = 0; i < in.v.size(); ++i) out.v[i] = in.v[i] > T(0) ? in.v[i] : T(0);

  bool rg = tape.requires_grad(x);
  Var<T> out_var = tape.emplace(OpKind::Relu, {x.id}, std::move(out), nullptr, rg);
  if (rg) {
    tape.set_backward(out_var, [out_id = out_var.id, x_id = x.id](Tape<T>& t) {
      const Tensor<T>& g = t.grad(Var<T>{out_id});
      const Tensor<T>& in2 = t.value(x_id);
      std::vector<T>& gin = t.grad_data(x_id);
      for (size_t i = 0; i < g.v.size(); ++i)
        if (in2.v[i] > T(0)) gin[i] += g.v[i];
    });
  }
  return out_var;
}

template <typename T>
Var<T> add(Tape<T>& tape, Var<T> a, Var<T> b) {
  const Tensor<T>& av = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  if (!(av.shape == bv.shape))
    throw UsageError("add: shape mismatch " + av.shape.str() + " vs " + bv.shape.str());
  Tensor<T> out(av.shape);
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = av.v[i] + bv.v[i];

  bool rg = tape.requires_grad(a) || tape.requires_grad(b);
  Var<T> out_var = tape.emplace(OpKind::Add, {a.id, b.id}, std::move(out), nullptr, rg);
  if (rg) {
    tape.set_backward(out_var, [out_id = out_var.id, a_id = a.id, b_id = b.id](Tape<T>& t) {
      const Tensor<T>& g = t.grad(Var<T>{out_id});
      if (t.requires_grad(Var<T>{a_id})) {
        std::vector<T>& ga = t.grad_data(a_id);
        for (size_t i = 0; i < g.v.size(); ++i) ga[i] += g.v[i];
      }
      if (t.requires_grad(Var<T>{b_id})) {
        std::vector<T>& gb = t.grad_data(b_id);
        for (size_t i = 0; i < g.v.size(); ++i) gb[i] += g.v[i];
      }
    });
  }
  return out_var;
}

template <typename T>
Var<T> scale(Tape<T>& tape, Var<T> x, double k) {
  const Tensor<T>& in = tape.value(x);
  Tensor<T> out(in.shape);
  const T kt = static_cast<T>(k);
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = in.v[i] * kt;

  bool rg = tape.requires_grad(x);
  Var<T> out_var = tape.emplace(OpKind::Scale, {x.id}, std::move(out), nullptr, rg);
  if (rg) {
    tape.set_backward(out_var, [out_id = out_var.id, x_id = x.id, kt](Tape<T>& t) {
      const Tensor<T>& g = t.grad(Var<T>{out_id});
      std::vector<T>& gin = t.grad_data(x_id);
      for (size_t i = 0; i < g.v.size(); ++i) gin[i] += g.v[i] * kt;
    });
  }
  return out_var;
}

template <typename T>
Var<T> sum(Tape<T>& tape, Var<T> x) {
  const Tensor<T>& in = tape.value(x);
  double acc = 0.0, comp = 0.0;
  for (T e : in.v) {
    double y = static_cast<double>(e) - comp;
    double tsum = acc + y;
    comp = (tsum - acc) - y;
    acc = tsum;
  }
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc));

  bool rg = tape.requires_grad(x);
  Var<T> out_var = tape.emplace(OpKind::Sum, {x.id}, std::move(out), nullptr, rg);
  if (rg) {
    tape.set_backward(out_var, [out_id = out_var.id, x_id = x.id](Tape<T>& t) {
      const T g = t.grad(Var<T>{out_id}).v[0];
      std::vector<T>& gin = t.grad_data(x_id);
      for (size_t i = 0; i < gin.size(); ++i) gin[i] += g;
    });
  }
  return out_var;
}

// Sum of squared entries; the building block of the weight-decay penalty.
template <typename T>
Var<T> sum_squares(Tape<T>& tape, Var<T> x) {
  const Tensor<T>& in = tape.value(x);
  double acc = 0.0, comp = 0.0;
  for (T e : in.v) {
    double d = static_cast<double>(e);
    double y = d * d - comp;
    double tsum = acc + y;
    comp = (tsum - acc) - y;
    acc = tsum;
  }
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc));

  bool rg = tape.requires_grad(x);
  Var<T> out_var = tape.emplace(OpKind::SumSquares, {x.id}, std::move(out), nullptr, rg);
  if (rg) {
    tape.set_backward(out_var, [out_id = out_var.id, x_id = x.id](Tape<T>& t) {
      const T g = t.grad(Var<T>{out_id}).v[0];
      const Tensor<T>& in2 = t.value(x_id);
      std::vector<T>& gin = t.grad_data(x_id);
      for (size_t i = 0; i < gin.size(); ++i) gin[i] += T(2) * in2.v[i] * g;
    });
  }
  return out_var;
}

}  // namespace agos
