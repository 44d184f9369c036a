#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "agos/gradcheck.hpp"
#include "agos/ops.hpp"
#include "agos/rng.hpp"
#include "agos/tape.hpp"
#include "agos/tensor.hpp"
#include "oracles.hpp"

using namespace agos;

namespace {

Tensor<double> random_tensor(Shape s, uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  return Tensor<double>::uniform(s, lo, hi, rng);
}

double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  REQUIRE(a.shape == b.shape);
  double m = 0.0;
  for (size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::abs(a.v[i] - b.v[i]));
  return m;
}

double tape_scalar(Tape<double>& t, Var<double> v) { return t.value(v).v[0]; }

// Max relative error between the tape gradient of `loss_fn` w.r.t. `param`
// and central finite differences. `analytic` must be evaluated at the same
// point `param` currently holds.
double fd_check(Tensor<double>& param, const Tensor<double>& analytic,
                const std::function<double()>& loss_fn) {
  Tensor<double> fd = finite_diff_grad(param, loss_fn);
  double worst = 0.0;
  for (size_t i = 0; i < fd.v.size(); ++i)
    worst = std::max(worst, rel_error(analytic.v[i], fd.v[i]));
  return worst;
}

}  // namespace

TEST_CASE("shape indexing is row-major NHWC") {
  Tensor<double> t(Shape{2, 3, 4, 5});
  CHECK(t.numel() == 120);
  t.at(1, 2, 3, 4) = 7.0;
  CHECK(t.v[119] == 7.0);
  t.at(0, 0, 0, 1) = 3.0;
  CHECK(t.v[1] == 3.0);
  CHECK_THROWS_AS(Tensor<double>(Shape{2, 2, 2, 2}, std::vector<double>(7)), UsageError);
}

TEST_CASE("rng streams are deterministic and tag-separated") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  bool differs = false;
  Rng a2(42);
  for (int i = 0; i < 100; ++i) differs |= (a2.next_u64() != c.next_u64());
  CHECK(differs);

  CHECK(mix_seed(1, 2, 3) == mix_seed(1, 2, 3));
  CHECK(mix_seed(1, 2, 3) != mix_seed(1, 3, 2));
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));

  Rng u(7);
  for (int i = 0; i < 1000; ++i) {
    double x = u.uniform();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
    int64_t k = u.uniform_int(-3, 5);
    CHECK(k >= -3);
    CHECK(k <= 5);
  }
}

TEST_CASE("conv2d matches the naive reference across dilations and strides") {
  Rng rng(1001);
  for (int rep = 0; rep < 40; ++rep) {
    const int dilation = static_cast<int>(rng.uniform_int(0, 2)) * 2 + 1; // 1,3,5
    const int stride = rep % 5 == 0 ? 2 : 1;
    Shape in_s{rng.uniform_int(1, 2), rng.uniform_int(2, 8), rng.uniform_int(2, 8),
               rng.uniform_int(1, 4)};
    const int64_t cout = rng.uniform_int(1, 4);
    Tensor<double> in = Tensor<double>::uniform(in_s, -1.0, 1.0, rng);
    Tensor<double> w = Tensor<double>::uniform(Shape{3, 3, in_s.c, cout}, -1.0, 1.0, rng);
    Tensor<double> b = Tensor<double>::uniform(Shape{1, 1, 1, cout}, -1.0, 1.0, rng);

    Tape<double> tape;
    Var<double> out = conv2d(tape, tape.leaf(in, false), tape.leaf(w, false),
                             tape.leaf(b, false), dilation, stride);
    Tensor<double> want = oracle::naive_conv2d(in, w, b, dilation, stride);
    CHECK(max_abs_diff(tape.value(out), want) <= 1e-12);
  }
}

TEST_CASE("conv1x1 equals a 1x1 conv2d") {
  Rng rng(5);
  Tensor<double> in = Tensor<double>::uniform(Shape{2, 4, 5, 3}, -1.0, 1.0, rng);
  Tensor<double> w = Tensor<double>::uniform(Shape{1, 1, 3, 2}, -1.0, 1.0, rng);
  Tensor<double> b = Tensor<double>::uniform(Shape{1, 1, 1, 2}, -1.0, 1.0, rng);
  Tape<double> tape;
  Var<double> a = conv1x1(tape, tape.leaf(in, false), tape.leaf(w, false), tape.leaf(b, false));
  Tensor<double> want = oracle::naive_conv2d(in, w, b, 1, 1);
  CHECK(max_abs_diff(tape.value(a), want) <= 1e-12);
}

TEST_CASE("conv2d rejects malformed arguments") {
  Tape<double> tape;
  Tensor<double> in(Shape{1, 4, 4, 2});
  Tensor<double> b2(Shape{1, 1, 1, 2});
  Var<double> vin = tape.leaf(in, false);
  CHECK_THROWS_AS(conv2d(tape, vin, tape.leaf(Tensor<double>(Shape{2, 2, 2, 2}), false),
                         tape.leaf(b2, false), 1),
                  UsageError); // even kernel
  CHECK_THROWS_AS(conv2d(tape, vin, tape.leaf(Tensor<double>(Shape{3, 3, 3, 2}), false),
                         tape.leaf(b2, false), 1),
                  UsageError); // channel mismatch
  CHECK_THROWS_AS(conv2d(tape, vin, tape.leaf(Tensor<double>(Shape{3, 3, 2, 2}), false),
                         tape.leaf(Tensor<double>(Shape{1, 1, 1, 3}), false), 1),
                  UsageError); // bias shape
  CHECK_THROWS_AS(conv2d(tape, vin, tape.leaf(Tensor<double>(Shape{3, 3, 2, 2}), false),
                         tape.leaf(b2, false), 0),
                  UsageError); // dilation
}

TEST_CASE("conv2d gradients match finite differences") {
  Tensor<double> in = random_tensor(Shape{2, 5, 4, 2}, 11);
  Tensor<double> w = random_tensor(Shape{3, 3, 2, 3}, 12);
  Tensor<double> b = random_tensor(Shape{1, 1, 1, 3}, 13);

  for (int dilation : {1, 3}) {
    auto loss = [&]() {
      Tape<double> t;
      Var<double> o = conv2d(t, t.leaf(in, true), t.leaf(w, true), t.leaf(b, true), dilation);
      Var<double> l = sum_squares(t, o);
      return tape_scalar(t, l);
    };
    Tape<double> t;
    Var<double> vi = t.leaf(in, true), vw = t.leaf(w, true), vb = t.leaf(b, true);
    Var<double> l = sum_squares(t, conv2d(t, vi, vw, vb, dilation));
    t.backward(l);
    CHECK(fd_check(in, t.grad(vi), loss) < 1e-6);
    CHECK(fd_check(w, t.grad(vw), loss) < 1e-6);
    CHECK(fd_check(b, t.grad(vb), loss) < 1e-6);
  }
}

TEST_CASE("strided conv2d gradients match finite differences") {
  Tensor<double> in = random_tensor(Shape{1, 6, 6, 2}, 21);
  Tensor<double> w = random_tensor(Shape{3, 3, 2, 2}, 22);
  Tensor<double> b = random_tensor(Shape{1, 1, 1, 2}, 23);
  auto loss = [&]() {
    Tape<double> t;
    Var<double> o = conv2d(t, t.leaf(in, true), t.leaf(w, true), t.leaf(b, true), 1, 2);
    return tape_scalar(t, sum_squares(t, o));
  };
  Tape<double> t;
  Var<double> vi = t.leaf(in, true), vw = t.leaf(w, true), vb = t.leaf(b, true);
  Var<double> l = sum_squares(t, conv2d(t, vi, vw, vb, 1, 2));
  t.backward(l);
  CHECK(fd_check(in, t.grad(vi), loss) < 1e-6);
  CHECK(fd_check(w, t.grad(vw), loss) < 1e-6);
  CHECK(fd_check(b, t.grad(vb), loss) < 1e-6);
}

TEST_CASE("elementwise and pooling op gradients match finite differences") {
  Tensor<double> a = random_tensor(Shape{2, 3, 3, 2}, 31);
  Tensor<double> b = random_tensor(Shape{2, 3, 3, 2}, 32);

  SUBCASE("abs_diff") {
    auto loss = [&]() {
      Tape<double> t;
      return tape_scalar(t, sum_squares(t, abs_diff(t, t.leaf(a, true), t.leaf(b, true))));
    };
    Tape<double> t;
    Var<double> va = t.leaf(a, true), vb = t.leaf(b, true);
    t.backward(sum_squares(t, abs_diff(t, va, vb)));
    CHECK(fd_check(a, t.grad(va), loss) < 1e-6);
    CHECK(fd_check(b, t.grad(vb), loss) < 1e-6);
  }

  SUBCASE("global_avg_pool") {
    auto loss = [&]() {
      Tape<double> t;
      return tape_scalar(t, sum_squares(t, global_avg_pool(t, t.leaf(a, true))));
    };
    Tape<double> t;
    Var<double> va = t.leaf(a, true);
    t.backward(sum_squares(t, global_avg_pool(t, va)));
    CHECK(fd_check(a, t.grad(va), loss) < 1e-6);
  }

  SUBCASE("relu away from the kink") {
    Tensor<double> x = a;
    for (auto& e : x.v) e += (e >= 0 ? 0.05 : -0.05); // keep |x| > fd step
    auto loss = [&]() {
      Tape<double> t;
      return tape_scalar(t, sum_squares(t, relu(t, t.leaf(x, true))));
    };
    Tape<double> t;
    Var<double> vx = t.leaf(x, true);
    t.backward(sum_squares(t, relu(t, vx)));
    CHECK(fd_check(x, t.grad(vx), loss) < 1e-6);
  }

  SUBCASE("add, scale, sum") {
    auto loss = [&]() {
      Tape<double> t;
      Var<double> s = add(t, t.leaf(a, true), scale(t, t.leaf(b, true), 1.7));
      return tape_scalar(t, sum(t, s));
    };
    Tape<double> t;
    Var<double> va = t.leaf(a, true), vb = t.leaf(b, true);
    t.backward(sum(t, add(t, va, scale(t, vb, 1.7))));
    CHECK(fd_check(a, t.grad(va), loss) < 1e-6);
    CHECK(fd_check(b, t.grad(vb), loss) < 1e-6);
  }

  SUBCASE("dropout with a fixed mask") {
    auto loss = [&]() {
      Tape<double> t;
      return tape_scalar(t, sum_squares(t, dropout(t, t.leaf(a, true), 0.3, true, 99)));
    };
    Tape<double> t;
    Var<double> va = t.leaf(a, true);
    t.backward(sum_squares(t, dropout(t, va, 0.3, true, 99)));
    CHECK(fd_check(a, t.grad(va), loss) < 1e-6);
  }
}

TEST_CASE("softmax rows are distributions and match the direct formula") {
  Tape<double> tape;
  Tensor<double> x(Shape{1, 1, 1, 2}, {2.0, 1.0});
  Var<double> p = softmax(tape, tape.leaf(x, false));
  CHECK(tape.value(p).v[0] == doctest::Approx(0.7310585786300049).epsilon(1e-14));
  CHECK(tape.value(p).v[1] == doctest::Approx(0.2689414213699951).epsilon(1e-14));

  Rng rng(77);
  Tensor<double> big = Tensor<double>::uniform(Shape{50, 1, 1, 7}, -20.0, 20.0, rng);
  Tape<double> t2;
  const Tensor<double>& probs = t2.value(softmax(t2, t2.leaf(big, false)));
  for (int64_t n = 0; n < 50; ++n) {
    double s = 0.0;
    std::vector<double> row;
    for (int64_t c = 0; c < 7; ++c) {
      s += probs.at(n, 0, 0, c);
      row.push_back(big.at(n, 0, 0, c));
    }
    CHECK(std::abs(s - 1.0) <= 1e-9);
    std::vector<double> want = oracle::direct_softmax(row);
    for (int64_t c = 0; c < 7; ++c)
      CHECK(probs.at(n, 0, 0, c) == doctest::Approx(want[static_cast<size_t>(c)]).epsilon(1e-12));
  }
}

TEST_CASE("softmax gradient matches finite differences") {
  Tensor<double> x = random_tensor(Shape{3, 1, 1, 4}, 41, -2.0, 2.0);
  auto loss = [&]() {
    Tape<double> t;
    return tape_scalar(t, sum_squares(t, softmax(t, t.leaf(x, true))));
  };
  Tape<double> t;
  Var<double> vx = t.leaf(x, true);
  t.backward(sum_squares(t, softmax(t, vx)));
  CHECK(fd_check(x, t.grad(vx), loss) < 1e-6);
}

TEST_CASE("cross entropy value and gradient") {
  SUBCASE("uniform three-way distribution has a known loss") {
    Tensor<double> p(Shape{1, 1, 1, 3}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
    Tape<double> t;
    Var<double> l = cross_entropy(t, t.leaf(p, false), {0});
    CHECK(tape_scalar(t, l) == doctest::Approx(0.6365141682948129).epsilon(1e-14));
  }

  SUBCASE("matches the direct formula and averages over the batch") {
    Rng rng(51);
    Tensor<double> logits = Tensor<double>::uniform(Shape{4, 1, 1, 5}, -2.0, 2.0, rng);
    std::vector<int> labels = {0, 4, 2, 2};
    Tape<double> t;
    Var<double> p = softmax(t, t.leaf(logits, false));
    Var<double> l = cross_entropy(t, p, labels);
    double want = 0.0;
    const Tensor<double>& pv = t.value(p);
    for (int64_t n = 0; n < 4; ++n) {
      std::vector<double> row;
      for (int64_t c = 0; c < 5; ++c) row.push_back(pv.at(n, 0, 0, c));
      want += oracle::direct_cross_entropy(row, labels[static_cast<size_t>(n)]);
    }
    want /= 4.0;
    CHECK(tape_scalar(t, l) == doctest::Approx(want).epsilon(1e-12));
  }

  SUBCASE("gradient through softmax matches finite differences") {
    Tensor<double> logits = random_tensor(Shape{2, 1, 1, 3}, 52, -1.5, 1.5);
    std::vector<int> labels = {1, 0};
    auto loss = [&]() {
      Tape<double> t;
      return tape_scalar(t, cross_entropy(t, softmax(t, t.leaf(logits, true)), labels));
    };
    Tape<double> t;
    Var<double> vx = t.leaf(logits, true);
    t.backward(cross_entropy(t, softmax(t, vx), labels));
    CHECK(fd_check(logits, t.grad(vx), loss) < 1e-6);
  }

  SUBCASE("rejects bad labels and shapes") {
    Tape<double> t;
    Tensor<double> p(Shape{2, 1, 1, 3});
    p.fill(1.0 / 3);
    Var<double> vp = t.leaf(p, false);
    CHECK_THROWS_AS(cross_entropy(t, vp, {0}), UsageError);
    CHECK_THROWS_AS(cross_entropy(t, vp, {0, 3}), UsageError);
    Tensor<double> wide(Shape{1, 2, 2, 3});
    wide.fill(0.1);
    Var<double> vw = t.leaf(wide, false);
    CHECK_THROWS_AS(cross_entropy(t, vw, {0}), UsageError);
  }
}

TEST_CASE("dropout is identity in eval mode and mask is seed-determined") {
  Tensor<double> x = random_tensor(Shape{1, 4, 4, 2}, 61);
  Tape<double> t;
  Var<double> vx = t.leaf(x, false);
  Var<double> eval_out = dropout(t, vx, 0.5, false, 1);
  CHECK(eval_out.id == vx.id); // pass-through, no node recorded

  Tape<double> t2;
  Tensor<double> a = t2.value(dropout(t2, t2.leaf(x, false), 0.5, true, 17));
  Tape<double> t3;
  Tensor<double> b = t3.value(dropout(t3, t3.leaf(x, false), 0.5, true, 17));
  CHECK(max_abs_diff(a, b) == 0.0);
  Tape<double> t4;
  Tensor<double> c = t4.value(dropout(t4, t4.leaf(x, false), 0.5, true, 18));
  CHECK(max_abs_diff(a, c) > 0.0);
  CHECK_THROWS_AS(dropout(t4, t4.leaf(x, false), 1.0, true, 1), UsageError);
}

TEST_CASE("tape guards its lifecycle") {
  Tape<double> t;
  Tensor<double> bad(Shape{1, 1, 1, 1});
  bad.v[0] = std::nan("");
  CHECK_THROWS_AS(t.leaf(bad, false), NumericError);

  Tensor<double> x(Shape{1, 1, 1, 3}, {1.0, 2.0, 3.0});
  Var<double> vx = t.leaf(x, true);
  CHECK_THROWS_AS(t.backward(vx), UsageError); // non-scalar target

  Var<double> s = sum(t, vx);
  t.backward(s);
  CHECK(t.grad(vx).v[0] == 1.0);
  CHECK_THROWS_AS(t.backward(s), std::logic_error); // single-shot
  t.clear();
  CHECK(t.size() == 0);
}

TEST_CASE("gradients accumulate across reuse of one leaf") {
  // loss = sum(x + x) = 2*sum(x): each use contributes its own gradient.
  Tensor<double> x(Shape{1, 1, 1, 2}, {0.5, -0.25});
  Tape<double> t;
  Var<double> vx = t.leaf(x, true);
  t.backward(sum(t, add(t, vx, vx)));
  CHECK(t.grad(vx).v[0] == doctest::Approx(2.0));
  CHECK(t.grad(vx).v[1] == doctest::Approx(2.0));
}

TEST_CASE("no-grad leaves skip gradient work") {
  Tensor<double> x(Shape{1, 1, 1, 2}, {1.0, 2.0});
  Tape<double> t;
  Var<double> vx = t.leaf(x, false);
  Var<double> vy = t.leaf(x, true);
  t.backward(sum(t, add(t, vx, vy)));
  CHECK(t.grad(vx).v[0] == 0.0); // untouched buffer
  CHECK(t.grad(vy).v[0] == 1.0);
}
