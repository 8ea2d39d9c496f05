/* Copyright 2026 The WavClass Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "wavclass/adam.hpp"
#include "wavclass/kernels.hpp"
#include "wavclass/layers.hpp"
#include "wavclass/loss.hpp"
#include "wavclass/model.hpp"
#include "wavclass/parallel.hpp"
#include "wavclass/rng.hpp"

using namespace wvc;

namespace {

template <typename T>
void fill_random(std::vector<T>& v, Rng& rng, double scale = 1.0) {
  for (T& x : v) x = static_cast<T>(rng.normal(0.0, scale));
}

// Scalar loss L = sum(out * coef) so dL/d out = coef.
double probe_loss(Network<double>& net, const Tensor<double>& coef) {
  double l = 0;
  const Tensor<double>& out = net.output()->out;
  for (size_t i = 0; i < out.numel(); ++i) l += out.values[i] * coef.values[i];
  return l;
}

struct GradCheckResult {
  double max_rel_err = 0.0;
  int checked = 0;
  std::vector<double> errors;
};

// Central finite differences against the recorded backward pass, 64-bit.
GradCheckResult grad_check(Network<double>& net, const std::vector<double>& input,
                           int batch, uint64_t seed, int max_per_param = 24,
                           double h_base = 1e-5) {
  net.set_input(input.data(), batch);
  net.forward(Phase::kTrain);
  Rng rng(seed, "gradcheck");
  Tensor<double> coef;
  coef.shape = net.output()->out.shape;
  coef.values.resize(net.output()->out.numel());
  for (double& c : coef.values) c = rng.normal(0.0, 1.0);
  net.backward(coef);

  GradCheckResult result;
  for (Parameter<double>* p : net.parameters()) {
    if (!p->trainable) continue;
    std::vector<double> analytic = p->grad.values;
    const size_t n = p->value.numel();
    const size_t step = n <= static_cast<size_t>(max_per_param)
                            ? 1
                            : n / static_cast<size_t>(max_per_param);
    for (size_t i = 0; i < n; i += step) {
      const double w0 = p->value.values[i];
      const double h = h_base * std::max(1.0, std::fabs(w0));
      p->value.values[i] = w0 + h;
      net.forward(Phase::kTrain);
      const double lp = probe_loss(net, coef);
      p->value.values[i] = w0 - h;
      net.forward(Phase::kTrain);
      const double lm = probe_loss(net, coef);
      p->value.values[i] = w0;
      const double fd = (lp - lm) / (2.0 * h);
      const double rel = std::fabs(fd - analytic[i]) /
                         std::max(1e-6, std::fabs(fd) + std::fabs(analytic[i]));
      result.max_rel_err = std::max(result.max_rel_err, rel);
      result.errors.push_back(rel);
      result.checked += 1;
    }
  }
  net.forward(Phase::kTrain);  // leave a consistent forward state behind
  return result;
}

}  // namespace

TEST_CASE("gemm_nn matches a naive reference, including accumulate") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const long m = 1 + static_cast<long>(rng.below(20));
    const long n = 1 + static_cast<long>(rng.below(70));
    const long k = 1 + static_cast<long>(rng.below(40));
    std::vector<float> a(static_cast<size_t>(m) * k), b(static_cast<size_t>(k) * n);
    std::vector<float> c(static_cast<size_t>(m) * n, 0.5f);
    fill_random(a, rng);
    fill_random(b, rng);
    std::vector<float> expect = c;
    const bool acc = trial % 2 == 0;
    for (long i = 0; i < m; ++i)
      for (long j = 0; j < n; ++j) {
        double s = acc ? expect[static_cast<size_t>(i) * n + j] : 0.0;
        for (long kk = 0; kk < k; ++kk)
          s += static_cast<double>(a[static_cast<size_t>(i) * k + kk]) *
               b[static_cast<size_t>(kk) * n + j];
        expect[static_cast<size_t>(i) * n + j] = static_cast<float>(s);
      }
    kern::gemm_nn(c.data(), n, a.data(), k, 1, b.data(), n, m, n, k, acc);
    for (size_t i = 0; i < c.size(); ++i)
      CHECK(c[i] == doctest::Approx(expect[i]).epsilon(1e-4));
  }
}

TEST_CASE("gemm_nt matches a naive reference") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const long m = 1 + static_cast<long>(rng.below(17));
    const long n = 1 + static_cast<long>(rng.below(23));
    const long p = 1 + static_cast<long>(rng.below(90));
    std::vector<float> a(static_cast<size_t>(m) * p), b(static_cast<size_t>(n) * p);
    std::vector<float> c(static_cast<size_t>(m) * n, 1.0f);
    fill_random(a, rng);
    fill_random(b, rng);
    std::vector<float> expect = c;
    for (long i = 0; i < m; ++i)
      for (long j = 0; j < n; ++j) {
        double s = expect[static_cast<size_t>(i) * n + j];
        for (long kk = 0; kk < p; ++kk)
          s += static_cast<double>(a[static_cast<size_t>(i) * p + kk]) *
               b[static_cast<size_t>(j) * p + kk];
        expect[static_cast<size_t>(i) * n + j] = static_cast<float>(s);
      }
    kern::gemm_nt(c.data(), n, a.data(), p, b.data(), p, m, n, p, true);
    for (size_t i = 0; i < c.size(); ++i)
      CHECK(c[i] == doctest::Approx(expect[i]).epsilon(1e-4));
  }
}

TEST_CASE("conv_direct agrees with the double-precision reference") {
  Rng rng(13);
  struct Geo { int n, cin, h, w, cout, kh, kw, sh, pad; };
  const Geo geos[] = {
      {2, 1, 96, 64, 3, 7, 7, 1, 3},  {3, 4, 48, 32, 8, 3, 3, 1, 1},
      {2, 8, 12, 8, 16, 3, 3, 1, 1},  {2, 16, 6, 4, 8, 3, 3, 1, 1},
      {2, 3, 24, 16, 5, 1, 7, 1, 3},  {2, 3, 20, 20, 4, 11, 11, 2, 5},
  };
  for (const Geo& g : geos) {
    const int out_h = (g.h + g.sh - 1) / g.sh;
    kern::ConvGeometry geo{g.n, g.cin, g.h, g.w, g.cout, out_h, g.w,
                           g.kh, g.kw, g.sh, g.pad, g.kw / 2};
    std::vector<float> x(static_cast<size_t>(g.n) * g.cin * g.h * g.w);
    std::vector<float> w(static_cast<size_t>(g.cout) * g.cin * g.kh * g.kw);
    fill_random(x, rng);
    fill_random(w, rng, 0.3);
    std::vector<float> y(static_cast<size_t>(g.n) * g.cout * out_h * g.w, 0.25f);
    std::vector<double> xd(x.begin(), x.end()), wd(w.begin(), w.end());
    std::vector<double> yd(y.begin(), y.end());
    kern::conv_direct(geo, x.data(), w.data(), y.data(), true);
    kern::conv_direct(geo, xd.data(), wd.data(), yd.data(), true);
    for (size_t i = 0; i < y.size(); ++i)
      CHECK(y[i] == doctest::Approx(yd[i]).epsilon(2e-4));
  }
}

TEST_CASE("conv shape rules and the pointwise identity case") {
  Network<float> net;
  auto* in = net.add<InputNode<float>>(std::vector<int>{1, 96, 64});
  net.set_input_node(in);
  auto* c3 = net.add<ConvNode<float>>("c3", in, 4, 3, 3, 1, 1, Padding::kSame, false);
  CHECK(c3->out_h == 96);
  CHECK(c3->out_w == 64);
  auto* c11 = net.add<ConvNode<float>>("c11", c3, 8, 11, 11, 2, 1, Padding::kSame, false);
  CHECK(c11->out_h == 48);  // stride 2x1 halves only the time axis
  CHECK(c11->out_w == 64);
  CHECK_THROWS_WITH_AS(
      ConvNode<float>("bad", c11, 4, 99, 99, 1, 1, Padding::kValid, false),
      doctest::Contains("kernel exceeds input"), Error);

  Network<float> tiny;
  auto* tin = tiny.add<InputNode<float>>(std::vector<int>{1, 1, 1});
  tiny.set_input_node(tin);
  auto* c1 = tiny.add<ConvNode<float>>("c1", tin, 1, 1, 1, 1, 1, Padding::kValid, true);
  tiny.finalize();
  c1->weight.value.values[0] = 2.5f;
  c1->bias.value.values[0] = 0.0f;
  const float x = 3.0f;
  tiny.set_input(&x, 1);
  tiny.forward(Phase::kInfer);
  CHECK(c1->out.values[0] == doctest::Approx(7.5f));
}

TEST_CASE("pooling examples") {
  Network<float> net;
  auto* in = net.add<InputNode<float>>(std::vector<int>{1, 2, 2});
  net.set_input_node(in);
  auto* avg = net.add<PoolNode<float>>("avg", in, PoolKind::kAvg, 2, 2, 2, 2,
                                       Padding::kValid);
  net.finalize();
  const float x[4] = {1, 2, 3, 4};
  net.set_input(x, 1);
  net.forward(Phase::kInfer);
  CHECK(avg->out.values[0] == doctest::Approx(2.5f));

  Network<float> net2;
  auto* in2 = net2.add<InputNode<float>>(std::vector<int>{2, 10, 6});
  net2.set_input_node(in2);
  auto* mx = net2.add<PoolNode<float>>("max", in2, PoolKind::kMax, 3, 3, 2, 2,
                                       Padding::kSame);
  auto* ap = net2.add<PoolNode<float>>("gap", mx, PoolKind::kAvg, 5, 3, 1, 1,
                                       Padding::kValid);
  net2.finalize();
  std::vector<float> c(2 * 10 * 6, 4.25f);  // constant tensor
  net2.set_input(c.data(), 1);
  net2.forward(Phase::kInfer);
  CHECK(ap->item_shape()[1] == 1);
  CHECK(ap->item_shape()[2] == 1);
  for (float v : ap->out.values) CHECK(v == doctest::Approx(4.25f));
}

TEST_CASE("dense identity, bias, and zero input") {
  Network<float> net;
  auto* in = net.add<InputNode<float>>(std::vector<int>{1, 1, 3});
  net.set_input_node(in);
  auto* fl = net.add<FlattenNode<float>>("flatten", in);
  auto* fc = net.add<DenseNode<float>>("fc", fl, 3, true);
  net.finalize();
  fc->weight.value.zero();
  for (int i = 0; i < 3; ++i)
    fc->weight.value.values[static_cast<size_t>(i) * 3 + i] = 1.0f;
  const float x[3] = {0.5f, -1.0f, 2.0f};
  net.set_input(x, 1);
  net.forward(Phase::kInfer);
  for (int i = 0; i < 3; ++i)
    CHECK(fc->out.values[static_cast<size_t>(i)] == doctest::Approx(x[i]));

  fc->bias.value.values = {1.0f, 2.0f, 3.0f};
  const float zero[3] = {0, 0, 0};
  net.set_input(zero, 1);
  net.forward(Phase::kInfer);
  for (int i = 0; i < 3; ++i)
    CHECK(fc->out.values[static_cast<size_t>(i)] == doctest::Approx(1.0f + i));
}

TEST_CASE("relu and sigmoid values, including the saturation range") {
  Network<double> net;
  auto* in = net.add<InputNode<double>>(std::vector<int>{1, 1, 4});
  net.set_input_node(in);
  auto* relu = net.add<ReluNode<double>>("relu", in);
  net.finalize();
  const double x[4] = {-3.0, 0.0, 1.5, -0.25};
  net.set_input(x, 1);
  net.forward(Phase::kInfer);
  CHECK(relu->out.values[0] == 0.0);
  CHECK(relu->out.values[2] == 1.5);
  CHECK(relu->out.values[3] == 0.0);

  Network<double> net2;
  auto* in2 = net2.add<InputNode<double>>(std::vector<int>{1, 1, 3});
  net2.set_input_node(in2);
  auto* s2 = net2.add<SigmoidNode<double>>("s", in2);
  net2.finalize();
  const double x2[3] = {0.0, 20.0, -20.0};
  net2.set_input(x2, 1);
  net2.forward(Phase::kInfer);
  CHECK(s2->out.values[0] == doctest::Approx(0.5));
  CHECK(s2->out.values[1] <= 1.0 - 1e-9);
  CHECK(s2->out.values[2] >= 1e-9);
  CHECK(s2->out.values[1] ==
        doctest::Approx(1.0 / (1.0 + std::exp(-20.0))).epsilon(1e-12));
  CHECK(s2->out.values[2] ==
        doctest::Approx(1.0 / (1.0 + std::exp(20.0))).epsilon(1e-12));
}

TEST_CASE("batchnorm statistics, inference path, and edge cases") {
  Network<double> net;
  auto* in = net.add<InputNode<double>>(std::vector<int>{2, 3, 4});
  net.set_input_node(in);
  auto* bn = net.add<BatchNormNode<double>>("bn", in, 0.99, 1e-3);
  net.finalize();

  Rng rng(3);
  const int batch = 8;
  std::vector<double> x(static_cast<size_t>(batch) * 2 * 3 * 4);
  // Large variance keeps the epsilon floor negligible against the tolerance.
  for (double& v : x) v = rng.normal(5.0, 100.0);
  net.set_input(x.data(), batch);
  net.forward(Phase::kTrain);
  const long run = batch * 3 * 4;
  for (int c = 0; c < 2; ++c) {
    double mean = 0, var = 0;
    for (long j = 0; j < run; ++j)
      mean += bn->out.values[static_cast<size_t>(c) * run + j];
    mean /= run;
    for (long j = 0; j < run; ++j) {
      const double d = bn->out.values[static_cast<size_t>(c) * run + j] - mean;
      var += d * d;
    }
    var /= run;
    CHECK(std::fabs(mean) < 1e-5);
    CHECK(std::fabs(var - 1.0) < 1e-4);
  }

  SUBCASE("inference depends only on stored statistics") {
    bn->moving_mean.value.zero();
    bn->moving_var.value.fill(1.0);
    net.set_input(x.data(), batch);
    net.forward(Phase::kInfer);
    // identity up to the epsilon floor; note the channel-major buffer order
    const size_t plane = 12;
    for (int n = 0; n < batch; ++n)
      for (int c = 0; c < 2; ++c)
        for (size_t j = 0; j < plane; ++j) {
          const double internal =
              bn->out.values[(static_cast<size_t>(c) * batch + n) * plane + j];
          const double user = x[(static_cast<size_t>(n) * 2 + c) * plane + j];
          CHECK(internal ==
                doctest::Approx(user / std::sqrt(1.0 + 1e-3)).epsilon(1e-12));
        }
  }

  SUBCASE("constant channel normalizes to zero, variance floored by epsilon") {
    std::vector<double> cx(static_cast<size_t>(batch) * 2 * 3 * 4, 7.25);
    net.set_input(cx.data(), batch);
    net.forward(Phase::kTrain);
    for (double v : bn->out.values) CHECK(v == doctest::Approx(0.0));
  }

  SUBCASE("batch of 1 in training mode is rejected") {
    net.set_input(x.data(), 1);
    CHECK_THROWS_WITH_AS(net.forward(Phase::kTrain),
                         doctest::Contains("degenerate batch"), Error);
  }
}

TEST_CASE("multilabel_bce examples") {
  const int c_count = 5;
  Tensor<float> s({2, c_count});
  s.fill(0.5f);
  Tensor<float> y({2, c_count});
  for (size_t i = 0; i < y.numel(); ++i) y.values[i] = static_cast<float>(i % 2);
  CHECK(multilabel_bce(s, y) ==
        doctest::Approx(c_count * std::log(2.0)).epsilon(1e-6));

  Tensor<float> s1({1, 1}, {0.25f});
  Tensor<float> y1({1, 1}, {1.0f});
  CHECK(multilabel_bce(s1, y1) == doctest::Approx(std::log(4.0)).epsilon(1e-6));

  // perfect scores, clamped at the bounds
  Tensor<float> sp({1, c_count});
  Tensor<float> yp({1, c_count});
  for (int i = 0; i < c_count; ++i) {
    sp.values[static_cast<size_t>(i)] = i % 2 ? 1.0f : 0.0f;
    yp.values[static_cast<size_t>(i)] = i % 2 ? 1.0f : 0.0f;
  }
  const double perfect = multilabel_bce(sp, yp);
  CHECK(perfect <= c_count * 1.7e-6);
  CHECK(perfect >= 0.0);

  Tensor<float> ybad({1, 1}, {0.5f});
  CHECK_THROWS_WITH_AS(multilabel_bce(s1, ybad),
                       doctest::Contains("invalid target"), Error);

  // non-negativity over random inputs
  Rng rng(88);
  for (int t = 0; t < 200; ++t) {
    const int n = 1 + static_cast<int>(rng.below(6));
    const int cc = 1 + static_cast<int>(rng.below(9));
    Tensor<float> ss({n, cc});
    Tensor<float> yy({n, cc});
    for (size_t i = 0; i < ss.numel(); ++i) {
      ss.values[i] = rng.uniform_float();
      yy.values[i] = rng.below(2) ? 1.0f : 0.0f;
    }
    CHECK(multilabel_bce(ss, yy) >= 0.0);
  }
}

TEST_CASE("adam closed-form steps and failure modes") {
  SUBCASE("first step moves by about learning_rate against the gradient sign") {
    Parameter<double> p("w", {4});
    p.value.fill(1.0);
    p.grad.fill(0.5);
    std::vector<Parameter<double>*> params{&p};
    AdamState<double> adam;
    adam.learning_rate = 0.01;
    adam.init(params);
    adam_step(params, adam);
    for (double v : p.value.values)
      CHECK(v == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
    CHECK(adam.step_count == 1);
  }

  SUBCASE("zero gradient with zero moments leaves parameters unchanged") {
    Parameter<double> p("w", {3});
    p.value.values = {1.5, -2.0, 0.25};
    std::vector<Parameter<double>*> params{&p};
    AdamState<double> adam;
    adam.init(params);
    adam_step(params, adam);
    CHECK(p.value.values[0] == 1.5);
    CHECK(p.value.values[1] == -2.0);
    CHECK(p.value.values[2] == 0.25);
  }

  SUBCASE("two hand-computed scalar steps match to 1e-12") {
    Parameter<double> p("w", {1});
    p.value.values = {2.0};
    std::vector<Parameter<double>*> params{&p};
    AdamState<double> adam;
    adam.learning_rate = 0.1;
    adam.init(params);

    double m = 0, v = 0, w = 2.0;
    for (int t = 1; t <= 2; ++t) {
      m = 0.9 * m + 0.1;
      v = 0.999 * v + 0.001;
      const double mh = m / (1.0 - std::pow(0.9, t));
      const double vh = v / (1.0 - std::pow(0.999, t));
      w -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
      p.grad.fill(1.0);
      adam_step(params, adam);
    }
    CHECK(std::fabs(p.value.values[0] - w) < 1e-12);
  }

  SUBCASE("non-finite gradient aborts before mutating state") {
    Parameter<float> p("w", {2});
    p.value.fill(1.0f);
    p.grad.values = {0.1f, std::numeric_limits<float>::quiet_NaN()};
    std::vector<Parameter<float>*> params{&p};
    AdamState<float> adam;
    adam.init(params);
    CHECK_THROWS_WITH_AS(adam_step(params, adam),
                         doctest::Contains("non-finite gradient"), Error);
    CHECK(p.value.values[0] == 1.0f);
    CHECK(adam.step_count == 0);
  }
}

TEST_CASE("backward before forward reports no recorded graph") {
  ArchitectureSpec spec = build_fully_connected(1, 4, 2);
  spec.input_shape = {2, 2, 1};
  Rng rng(5);
  Network<float> net = compile_network<float>(spec, rng);
  Tensor<float> d({1, 2});
  CHECK_THROWS_WITH_AS(net.backward(d), doctest::Contains("no recorded graph"),
                       Error);
}

TEST_CASE("parameters feeding unread outputs get exactly zero gradient") {
  Network<double> net;
  auto* in = net.add<InputNode<double>>(std::vector<int>{1, 6, 6});
  net.set_input_node(in);
  auto* a = net.add<ConvNode<double>>("a", in, 2, 3, 3, 1, 1, Padding::kSame, true);
  auto* b = net.add<ConvNode<double>>("b", in, 2, 3, 3, 1, 1, Padding::kSame, true);
  auto* cat = net.add<ConcatNode<double>>("cat", std::vector<Node<double>*>{a, b});
  (void)cat;
  net.finalize();
  Rng rng(9);
  std::vector<double> x(36);
  fill_random(x, rng);
  for (auto& w : a->weight.value.values) w = rng.normal(0, 0.5);
  for (auto& w : b->weight.value.values) w = rng.normal(0, 0.5);
  net.set_input(x.data(), 1);
  net.forward(Phase::kTrain);
  Tensor<double> d;
  d.shape = net.output()->out.shape;
  d.values.assign(net.output()->out.numel(), 0.0);
  // probe only branch A's channels
  for (size_t i = 0; i < d.numel() / 2; ++i) d.values[i] = rng.normal(0, 1);
  net.backward(d);
  double a_norm = 0, b_norm = 0;
  for (double g : a->weight.grad.values) a_norm += std::fabs(g);
  for (double g : b->weight.grad.values) b_norm += std::fabs(g);
  CHECK(a_norm > 0.0);
  CHECK(b_norm == 0.0);
}

TEST_CASE("finite differences validate every layer type at 64-bit") {
  Rng rng(21);

  SUBCASE("conv stack with stride, padding and bias variants") {
    Network<double> net;
    auto* in = net.add<InputNode<double>>(std::vector<int>{2, 10, 8});
    net.set_input_node(in);
    auto* c1 = net.add<ConvNode<double>>("c1", in, 3, 3, 3, 1, 1, Padding::kSame, false);
    auto* r1 = net.add<ReluNode<double>>("r1", c1);
    auto* c2 = net.add<ConvNode<double>>("c2", r1, 4, 5, 3, 2, 1, Padding::kSame, true);
    auto* c3 = net.add<ConvNode<double>>("c3", c2, 2, 3, 3, 1, 2, Padding::kValid, true);
    (void)c3;
    net.finalize();
    for (Parameter<double>* p : net.parameters())
      for (double& w : p->value.values) w = rng.normal(0, 0.4);
    std::vector<double> x(3 * 2 * 10 * 8);
    fill_random(x, rng);
    const GradCheckResult res = grad_check(net, x, 3, 101);
    CHECK(res.checked > 30);
    CHECK(res.max_rel_err < 1e-4);
  }

  SUBCASE("pool, batchnorm, residual add, concat, dense, sigmoid") {
    Network<double> net;
    auto* in = net.add<InputNode<double>>(std::vector<int>{1, 8, 8});
    net.set_input_node(in);
    auto* c1 = net.add<ConvNode<double>>("c1", in, 4, 3, 3, 1, 1, Padding::kSame, false);
    auto* bn = net.add<BatchNormNode<double>>("bn", c1, 0.99, 1e-3);
    auto* re = net.add<ReluNode<double>>("re", bn);
    auto* mp = net.add<PoolNode<double>>("mp", re, PoolKind::kMax, 3, 3, 2, 2,
                                         Padding::kSame);
    auto* sc = net.add<ConvNode<double>>("sc", re, 4, 1, 1, 2, 2, Padding::kSame, false);
    auto* add = net.add<AddNode<double>>("add", std::vector<Node<double>*>{mp, sc});
    auto* ap = net.add<PoolNode<double>>("ap", add, PoolKind::kAvg, 3, 3, 1, 1,
                                         Padding::kSame);
    auto* br = net.add<ConvNode<double>>("br", add, 2, 1, 1, 1, 1, Padding::kSame, false);
    auto* cat = net.add<ConcatNode<double>>("cat", std::vector<Node<double>*>{ap, br});
    auto* fl = net.add<FlattenNode<double>>("fl", cat);
    auto* fc = net.add<DenseNode<double>>("fc", fl, 5, true);
    auto* sg = net.add<SigmoidNode<double>>("sg", fc);
    (void)sg;
    net.finalize();
    for (Parameter<double>* p : net.parameters())
      if (p->trainable && p->name.find("scale") == std::string::npos &&
          p->name.find("shift") == std::string::npos)
        for (double& w : p->value.values) w = rng.normal(0, 0.5);
    std::vector<double> x(4 * 1 * 8 * 8);
    fill_random(x, rng);
    const GradCheckResult res = grad_check(net, x, 4, 202);
    CHECK(res.checked > 40);
    CHECK(res.max_rel_err < 1e-4);
  }

  SUBCASE("compiled residual network wiring end to end") {
    // Wiring check for the full builder output. Through ~50 layers the
    // finite-difference probe crosses relu/argmax kinks, so a handful of
    // parameters show kink noise well above the per-op tolerance; a real
    // routing bug would corrupt a whole layer's worth instead.
    ArchitectureSpec spec = build_resnet50_audio(3);
    spec = shrink(spec, 1.0 / 16.0);  // full 96x64 input, narrow channels
    Rng init(7);
    Network<double> net = compile_network<double>(spec, init);
    std::vector<double> x(2 * 96 * 64);
    fill_random(x, rng);
    GradCheckResult res = grad_check(net, x, 2, 303, 1, 1e-7);
    CHECK(res.checked > 100);
    std::sort(res.errors.begin(), res.errors.end());
    const double p95 = res.errors[static_cast<size_t>(0.95 * (res.errors.size() - 1))];
    CHECK(p95 < 1e-3);
    CHECK(res.max_rel_err < 0.1);
  }
}

TEST_CASE("sigmoid derivative at zero is one quarter") {
  Network<double> net;
  auto* in = net.add<InputNode<double>>(std::vector<int>{1, 1, 1});
  net.set_input_node(in);
  auto* fl = net.add<FlattenNode<double>>("fl", in);
  auto* fc = net.add<DenseNode<double>>("fc", fl, 1, false);
  auto* sg = net.add<SigmoidNode<double>>("sg", fc);
  (void)sg;
  net.finalize();
  fc->weight.value.values[0] = 1.0;
  const double x = 0.0;
  net.set_input(&x, 1);
  net.forward(Phase::kTrain);
  Tensor<double> d({1, 1}, {1.0});
  net.backward(d);
  CHECK(fc->grad.values[0] == doctest::Approx(0.25));
}

TEST_CASE("training is bit-deterministic for a fixed seed, any thread count") {
  auto run = [](int threads) {
    set_num_threads(threads);
    ArchitectureSpec spec = build_fully_connected(2, 16, 3);
    spec.input_shape = {8, 8, 1};
    Model model = build_model(spec, 42);
    AdamState<float> adam;
    adam.learning_rate = 1e-3;
    adam.init(model.net.parameters());
    Rng data(77);
    std::vector<float> x(4 * 64);
    Tensor<float> y({4, 3});
    for (auto& v : y.values) v = data.below(2) ? 1.0f : 0.0f;
    for (int step = 0; step < 5; ++step) {
      for (auto& v : x) v = static_cast<float>(data.normal(0, 1));
      model.net.set_input(x.data(), 4);
      model.net.forward(Phase::kTrain);
      Tensor<float> d;
      multilabel_bce(model.net.output()->out, y, &d);
      model.net.backward(d);
      adam_step(model.net.parameters(), adam);
    }
    std::vector<float> flat;
    for (Parameter<float>* p : model.net.parameters())
      flat.insert(flat.end(), p->value.values.begin(), p->value.values.end());
    set_num_threads(1);
    return flat;
  };
  const auto a = run(1);
  const auto b = run(1);
  const auto c = run(2);  // the chunk grid is thread-count independent
  REQUIRE(a.size() == b.size());
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
  CHECK(std::memcmp(a.data(), c.data(), a.size() * sizeof(float)) == 0);
}
