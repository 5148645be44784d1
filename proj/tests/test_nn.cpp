#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "uwrange/localizer.hpp"
#include "uwrange/nn.hpp"
#include "uwrange/rng.hpp"

using namespace uwrange;

namespace {

Pmf random_pmf(int classes, Rng& rng) {
  Pmf p(classes);
  double sum = 0.0;
  for (double& v : p) {
    v = rng.uniform() + 1e-3;
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({1e-6, std::abs(a), std::abs(b)});
}

}  // namespace

TEST_CASE("conv2d_forward: all-ones 3x3 kernel sums the 3x3 input") {
  Tensor input({1, 1, 3, 3});
  input.fill(1.0);
  Tensor kernel({1, 1, 3, 3});
  kernel.fill(1.0);
  Tensor bias({1});
  const Tensor out = conv2d_forward(input, kernel, bias);
  CHECK(out.shape == std::vector<std::size_t>({1, 1, 1, 1}));
  CHECK(out.data[0] == doctest::Approx(9.0));
}

TEST_CASE("conv2d_forward: centered identity kernel crops the interior") {
  Rng rng(1);
  Tensor input({1, 1, 5, 5});
  for (double& v : input.data) v = rng.uniform(-1.0, 1.0);
  Tensor kernel({1, 1, 3, 3});
  kernel.data[4] = 1.0;  // center tap
  Tensor bias({1});
  const Tensor out = conv2d_forward(input, kernel, bias);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 3; ++x) {
      CHECK(out.data[y * 3 + x] == input.data[(y + 1) * 5 + (x + 1)]);
    }
  }
}

TEST_CASE("conv2d_forward: output shape follows H - k + 1") {
  Rng rng(2);
  Tensor input({1, 2, 21, 21});
  for (double& v : input.data) v = rng.normal();
  Tensor kernel({6, 2, 3, 3});
  for (double& v : kernel.data) v = rng.normal();
  Tensor bias({6});
  const Tensor out = conv2d_forward(input, kernel, bias);
  CHECK(out.shape == std::vector<std::size_t>({1, 6, 19, 19}));
  CHECK(out.all_finite());

  Tensor bad_kernel({6, 3, 3, 3});  // wrong channel count
  CHECK_THROWS(conv2d_forward(input, bad_kernel, bias));
}

TEST_CASE("linear_forward: identity, zero weight with bias, and shapes") {
  Tensor input({1, 4});
  input.data = {1.0, -2.0, 3.0, 0.5};
  Tensor identity({4, 4});
  for (int i = 0; i < 4; ++i) identity.data[i * 4 + i] = 1.0;
  const Tensor out = linear_forward(input, identity, nullptr);
  CHECK(out.data == input.data);

  Tensor zero({4, 4});
  Tensor bias({4});
  bias.data = {0.1, 0.2, 0.3, 0.4};
  const Tensor biased = linear_forward(input, zero, &bias);
  CHECK(biased.data == bias.data);

  Rng rng(3);
  Tensor wide_in({1, 256});
  for (double& v : wide_in.data) v = rng.normal();
  Tensor wide_w({82, 256});
  for (double& v : wide_w.data) v = rng.normal();
  const Tensor logits = linear_forward(wide_in, wide_w, nullptr);
  CHECK(logits.shape == std::vector<std::size_t>({1, 82}));
  CHECK(logits.all_finite());

  Tensor mismatched({1, 8});
  CHECK_THROWS(linear_forward(mismatched, wide_w, nullptr));
}

TEST_CASE("softmax: uniform, closed form, shift invariance") {
  const Pmf uniform = softmax(std::vector<double>{1.5, 1.5, 1.5});
  for (double p : uniform) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

  const Pmf two = softmax(std::vector<double>{0.0, std::log(3.0)});
  CHECK(two[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(two[1] == doctest::Approx(0.75).epsilon(1e-12));

  Rng rng(4);
  std::vector<double> logits(10), shifted(10);
  for (int i = 0; i < 10; ++i) {
    logits[i] = rng.normal();
    shifted[i] = logits[i] + 123.456;
  }
  const Pmf a = softmax(logits);
  const Pmf b = softmax(shifted);
  for (int i = 0; i < 10; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("jsd: identity, disjoint bound, frozen hand-computed value") {
  Rng rng(5);
  const Pmf p = random_pmf(6, rng);
  CHECK(jsd(p, p) == doctest::Approx(0.0).epsilon(1e-15));

  Pmf a(4, 0.0), b(4, 0.0);
  a[0] = 1.0;
  b[3] = 1.0;
  CHECK(jsd(a, b) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // p = (1/2, 1/2), q = (1, 0): independent evaluation of both KL terms
  const Pmf half{0.5, 0.5}, hot{1.0, 0.0};
  const double kl_p = 0.5 * std::log(0.5 / 0.75) + 0.5 * std::log(0.5 / 0.25);
  const double kl_q = std::log(1.0 / 0.75);
  const double expected = 0.5 * (kl_p + kl_q);
  CHECK(jsd(half, hot) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(jsd(half, hot) == doctest::Approx(0.215761).epsilon(1e-5));
}

TEST_CASE("jsd: symmetry and the [0, ln 2] bound on random pmfs") {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const Pmf p = random_pmf(82, rng);
    const Pmf q = random_pmf(82, rng);
    const double forward = jsd(p, q);
    CHECK(forward == doctest::Approx(jsd(q, p)).epsilon(1e-12));
    CHECK(forward >= 0.0);
    CHECK(forward <= std::log(2.0) + 1e-12);
  }
}

TEST_CASE("entropy: one-hot, uniform, binary") {
  Pmf one_hot(82, 0.0);
  one_hot[10] = 1.0;
  CHECK(entropy(one_hot) == 0.0);
  CHECK(entropy(Pmf(82, 1.0 / 82.0)) == doctest::Approx(std::log(82.0)).epsilon(1e-12));
  CHECK(entropy(Pmf{0.5, 0.5}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("linear layer with squared-error loss matches the closed-form gradient") {
  Rng rng(7);
  Tensor x({1, 3});
  Tensor w({2, 3});
  Tensor y({1, 2});
  for (double& v : x.data) v = rng.normal();
  for (double& v : w.data) v = rng.normal();
  for (double& v : y.data) v = rng.normal();

  const Tensor out = linear_forward(x, w, nullptr);
  Tensor grad_out({1, 2});
  for (int m = 0; m < 2; ++m) grad_out.data[m] = 2.0 * (out.data[m] - y.data[m]);
  Tensor grad_w;
  linear_backward(x, w, grad_out, nullptr, &grad_w, nullptr);

  // closed form: dL/dW = 2 (W x - y) x^T
  for (int m = 0; m < 2; ++m) {
    for (int n = 0; n < 3; ++n) {
      const double expected = 2.0 * (out.data[m] - y.data[m]) * x.data[n];
      CHECK(grad_w.data[m * 3 + n] == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("softmax + JSD gradient w.r.t. logits sums to zero") {
  Rng rng(8);
  const int classes = 7;
  std::vector<double> logits(classes);
  for (double& v : logits) v = rng.normal();
  const Pmf probs = softmax(logits);
  const Pmf label = random_pmf(classes, rng);

  std::vector<double> grad_probs(classes, 0.0);
  jsd_grad_q(label, probs, 1.0, grad_probs);
  std::vector<double> grad_logits(classes);
  softmax_backward_row(probs, grad_probs, grad_logits);
  double sum = 0.0;
  for (double g : grad_logits) sum += g;
  CHECK(std::abs(sum) < 1e-12);
}

TEST_CASE("jsd gradient vanishes at q = p") {
  Rng rng(9);
  const Pmf p = random_pmf(12, rng);
  std::vector<double> grad(12, 0.0);
  jsd_grad_q(p, p, 1.0, grad);
  for (double g : grad) CHECK(std::abs(g) < 1e-14);
}

TEST_CASE("full-network JSD loss gradient agrees with central finite differences") {
  // 4-class toy network on 2x5x5 inputs.
  ArchConfig arch;
  arch.input_size = 5;
  arch.conv_layers = {{2, 3}, {3, 3}};
  arch.feature_dim = 4;
  arch.num_classes = 4;

  Rng rng(derive_seed(10, "net-init"));
  NetworkParams params = init_network(arch, rng);

  const std::size_t batch = 3;
  Tensor input({batch, 2, 5, 5});
  for (double& v : input.data) v = rng.uniform(-1.0, 1.0);
  std::vector<Pmf> labels;
  for (std::size_t b = 0; b < batch; ++b) labels.push_back(random_pmf(4, rng));

  auto loss_fn = [&]() {
    const Tensor logits = network_logits(params, input, nullptr);
    const Tensor probs = softmax_rows(logits);
    double loss = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      Pmf row(probs.data.begin() + b * 4, probs.data.begin() + (b + 1) * 4);
      loss += jsd(labels[b], row) / static_cast<double>(batch);
    }
    return loss;
  };

  // analytic gradient
  ForwardCache cache;
  const Tensor logits = network_logits(params, input, &cache);
  const Tensor probs = softmax_rows(logits);
  Tensor grad_logits({batch, 4});
  for (std::size_t b = 0; b < batch; ++b) {
    std::span<const double> row(probs.data.data() + b * 4, 4);
    std::vector<double> grad_probs(4, 0.0);
    jsd_grad_q(labels[b], row, 1.0 / static_cast<double>(batch), grad_probs);
    softmax_backward_row(row, grad_probs,
                         std::span<double>(grad_logits.data.data() + b * 4, 4));
  }
  NetworkGrads grads = NetworkGrads::zeros_like(params);
  network_backward(params, cache, grad_logits, &grads);

  const double h = 1e-5;
  double worst = 0.0;
  const auto param_tensors = params.trainable_tensors(true);
  const auto grad_tensors = grads.tensors(true);
  for (std::size_t t = 0; t < param_tensors.size(); ++t) {
    for (std::size_t i = 0; i < param_tensors[t]->data.size(); ++i) {
      double& value = param_tensors[t]->data[i];
      const double original = value;
      value = original + h;
      const double plus = loss_fn();
      value = original - h;
      const double minus = loss_fn();
      value = original;
      const double numeric = (plus - minus) / (2.0 * h);
      worst = std::max(worst, relative_error(numeric, grad_tensors[t]->data[i]));
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("adam: first-step magnitude, zero gradient, determinism") {
  AdamConfig cfg;
  cfg.learning_rate = 1e-3;

  Tensor param({4});
  param.data = {1.0, -2.0, 0.5, 3.0};
  Tensor grad({4});
  grad.data = {0.3, -0.7, 2.0, -0.01};
  AdamState state = AdamState::init({&param}, cfg);

  const Tensor before = param;
  adam_step({&param}, {&grad}, state);
  CHECK(state.step == 1);
  for (int i = 0; i < 4; ++i) {
    // bias-corrected first step moves by ~learning_rate against the gradient sign
    const double delta = param.data[i] - before.data[i];
    CHECK(std::abs(delta) == doctest::Approx(cfg.learning_rate).epsilon(1e-4));
    CHECK(delta * grad.data[i] < 0.0);
  }

  // zero gradient from a fresh state: parameters unchanged, step incremented
  Tensor p2({4});
  p2.data = {1.0, 2.0, 3.0, 4.0};
  AdamState fresh = AdamState::init({&p2}, cfg);
  Tensor zg({4});
  const Tensor p2_before = p2;
  adam_step({&p2}, {&zg}, fresh);
  CHECK(p2.data == p2_before.data);
  CHECK(fresh.step == 1);

  // identical runs produce identical trajectories
  auto run = [&](std::uint64_t seed) {
    Rng r(seed);
    Tensor p({8});
    for (double& v : p.data) v = r.normal();
    AdamState s = AdamState::init({&p}, cfg);
    for (int step = 0; step < 50; ++step) {
      Tensor g({8});
      for (double& v : g.data) v = r.normal();
      adam_step({&p}, {&g}, s);
    }
    return p;
  };
  CHECK(run(42).data == run(42).data);
}

TEST_CASE("tensor finiteness guard detects NaN") {
  Tensor t({3});
  t.data = {1.0, 2.0, 3.0};
  CHECK(t.all_finite());
  t.data[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(t.all_finite());
  t.data[1] = std::numeric_limits<double>::infinity();
  CHECK_FALSE(t.all_finite());
}
