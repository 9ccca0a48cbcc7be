#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "orbitfilter/layers.hpp"
#include "orbitfilter/train.hpp"
#include "support.hpp"

using namespace orbitfilter;

namespace {

constexpr double kStep = 1e-5;
constexpr double kTolerance = 1e-6;
constexpr int kShapes = 20;

// Inputs bounded away from the kinks of relu/relu6 so that a step of h never
// crosses a non-differentiable point.
Tensor away_from_kinks(const Shape& shape, Rng& rng) {
  Tensor t = oftest::random_tensor(shape, rng, -7.0, 7.0);
  for (double& v : t.data()) {
    for (double kink : {0.0, 6.0, -6.0}) {
      if (std::fabs(v - kink) < 0.05) v = kink + (v < kink ? -0.05 : 0.05);
    }
  }
  return t;
}

// Distinct values separated by at least 0.01 so that max pooling winners do
// not change under a step of h.
Tensor distinct_values(const Shape& shape, Rng& rng) {
  Tensor t(shape);
  std::vector<double> vals(t.numel());
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = 0.01 * static_cast<double>(i);
  for (std::size_t i = vals.size(); i > 1; --i) std::swap(vals[i - 1], vals[rng.below(i)]);
  for (std::size_t i = 0; i < vals.size(); ++i) t[i] = vals[i] - 0.005 * static_cast<double>(vals.size());
  return t;
}

void expect_gradients(Layer& layer, const Tensor& x, Mode mode, Rng& rng, const std::string& what) {
  const oftest::GradCheck r = oftest::layer_gradient_check(layer, x, mode, rng, kStep);
  EXPECT_GT(r.checked, 0u) << what;
  EXPECT_LT(r.max_rel_error, kTolerance) << what << " checked " << r.checked;
}

}  // namespace

TEST(Gradients, ConvolutionAllFamilies) {
  Rng rng(101, "grad-conv");
  for (int i = 0; i < kShapes * 2; ++i) {
    const std::size_t g = 1 + rng.below(3);
    const std::size_t cin = g * (1 + rng.below(2));
    std::size_t cout = g * (1 + rng.below(2));
    std::size_t k = 1 + 2 * rng.below(2);
    std::size_t groups = g;
    if (i % 4 == 0) {  // depthwise
      groups = cin;
      cout = cin;
      k = 3;
    }
    const std::size_t stride = 1 + rng.below(2);
    const std::size_t pad = k / 2;
    const bool bias = rng.below(2) == 1;
    Conv2d conv(cin, cout, k, {stride, pad, groups}, bias);
    conv.init(rng);
    const Tensor x = oftest::random_tensor({1 + rng.below(2), cin, 3 + rng.below(3), 3 + rng.below(3)}, rng);
    expect_gradients(conv, x, Mode::Train, rng, "conv case " + std::to_string(i));
  }
}

TEST(Gradients, ChannelShuffle) {
  Rng rng(102, "grad-shuffle");
  for (int i = 0; i < kShapes; ++i) {
    const std::size_t g = 1 + rng.below(4);
    ChannelShuffle layer(g);
    const Tensor x = oftest::random_tensor({1 + rng.below(2), g * (1 + rng.below(3)), 2, 2}, rng);
    expect_gradients(layer, x, Mode::Train, rng, "shuffle case " + std::to_string(i));
  }
}

TEST(Gradients, GroupRecombine) {
  Rng rng(103, "grad-recombine");
  for (int i = 0; i < kShapes; ++i) {
    const std::size_t g = 1 + rng.below(4);
    const std::size_t cg = 1 + rng.below(3);
    GroupRecombine layer(g * cg, g, 1 + rng.below(4));
    layer.init(rng);
    // Perturb the inputs until no pre-activation sits within 1e-3 of zero.
    Tensor x;
    for (int attempt = 0; attempt < 100; ++attempt) {
      x = oftest::random_tensor({1 + rng.below(2), g * cg, 2, 2}, rng);
      bool clear = true;
      for (std::size_t gi = 0; gi < g && clear; ++gi) {
        const Tensor& w = layer.group_weight(gi);
        for (std::size_t n = 0; n < x.dim(0) && clear; ++n)
          for (std::size_t o = 0; o < w.dim(0) && clear; ++o)
            for (std::size_t p = 0; p < 4 && clear; ++p) {
              double pre = 0.0;
              for (std::size_t j = 0; j < cg; ++j) pre += w.at(o, j, 0, 0) * x.at(n, gi * cg + j, p / 2, p % 2);
              if (std::fabs(pre) < 1e-3) clear = false;
            }
      }
      if (clear) break;
    }
    expect_gradients(layer, x, Mode::Train, rng, "recombine case " + std::to_string(i));
  }
}

TEST(Gradients, BatchNormTrainAndEval) {
  Rng rng(104, "grad-bn");
  for (int i = 0; i < kShapes; ++i) {
    const std::size_t c = 1 + rng.below(4);
    BatchNorm2d bn(c);
    for (double& v : bn.gamma().data()) v = rng.uniform(0.5, 1.5);
    for (double& v : bn.beta().data()) v = rng.uniform(-0.5, 0.5);
    for (double& v : bn.state().running_var.data()) v = rng.uniform(0.5, 2.0);
    const Tensor x = oftest::random_tensor({2 + rng.below(2), c, 1 + rng.below(3), 2}, rng);
    expect_gradients(bn, x, Mode::Train, rng, "bn train case " + std::to_string(i));
    expect_gradients(bn, x, Mode::Eval, rng, "bn eval case " + std::to_string(i));
  }
}

TEST(Gradients, BatchNormFlat) {
  Rng rng(105, "grad-bn-flat");
  for (int i = 0; i < kShapes; ++i) {
    const std::size_t c = 1 + rng.below(5);
    BatchNorm2d bn(c);
    const Tensor x = oftest::random_tensor({3 + rng.below(3), c}, rng);
    expect_gradients(bn, x, Mode::Train, rng, "bn flat case " + std::to_string(i));
  }
}

TEST(Gradients, Activations) {
  Rng rng(106, "grad-act");
  for (LayerKind kind : {LayerKind::Relu, LayerKind::Relu6}) {
    for (int i = 0; i < kShapes; ++i) {
      Activation act(kind);
      const Tensor x = away_from_kinks({1 + rng.below(2), 1 + rng.below(3), 2, 3}, rng);
      expect_gradients(act, x, Mode::Train, rng, std::string(kind_name(kind)) + " case " + std::to_string(i));
    }
  }
}

TEST(Gradients, MaxPool) {
  Rng rng(107, "grad-pool");
  for (int i = 0; i < kShapes; ++i) {
    MaxPool2d pool;
    const Tensor x = distinct_values({1 + rng.below(2), 1 + rng.below(3), 2 * (1 + rng.below(3)), 2 * (1 + rng.below(3))}, rng);
    expect_gradients(pool, x, Mode::Train, rng, "maxpool case " + std::to_string(i));
  }
}

TEST(Gradients, GlobalAvgPool) {
  Rng rng(108, "grad-gap");
  for (int i = 0; i < kShapes; ++i) {
    GlobalAvgPool gap;
    const Tensor x = oftest::random_tensor({1 + rng.below(3), 1 + rng.below(4), 1 + rng.below(4), 1 + rng.below(4)}, rng);
    expect_gradients(gap, x, Mode::Train, rng, "gap case " + std::to_string(i));
  }
}

TEST(Gradients, Linear) {
  Rng rng(109, "grad-linear");
  for (int i = 0; i < kShapes; ++i) {
    const std::size_t in = 1 + rng.below(6), out = 1 + rng.below(4);
    Linear layer(in, out);
    layer.init(rng);
    for (double& v : layer.bias().data()) v = rng.uniform(-1, 1);
    const Tensor x = oftest::random_tensor({1 + rng.below(3), in}, rng);
    expect_gradients(layer, x, Mode::Train, rng, "linear case " + std::to_string(i));
  }
}

TEST(Gradients, SoftmaxCrossEntropy) {
  Rng rng(110, "grad-loss");
  for (int i = 0; i < kShapes; ++i) {
    const std::size_t n = 1 + rng.below(5), k = 2 + rng.below(4);
    Tensor logits = oftest::random_tensor({n, k}, rng, -3.0, 3.0);
    std::vector<std::size_t> labels(n);
    for (auto& l : labels) l = rng.below(k);
    const LossResult base = softmax_cross_entropy(logits, labels);
    oftest::GradCheck r;
    oftest::check_tensor_gradient(
        logits, base.grad, [&]() { return softmax_cross_entropy(logits, labels).loss; }, kStep, r);
    EXPECT_LT(r.max_rel_error, kTolerance) << "loss case " << i;
  }
}
