#pragma once

// Reference implementations and checking utilities shared by the test
// binaries. Everything here is written as plainly as possible and shares no
// code with the library kernels it is compared against.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "orbitfilter/layers.hpp"
#include "orbitfilter/rng.hpp"
#include "orbitfilter/tensor.hpp"

namespace oftest {

using orbitfilter::Rng;
using orbitfilter::Shape;
using orbitfilter::Tensor;

inline Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(orbitfilter::shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor(shape, std::move(v));
}

/// Direct seven-deep loop over (n, oc, oh, ow, ic, kh, kw) with explicit
/// bounds checks for the zero padding.
inline Tensor naive_conv(const Tensor& x, const Tensor& w, const Tensor* bias, std::size_t stride,
                         std::size_t pad, std::size_t groups) {
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t O = w.dim(0), Cg = w.dim(1), KH = w.dim(2), KW = w.dim(3);
  const std::size_t Og = O / groups;
  const std::size_t OH = (H + 2 * pad - KH) / stride + 1;
  const std::size_t OW = (W + 2 * pad - KW) / stride + 1;
  (void)C;
  Tensor y({N, O, OH, OW});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t o = 0; o < O; ++o) {
      const std::size_t g = o / Og;
      for (std::size_t oh = 0; oh < OH; ++oh)
        for (std::size_t ow = 0; ow < OW; ++ow) {
          double acc = bias ? (*bias)[o] : 0.0;
          for (std::size_t ci = 0; ci < Cg; ++ci)
            for (std::size_t kh = 0; kh < KH; ++kh)
              for (std::size_t kw = 0; kw < KW; ++kw) {
                const long ih = static_cast<long>(oh * stride + kh) - static_cast<long>(pad);
                const long iw = static_cast<long>(ow * stride + kw) - static_cast<long>(pad);
                if (ih < 0 || iw < 0 || ih >= static_cast<long>(H) || iw >= static_cast<long>(W))
                  continue;
                acc += w.at(o, ci, kh, kw) *
                       x.at(n, g * Cg + ci, static_cast<std::size_t>(ih),
                            static_cast<std::size_t>(iw));
              }
          y.at(n, o, oh, ow) = acc;
        }
    }
  return y;
}

/// Channel permutation written out directly from the group/column view: the
/// input is read as a (g x C/g) matrix of channels and emitted transposed.
inline Tensor naive_shuffle(const Tensor& x, std::size_t g) {
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t per = C / g;
  Tensor y(x.shape());
  std::size_t out_c = 0;
  for (std::size_t col = 0; col < per; ++col)
    for (std::size_t row = 0; row < g; ++row, ++out_c)
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t h = 0; h < H; ++h)
          for (std::size_t w = 0; w < W; ++w) y.at(n, out_c, h, w) = x.at(n, row * per + col, h, w);
  return y;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

/// Relative error between an analytic and a numeric derivative. Values
/// below `floor` in magnitude are compared on an absolute scale so that
/// derivatives that are analytically zero do not divide by round-off.
inline double relative_error(double analytic, double numeric, double floor = 1e-3) {
  const double scale = std::max({std::fabs(analytic), std::fabs(numeric), floor});
  return std::fabs(analytic - numeric) / scale;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Central finite differences of a scalar function with respect to every
/// element of `value`, compared against `analytic`. `value` is perturbed in
/// place and restored.
inline void check_tensor_gradient(Tensor& value, const Tensor& analytic,
                                  const std::function<double()>& loss, double h,
                                  GradCheck& out) {
  for (std::size_t i = 0; i < value.numel(); ++i) {
    const double saved = value[i];
    value[i] = saved + h;
    const double up = loss();
    value[i] = saved - h;
    const double down = loss();
    value[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    out.max_rel_error = std::max(out.max_rel_error, relative_error(analytic[i], numeric));
    ++out.checked;
  }
}

/// Checks dL/dx and every parameter gradient of `layer` for the scalar loss
/// L = sum(probe * layer(x)). The probe weights make every output element
/// contribute with a distinct coefficient.
inline GradCheck layer_gradient_check(orbitfilter::Layer& layer, Tensor x,
                                      orbitfilter::Mode mode, Rng& rng, double h = 1e-5) {
  const Tensor y0 = layer.forward(x, mode);
  const Tensor probe = random_tensor(y0.shape(), rng, -1.0, 1.0);
  const auto objective = [&]() {
    const Tensor y = layer.forward(x, mode);
    double s = 0.0;
    for (std::size_t i = 0; i < y.numel(); ++i) s += probe[i] * y[i];
    return s;
  };

  // Analytic gradients from one forward/backward pair.
  layer.forward(x, mode);
  const Tensor dx = layer.backward(probe);
  std::vector<Tensor> param_grads;
  for (const orbitfilter::Param& p : layer.params()) param_grads.push_back(*p.grad);

  // Running statistics must not drift while probing in train mode.
  std::vector<Tensor> saved_buffers;
  for (const orbitfilter::Buffer& b : layer.buffers()) saved_buffers.push_back(*b.value);
  const auto restore = [&]() {
    auto bufs = layer.buffers();
    for (std::size_t i = 0; i < bufs.size(); ++i) *bufs[i].value = saved_buffers[i];
  };
  const auto objective_frozen = [&]() {
    const double v = objective();
    restore();
    return v;
  };

  GradCheck result;
  check_tensor_gradient(x, dx, objective_frozen, h, result);
  auto params = layer.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    check_tensor_gradient(*params[i].value, param_grads[i], objective_frozen, h, result);
  }
  return result;
}

}  // namespace oftest
