#include "orbitfilter/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "orbitfilter/error.hpp"

namespace orbitfilter {

std::string_view kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv: return "Conv";
    case LayerKind::ChannelShuffle: return "ChannelShuffle";
    case LayerKind::GroupRecombine: return "GroupRecombine";
    case LayerKind::BatchNorm: return "BatchNorm";
    case LayerKind::Relu6: return "Relu6";
    case LayerKind::Relu: return "Relu";
    case LayerKind::MaxPool: return "MaxPool";
    case LayerKind::GlobalAvgPool: return "GlobalAvgPool";
    case LayerKind::Linear: return "Linear";
  }
  return "Unknown";
}

namespace {

void require_rank(const Tensor& t, std::size_t rank, std::string_view what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) +
                     " input, got " + shape_str(t.shape()));
  }
}

[[noreturn]] void no_forward(std::string_view what) {
  throw Error(std::string(what) + ": backward called before forward");
}

// Range of output columns whose input column ow*stride + k - pad lies in [0, in).
struct ColumnRange {
  std::size_t lo = 0;
  std::size_t hi = 0;  // exclusive
};

ColumnRange valid_columns(std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
                          std::size_t pad) {
  const auto s = static_cast<long>(stride);
  const long shift = static_cast<long>(k) - static_cast<long>(pad);
  // ow*s + shift >= 0  and  ow*s + shift <= in - 1
  long lo = 0;
  if (shift < 0) lo = (-shift + s - 1) / s;
  long hi_incl = static_cast<long>(in) - 1 - shift;
  if (hi_incl < 0) return {0, 0};
  hi_incl /= s;
  long hi = std::min<long>(hi_incl + 1, static_cast<long>(out));
  if (hi <= lo) return {0, 0};
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

struct ConvGeometry {
  std::size_t n, cin, h, w;
  std::size_t cout, cpg, kh, kw;
  std::size_t oh, ow;
  std::size_t opg;
};

ConvGeometry conv_geometry(const Tensor& x, const Tensor& weight, const ConvHyper& hyper) {
  require_rank(x, 4, "conv2d");
  if (weight.rank() != 4) {
    throw ShapeError("conv2d: weight must be rank 4, got " + shape_str(weight.shape()));
  }
  if (hyper.stride == 0) throw ShapeError("conv2d: stride must be >= 1");
  if (hyper.groups == 0) throw ShapeError("conv2d: groups must be >= 1");
  ConvGeometry g{};
  g.n = x.dim(0);
  g.cin = x.dim(1);
  g.h = x.dim(2);
  g.w = x.dim(3);
  g.cout = weight.dim(0);
  g.cpg = weight.dim(1);
  g.kh = weight.dim(2);
  g.kw = weight.dim(3);
  if (g.cin % hyper.groups != 0 || g.cout % hyper.groups != 0) {
    throw ShapeError("conv2d: channels (in " + std::to_string(g.cin) + ", out " +
                     std::to_string(g.cout) + ") not divisible by groups " +
                     std::to_string(hyper.groups));
  }
  if (g.cpg != g.cin / hyper.groups) {
    throw ShapeError("conv2d: weight " + shape_str(weight.shape()) + " expects " +
                     std::to_string(g.cpg) + " input channels per group, input has " +
                     std::to_string(g.cin / hyper.groups));
  }
  if (g.h + 2 * hyper.pad < g.kh || g.w + 2 * hyper.pad < g.kw) {
    throw ShapeError("conv2d: kernel " + std::to_string(g.kh) + "x" + std::to_string(g.kw) +
                     " larger than padded input " + shape_str(x.shape()));
  }
  g.oh = conv_out_extent(g.h, g.kh, hyper.stride, hyper.pad);
  g.ow = conv_out_extent(g.w, g.kw, hyper.stride, hyper.pad);
  g.opg = g.cout / hyper.groups;
  return g;
}

}  // namespace

namespace {

// Four independent partial sums in a fixed order, so results stay reproducible.
double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace

std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                            std::size_t pad) {
  if (stride == 0) throw ShapeError("stride must be >= 1");
  if (in + 2 * pad < kernel) throw ShapeError("kernel larger than padded input");
  return (in + 2 * pad - kernel) / stride + 1;
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor* bias, const ConvHyper& hyper) {
  const ConvGeometry g = conv_geometry(x, weight, hyper);
  if (bias && (bias->rank() != 1 || bias->dim(0) != g.cout)) {
    throw ShapeError("conv2d: bias must have length " + std::to_string(g.cout));
  }
  Tensor out({g.n, g.cout, g.oh, g.ow});
  const std::size_t s = hyper.stride;
  const std::size_t in_plane = g.h * g.w;
  const std::size_t out_plane = g.oh * g.ow;
  const bool flat = g.kh == 1 && g.kw == 1 && s == 1 && hyper.pad == 0;
  auto xs = x.data();
  auto ws = weight.data();
  auto os = out.data();

  std::vector<ColumnRange> cols(g.kw);
  for (std::size_t kx = 0; kx < g.kw; ++kx) cols[kx] = valid_columns(g.w, g.ow, kx, s, hyper.pad);

  for (std::size_t n = 0; n < g.n; ++n) {
    if (flat) {
      // Pointwise: four output channels of one group share each input read.
      for (std::size_t oc = 0; oc < g.cout;) {
        const std::size_t grp = oc / g.opg;
        const std::size_t block = std::min<std::size_t>(4, (grp + 1) * g.opg - oc);
        double* dst[4];
        for (std::size_t j = 0; j < block; ++j) {
          dst[j] = os.data() + (n * g.cout + oc + j) * out_plane;
          if (bias) std::fill(dst[j], dst[j] + out_plane, (*bias)[oc + j]);
        }
        for (std::size_t icl = 0; icl < g.cpg; ++icl) {
          const double* src = xs.data() + (n * g.cin + grp * g.cpg + icl) * in_plane;
          if (block == 4) {
            const double w0 = ws[oc * g.cpg + icl], w1 = ws[(oc + 1) * g.cpg + icl];
            const double w2 = ws[(oc + 2) * g.cpg + icl], w3 = ws[(oc + 3) * g.cpg + icl];
            double *d0 = dst[0], *d1 = dst[1], *d2 = dst[2], *d3 = dst[3];
            for (std::size_t i = 0; i < out_plane; ++i) {
              const double v = src[i];
              d0[i] += w0 * v;
              d1[i] += w1 * v;
              d2[i] += w2 * v;
              d3[i] += w3 * v;
            }
          } else {
            for (std::size_t j = 0; j < block; ++j) {
              const double wv = ws[(oc + j) * g.cpg + icl];
              for (std::size_t i = 0; i < out_plane; ++i) dst[j][i] += wv * src[i];
            }
          }
        }
        oc += block;
      }
      continue;
    }
    for (std::size_t oc = 0; oc < g.cout; ++oc) {
      double* dst = os.data() + (n * g.cout + oc) * out_plane;
      if (bias) std::fill(dst, dst + out_plane, (*bias)[oc]);
      const std::size_t grp = oc / g.opg;
      for (std::size_t icl = 0; icl < g.cpg; ++icl) {
        const std::size_t ic = grp * g.cpg + icl;
        const double* src = xs.data() + (n * g.cin + ic) * in_plane;
        const double* wk = ws.data() + (oc * g.cpg + icl) * g.kh * g.kw;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            const double wv = wk[ky * g.kw + kx];
            const ColumnRange cr = cols[kx];
            if (cr.lo >= cr.hi) continue;
            for (std::size_t oy = 0; oy < g.oh; ++oy) {
              const long iy = static_cast<long>(oy * s + ky) - static_cast<long>(hyper.pad);
              if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
              const double* srow = src + static_cast<std::size_t>(iy) * g.w;
              double* drow = dst + oy * g.ow;
              const std::size_t ix0 = cr.lo * s + kx - hyper.pad;
              if (s == 1) {
                const double* sp = srow + ix0 - cr.lo;
                for (std::size_t ox = cr.lo; ox < cr.hi; ++ox) drow[ox] += wv * sp[ox];
              } else {
                std::size_t ix = ix0;
                for (std::size_t ox = cr.lo; ox < cr.hi; ++ox, ix += s) drow[ox] += wv * srow[ix];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

ConvGrads conv2d_backward(const Tensor& x, const Tensor& weight, bool has_bias,
                          const Tensor& grad_out, const ConvHyper& hyper) {
  const ConvGeometry g = conv_geometry(x, weight, hyper);
  if (grad_out.shape() != Shape{g.n, g.cout, g.oh, g.ow}) {
    throw ShapeError("conv2d backward: grad shape " + shape_str(grad_out.shape()) +
                     " does not match output shape " + shape_str({g.n, g.cout, g.oh, g.ow}));
  }
  ConvGrads grads{Tensor(x.shape()), Tensor(weight.shape()), std::nullopt};
  if (has_bias) grads.bias = Tensor({g.cout});
  const std::size_t s = hyper.stride;
  const std::size_t in_plane = g.h * g.w;
  const std::size_t out_plane = g.oh * g.ow;
  const bool flat = g.kh == 1 && g.kw == 1 && s == 1 && hyper.pad == 0;
  auto xs = x.data();
  auto ws = weight.data();
  auto gos = grad_out.data();
  auto gxs = grads.input.data();
  auto gws = grads.weight.data();

  std::vector<ColumnRange> cols(g.kw);
  for (std::size_t kx = 0; kx < g.kw; ++kx) cols[kx] = valid_columns(g.w, g.ow, kx, s, hyper.pad);

  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t oc = 0; oc < g.cout; ++oc) {
      const double* go = gos.data() + (n * g.cout + oc) * out_plane;
      if (has_bias) {
        double acc = 0.0;
        for (std::size_t i = 0; i < out_plane; ++i) acc += go[i];
        (*grads.bias)[oc] += acc;
      }
      const std::size_t grp = oc / g.opg;
      for (std::size_t icl = 0; icl < g.cpg; ++icl) {
        const std::size_t ic = grp * g.cpg + icl;
        const double* src = xs.data() + (n * g.cin + ic) * in_plane;
        double* gsrc = gxs.data() + (n * g.cin + ic) * in_plane;
        const std::size_t woff = (oc * g.cpg + icl) * g.kh * g.kw;
        if (flat) {
          const double wv = ws[woff];
          for (std::size_t i = 0; i < out_plane; ++i) gsrc[i] += wv * go[i];
          gws[woff] += dot(go, src, out_plane);
          continue;
        }
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            const double wv = ws[woff + ky * g.kw + kx];
            const ColumnRange cr = cols[kx];
            if (cr.lo >= cr.hi) continue;
            double acc = 0.0;
            for (std::size_t oy = 0; oy < g.oh; ++oy) {
              const long iy = static_cast<long>(oy * s + ky) - static_cast<long>(hyper.pad);
              if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
              const std::size_t row = static_cast<std::size_t>(iy) * g.w;
              const double* srow = src + row;
              double* grow = gsrc + row;
              const double* orow = go + oy * g.ow;
              const std::size_t ix0 = cr.lo * s + kx - hyper.pad;
              if (s == 1) {
                const double* sp = srow + ix0;
                double* gp = grow + ix0;
                const double* op = orow + cr.lo;
                const std::size_t len = cr.hi - cr.lo;
                for (std::size_t i = 0; i < len; ++i) gp[i] += wv * op[i];
                acc += dot(op, sp, len);
              } else {
                std::size_t ix = ix0;
                for (std::size_t ox = cr.lo; ox < cr.hi; ++ox, ix += s) {
                  acc += orow[ox] * srow[ix];
                  grow[ix] += wv * orow[ox];
                }
              }
            }
            gws[woff + ky * g.kw + kx] += acc;
          }
        }
      }
    }
  }
  return grads;
}

namespace {

Tensor permute_channels(const Tensor& x, std::size_t groups, bool inverse) {
  require_rank(x, 4, "channel_shuffle");
  const std::size_t c = x.dim(1);
  if (groups == 0 || c % groups != 0) {
    throw ShapeError("channel_shuffle: " + std::to_string(c) + " channels not divisible by " +
                     std::to_string(groups) + " groups");
  }
  const std::size_t per_group = c / groups;
  const std::size_t plane = x.dim(2) * x.dim(3);
  Tensor out(x.shape());
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t n = 0; n < x.dim(0); ++n) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t moved = (ch % per_group) * groups + ch / per_group;
      const std::size_t from = inverse ? moved : ch;
      const std::size_t to = inverse ? ch : moved;
      std::copy_n(src.data() + (n * c + from) * plane, plane, dst.data() + (n * c + to) * plane);
    }
  }
  return out;
}

}  // namespace

Tensor channel_shuffle(const Tensor& x, std::size_t groups) {
  return permute_channels(x, groups, false);
}

Tensor channel_unshuffle(const Tensor& x, std::size_t groups) {
  return permute_channels(x, groups, true);
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  return out;
}

Tensor relu6(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = std::min(std::max(x[i], 0.0), 6.0);
  return out;
}

PoolResult maxpool2d(const Tensor& x) {
  require_rank(x, 4, "maxpool2d");
  const std::size_t h = x.dim(2), w = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("maxpool2d: spatial extents must be even, got " + shape_str(x.shape()));
  }
  const std::size_t oh = h / 2, ow = w / 2;
  const std::size_t planes = x.dim(0) * x.dim(1);
  PoolResult r{Tensor({x.dim(0), x.dim(1), oh, ow}), {}};
  r.argmax.resize(r.output.numel());
  auto xs = x.data();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = p * h * w + (2 * oy) * w + 2 * ox;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = p * h * w + (2 * oy + dy) * w + 2 * ox + dx;
            if (xs[idx] > xs[best]) best = idx;
          }
        }
        const std::size_t o = (p * oh + oy) * ow + ox;
        r.output[o] = xs[best];
        r.argmax[o] = best;
      }
    }
  }
  return r;
}

Tensor global_avg_pool(const Tensor& x) {
  require_rank(x, 4, "global_avg_pool");
  const std::size_t plane = x.dim(2) * x.dim(3);
  Tensor out({x.dim(0), x.dim(1)});
  auto xs = x.data();
  for (std::size_t p = 0; p < out.numel(); ++p) {
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) acc += xs[p * plane + i];
    out[p] = acc / static_cast<double>(plane);
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank(x, 2, "linear");
  if (weight.rank() != 2 || weight.dim(1) != x.dim(1)) {
    throw ShapeError("linear: weight " + shape_str(weight.shape()) + " incompatible with input " +
                     shape_str(x.shape()));
  }
  const std::size_t n = x.dim(0), f = x.dim(1), k = weight.dim(0);
  if (bias.rank() != 1 || bias.dim(0) != k) {
    throw ShapeError("linear: bias must have length " + std::to_string(k));
  }
  Tensor out({n, k});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      double acc = bias[j];
      for (std::size_t t = 0; t < f; ++t) acc += x[i * f + t] * weight[j * f + t];
      out[i * k + j] = acc;
    }
  }
  return out;
}

Tensor fan_in_uniform(const Shape& shape, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  return tensor_random(shape, UniformDist{-bound, bound}, rng);
}

void Layer::zero_grad() {
  for (Param& p : params()) std::fill(p.grad->data().begin(), p.grad->data().end(), 0.0);
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
               ConvHyper hyper, bool bias)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      hyper_(hyper),
      has_bias_(bias) {
  if (hyper_.groups == 0 || in_channels % hyper_.groups != 0 ||
      out_channels % hyper_.groups != 0) {
    throw ShapeError("Conv2d: channels " + std::to_string(in_channels) + "->" +
                     std::to_string(out_channels) + " not divisible by groups " +
                     std::to_string(hyper_.groups));
  }
  if (kernel == 0 || hyper_.stride == 0) throw ShapeError("Conv2d: kernel and stride must be >= 1");
  weight_ = Tensor({out_channels, in_channels / hyper_.groups, kernel, kernel});
  weight_grad_ = Tensor(weight_.shape());
  if (has_bias_) {
    bias_ = Tensor({out_channels});
    bias_grad_ = Tensor({out_channels});
  }
}

std::unique_ptr<Layer> Conv2d::clone() const { return std::make_unique<Conv2d>(*this); }

Tensor Conv2d::forward(const Tensor& x, Mode mode) {
  (void)mode;
  Tensor out = conv2d(x, weight_, has_bias_ ? &bias_ : nullptr, hyper_);
  cache_x_ = x;
  return out;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  if (!cache_x_) no_forward("Conv2d");
  ConvGrads g = conv2d_backward(*cache_x_, weight_, has_bias_, grad_out, hyper_);
  weight_grad_ = std::move(g.weight);
  if (has_bias_) bias_grad_ = std::move(*g.bias);
  return std::move(g.input);
}

std::vector<Param> Conv2d::params() {
  std::vector<Param> ps{{"weight", &weight_, &weight_grad_}};
  if (has_bias_) ps.push_back({"bias", &bias_, &bias_grad_});
  return ps;
}

Shape Conv2d::output_shape(const Shape& in) const {
  if (in.size() != 4 || in[1] != in_channels_) {
    throw ShapeError(describe() + ": incompatible input " + shape_str(in));
  }
  return {in[0], out_channels_, conv_out_extent(in[2], kernel_, hyper_.stride, hyper_.pad),
          conv_out_extent(in[3], kernel_, hyper_.stride, hyper_.pad)};
}

std::uint64_t Conv2d::macs(const Shape& in) const {
  const Shape out = output_shape({1, in.at(0), in.at(1), in.at(2)});
  return static_cast<std::uint64_t>(out_channels_) * (in_channels_ / hyper_.groups) * kernel_ *
         kernel_ * out[2] * out[3];
}

void Conv2d::init(Rng& rng) {
  weight_ = fan_in_uniform(weight_.shape(), (in_channels_ / hyper_.groups) * kernel_ * kernel_, rng);
  if (has_bias_) bias_ = Tensor({out_channels_});
}

std::string Conv2d::describe() const {
  std::ostringstream os;
  os << "Conv " << in_channels_ << "->" << out_channels_ << " k" << kernel_ << " s" << hyper_.stride
     << " p" << hyper_.pad << " g" << hyper_.groups;
  return os.str();
}

// ---------------------------------------------------------------------------
// ChannelShuffle

ChannelShuffle::ChannelShuffle(std::size_t groups) : groups_(groups) {
  if (groups == 0) throw ShapeError("ChannelShuffle: groups must be >= 1");
}

std::unique_ptr<Layer> ChannelShuffle::clone() const {
  return std::make_unique<ChannelShuffle>(*this);
}

Tensor ChannelShuffle::forward(const Tensor& x, Mode mode) {
  (void)mode;
  primed_ = true;
  return channel_shuffle(x, groups_);
}

Tensor ChannelShuffle::backward(const Tensor& grad_out) {
  if (!primed_) no_forward("ChannelShuffle");
  return channel_unshuffle(grad_out, groups_);
}

Shape ChannelShuffle::output_shape(const Shape& in) const {
  if (in.size() != 4 || in[1] % groups_ != 0) {
    throw ShapeError(describe() + ": incompatible input " + shape_str(in));
  }
  return in;
}

std::string ChannelShuffle::describe() const {
  return "ChannelShuffle g" + std::to_string(groups_);
}

// ---------------------------------------------------------------------------
// GroupRecombine

GroupRecombine::GroupRecombine(std::size_t in_channels, std::size_t groups,
                               std::size_t out_channels)
    : in_channels_(in_channels), groups_(groups), out_channels_(out_channels) {
  if (groups == 0 || in_channels % groups != 0) {
    throw ShapeError("GroupRecombine: " + std::to_string(in_channels) +
                     " channels not divisible by " + std::to_string(groups) + " groups");
  }
  for (std::size_t i = 0; i < groups; ++i) {
    weights_.emplace_back(Shape{out_channels, in_channels / groups, 1, 1});
    weight_grads_.emplace_back(Shape{out_channels, in_channels / groups, 1, 1});
  }
}

std::unique_ptr<Layer> GroupRecombine::clone() const {
  return std::make_unique<GroupRecombine>(*this);
}

Tensor GroupRecombine::stacked_weight() const {
  const Shape expect{out_channels_, in_channels_ / groups_, 1, 1};
  std::vector<double> stacked;
  stacked.reserve(groups_ * shape_numel(expect));
  for (const Tensor& w : weights_) {
    if (w.shape() != expect) {
      throw ShapeError("GroupRecombine: group weight " + shape_str(w.shape()) + " must be " +
                       shape_str(expect));
    }
    stacked.insert(stacked.end(), w.values().begin(), w.values().end());
  }
  return Tensor({groups_ * out_channels_, in_channels_ / groups_, 1, 1}, std::move(stacked));
}

Tensor GroupRecombine::forward(const Tensor& x, Mode mode) {
  (void)mode;
  output_shape(x.shape());
  // Group i of a grouped 1x1 conv reads exactly slice i and writes block i.
  Tensor pre = conv2d(x, stacked_weight(), nullptr, ConvHyper{1, 0, groups_});
  const std::size_t n = x.dim(0), plane = x.dim(2) * x.dim(3);
  const std::size_t block = out_channels_ * plane;
  Tensor out({n, out_channels_, x.dim(2), x.dim(3)});
  for (std::size_t b = 0; b < n; ++b) {
    double* dst = out.data().data() + b * block;
    for (std::size_t i = 0; i < groups_; ++i) {
      const double* src = pre.data().data() + (b * groups_ + i) * block;
      for (std::size_t j = 0; j < block; ++j) dst[j] += src[j] > 0.0 ? src[j] : 0.0;
    }
  }
  cache_x_ = x;
  cache_pre_ = std::move(pre);
  return out;
}

Tensor GroupRecombine::backward(const Tensor& grad_out) {
  if (!cache_x_ || !cache_pre_) no_forward("GroupRecombine");
  const std::size_t n = cache_x_->dim(0), plane = cache_x_->dim(2) * cache_x_->dim(3);
  const std::size_t block = out_channels_ * plane;
  if (grad_out.shape() != Shape{n, out_channels_, cache_x_->dim(2), cache_x_->dim(3)}) {
    throw ShapeError("GroupRecombine backward: unexpected grad shape " +
                     shape_str(grad_out.shape()));
  }
  Tensor grad_pre(cache_pre_->shape());
  for (std::size_t b = 0; b < n; ++b) {
    const double* go = grad_out.data().data() + b * block;
    for (std::size_t i = 0; i < groups_; ++i) {
      const std::size_t off = (b * groups_ + i) * block;
      const double* pre = cache_pre_->data().data() + off;
      double* gp = grad_pre.data().data() + off;
      for (std::size_t j = 0; j < block; ++j) gp[j] = pre[j] > 0.0 ? go[j] : 0.0;
    }
  }
  ConvGrads g =
      conv2d_backward(*cache_x_, stacked_weight(), false, grad_pre, ConvHyper{1, 0, groups_});
  const std::size_t per = weights_.front().numel();
  for (std::size_t i = 0; i < groups_; ++i) {
    auto src = g.weight.data().subspan(i * per, per);
    std::copy(src.begin(), src.end(), weight_grads_[i].data().begin());
  }
  return std::move(g.input);
}

std::vector<Param> GroupRecombine::params() {
  std::vector<Param> ps;
  for (std::size_t i = 0; i < groups_; ++i) {
    ps.push_back({"weight." + std::to_string(i), &weights_[i], &weight_grads_[i]});
  }
  return ps;
}

Shape GroupRecombine::output_shape(const Shape& in) const {
  if (in.size() != 4 || in[1] != in_channels_) {
    throw ShapeError(describe() + ": incompatible input " + shape_str(in));
  }
  return {in[0], out_channels_, in[2], in[3]};
}

std::uint64_t GroupRecombine::macs(const Shape& in) const {
  return static_cast<std::uint64_t>(groups_) * out_channels_ * (in_channels_ / groups_) *
         in.at(1) * in.at(2);
}

void GroupRecombine::init(Rng& rng) {
  for (Tensor& w : weights_) w = fan_in_uniform(w.shape(), in_channels_ / groups_, rng);
}

std::string GroupRecombine::describe() const {
  return "GroupRecombine " + std::to_string(in_channels_) + "->" + std::to_string(out_channels_) +
         " G" + std::to_string(groups_);
}

// ---------------------------------------------------------------------------
// BatchNorm2d

namespace {

struct ChannelLayout {
  std::size_t n, c, spatial;
};

ChannelLayout channel_layout(const Tensor& x, std::size_t channels) {
  if (x.rank() != 4 && x.rank() != 2) {
    throw ShapeError("BatchNorm: expected [N,C,H,W] or [N,C], got " + shape_str(x.shape()));
  }
  if (x.dim(1) != channels) {
    throw ShapeError("BatchNorm: input has " + std::to_string(x.dim(1)) +
                     " channels, layer has " + std::to_string(channels));
  }
  std::size_t spatial = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
  return {x.dim(0), x.dim(1), spatial};
}

}  // namespace

BatchNorm2d::BatchNorm2d(std::size_t channels, double momentum, double epsilon)
    : channels_(channels),
      gamma_({channels}, 1.0),
      gamma_grad_({channels}),
      beta_({channels}),
      beta_grad_({channels}) {
  if (!(momentum > 0.0 && momentum <= 1.0)) throw Error("BatchNorm: momentum must be in (0,1]");
  if (!(epsilon > 0.0)) throw Error("BatchNorm: epsilon must be positive");
  state_.running_mean = Tensor({channels}, 0.0);
  state_.running_var = Tensor({channels}, 1.0);
  state_.momentum = momentum;
  state_.epsilon = epsilon;
}

std::unique_ptr<Layer> BatchNorm2d::clone() const { return std::make_unique<BatchNorm2d>(*this); }

Tensor BatchNorm2d::forward(const Tensor& x, Mode mode) {
  const ChannelLayout l = channel_layout(x, channels_);
  if (gamma_.numel() != channels_ || beta_.numel() != channels_) {
    throw ShapeError("BatchNorm: gamma/beta length must equal channel count");
  }
  const std::size_t count = l.n * l.spatial;
  Tensor out(x.shape());
  Tensor xhat(x.shape());
  cache_inv_std_.assign(channels_, 0.0);
  auto xs = x.data();
  for (std::size_t c = 0; c < channels_; ++c) {
    double mean = 0.0, var = 0.0;
    if (mode == Mode::Train) {
      for (std::size_t b = 0; b < l.n; ++b) {
        const double* p = xs.data() + (b * l.c + c) * l.spatial;
        for (std::size_t i = 0; i < l.spatial; ++i) mean += p[i];
      }
      mean /= static_cast<double>(count);
      for (std::size_t b = 0; b < l.n; ++b) {
        const double* p = xs.data() + (b * l.c + c) * l.spatial;
        for (std::size_t i = 0; i < l.spatial; ++i) var += (p[i] - mean) * (p[i] - mean);
      }
      var /= static_cast<double>(count);
      const double m = state_.momentum;
      const double unbiased =
          count > 1 ? var * static_cast<double>(count) / static_cast<double>(count - 1) : var;
      state_.running_mean[c] = (1.0 - m) * state_.running_mean[c] + m * mean;
      state_.running_var[c] = (1.0 - m) * state_.running_var[c] + m * unbiased;
    } else {
      mean = state_.running_mean[c];
      var = state_.running_var[c];
    }
    const double inv_std = 1.0 / std::sqrt(var + state_.epsilon);
    cache_inv_std_[c] = inv_std;
    const double g = gamma_[c], bt = beta_[c];
    for (std::size_t b = 0; b < l.n; ++b) {
      const std::size_t off = (b * l.c + c) * l.spatial;
      for (std::size_t i = 0; i < l.spatial; ++i) {
        const double xh = (xs[off + i] - mean) * inv_std;
        xhat[off + i] = xh;
        out[off + i] = g * xh + bt;
      }
    }
  }
  cache_xhat_ = std::move(xhat);
  cache_mode_ = mode;
  return out;
}

Tensor BatchNorm2d::backward(const Tensor& grad_out) {
  if (!cache_xhat_) no_forward("BatchNorm");
  if (grad_out.shape() != cache_xhat_->shape()) {
    throw ShapeError("BatchNorm backward: unexpected grad shape " + shape_str(grad_out.shape()));
  }
  const ChannelLayout l = channel_layout(grad_out, channels_);
  const double count = static_cast<double>(l.n * l.spatial);
  Tensor grad_in(grad_out.shape());
  const Tensor& xhat = *cache_xhat_;
  for (std::size_t c = 0; c < channels_; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t b = 0; b < l.n; ++b) {
      const std::size_t off = (b * l.c + c) * l.spatial;
      for (std::size_t i = 0; i < l.spatial; ++i) {
        sum_dy += grad_out[off + i];
        sum_dy_xhat += grad_out[off + i] * xhat[off + i];
      }
    }
    gamma_grad_[c] = sum_dy_xhat;
    beta_grad_[c] = sum_dy;
    const double scale = gamma_[c] * cache_inv_std_[c];
    for (std::size_t b = 0; b < l.n; ++b) {
      const std::size_t off = (b * l.c + c) * l.spatial;
      for (std::size_t i = 0; i < l.spatial; ++i) {
        if (cache_mode_ == Mode::Train) {
          grad_in[off + i] =
              scale * (grad_out[off + i] - sum_dy / count - xhat[off + i] * sum_dy_xhat / count);
        } else {
          grad_in[off + i] = scale * grad_out[off + i];
        }
      }
    }
  }
  return grad_in;
}

std::vector<Param> BatchNorm2d::params() {
  return {{"gamma", &gamma_, &gamma_grad_}, {"beta", &beta_, &beta_grad_}};
}

std::vector<Buffer> BatchNorm2d::buffers() {
  return {{"running_mean", &state_.running_mean}, {"running_var", &state_.running_var}};
}

Shape BatchNorm2d::output_shape(const Shape& in) const {
  if ((in.size() != 4 && in.size() != 2) || in[1] != channels_) {
    throw ShapeError(describe() + ": incompatible input " + shape_str(in));
  }
  return in;
}

std::uint64_t BatchNorm2d::macs(const Shape& in) const {
  return 2ULL * shape_numel(in);
}

void BatchNorm2d::init(Rng& rng) {
  (void)rng;
  gamma_ = Tensor({channels_}, 1.0);
  beta_ = Tensor({channels_}, 0.0);
  state_.running_mean = Tensor({channels_}, 0.0);
  state_.running_var = Tensor({channels_}, 1.0);
}

std::string BatchNorm2d::describe() const { return "BatchNorm " + std::to_string(channels_); }

// ---------------------------------------------------------------------------
// Activation

Activation::Activation(LayerKind kind) : kind_(kind) {
  if (kind != LayerKind::Relu && kind != LayerKind::Relu6) {
    throw Error("Activation: kind must be Relu or Relu6");
  }
}

std::unique_ptr<Layer> Activation::clone() const { return std::make_unique<Activation>(*this); }

Tensor Activation::forward(const Tensor& x, Mode mode) {
  (void)mode;
  cache_x_ = x;
  return kind_ == LayerKind::Relu ? relu(x) : relu6(x);
}

Tensor Activation::backward(const Tensor& grad_out) {
  if (!cache_x_) no_forward(kind_name(kind_));
  if (grad_out.shape() != cache_x_->shape()) {
    throw ShapeError("Activation backward: unexpected grad shape " + shape_str(grad_out.shape()));
  }
  Tensor grad_in(grad_out.shape());
  const double ceiling = kind_ == LayerKind::Relu6 ? 6.0 : std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grad_out.numel(); ++i) {
    const double v = (*cache_x_)[i];
    grad_in[i] = (v > 0.0 && v < ceiling) ? grad_out[i] : 0.0;
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// MaxPool2d

std::unique_ptr<Layer> MaxPool2d::clone() const { return std::make_unique<MaxPool2d>(*this); }

Tensor MaxPool2d::forward(const Tensor& x, Mode mode) {
  (void)mode;
  PoolResult r = maxpool2d(x);
  cache_in_shape_ = x.shape();
  cache_argmax_ = std::move(r.argmax);
  return std::move(r.output);
}

Tensor MaxPool2d::backward(const Tensor& grad_out) {
  if (!cache_in_shape_) no_forward("MaxPool");
  if (grad_out.numel() != cache_argmax_.size()) {
    throw ShapeError("MaxPool backward: unexpected grad shape " + shape_str(grad_out.shape()));
  }
  Tensor grad_in(*cache_in_shape_);
  for (std::size_t i = 0; i < cache_argmax_.size(); ++i) grad_in[cache_argmax_[i]] += grad_out[i];
  return grad_in;
}

Shape MaxPool2d::output_shape(const Shape& in) const {
  if (in.size() != 4 || in[2] % 2 != 0 || in[3] % 2 != 0) {
    throw ShapeError("MaxPool: requires even spatial extents, got " + shape_str(in));
  }
  return {in[0], in[1], in[2] / 2, in[3] / 2};
}

// ---------------------------------------------------------------------------
// GlobalAvgPool

std::unique_ptr<Layer> GlobalAvgPool::clone() const {
  return std::make_unique<GlobalAvgPool>(*this);
}

Tensor GlobalAvgPool::forward(const Tensor& x, Mode mode) {
  (void)mode;
  Tensor out = global_avg_pool(x);
  cache_in_shape_ = x.shape();
  return out;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_out) {
  if (!cache_in_shape_) no_forward("GlobalAvgPool");
  const Shape& in = *cache_in_shape_;
  if (grad_out.shape() != Shape{in[0], in[1]}) {
    throw ShapeError("GlobalAvgPool backward: unexpected grad shape " +
                     shape_str(grad_out.shape()));
  }
  const std::size_t plane = in[2] * in[3];
  const double inv = 1.0 / static_cast<double>(plane);
  Tensor grad_in(in);
  for (std::size_t p = 0; p < grad_out.numel(); ++p) {
    const double v = grad_out[p] * inv;
    std::fill_n(grad_in.data().data() + p * plane, plane, v);
  }
  return grad_in;
}

Shape GlobalAvgPool::output_shape(const Shape& in) const {
  if (in.size() != 4) throw ShapeError("GlobalAvgPool: expected rank-4 input, got " + shape_str(in));
  return {in[0], in[1]};
}

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(std::size_t in_features, std::size_t out_features)
    : in_features_(in_features),
      out_features_(out_features),
      weight_({out_features, in_features}),
      weight_grad_({out_features, in_features}),
      bias_({out_features}),
      bias_grad_({out_features}) {}

std::unique_ptr<Layer> Linear::clone() const { return std::make_unique<Linear>(*this); }

Tensor Linear::forward(const Tensor& x, Mode mode) {
  (void)mode;
  Tensor out = linear(x, weight_, bias_);
  cache_x_ = x;
  return out;
}

Tensor Linear::backward(const Tensor& grad_out) {
  if (!cache_x_) no_forward("Linear");
  const std::size_t n = cache_x_->dim(0);
  if (grad_out.shape() != Shape{n, out_features_}) {
    throw ShapeError("Linear backward: unexpected grad shape " + shape_str(grad_out.shape()));
  }
  const Tensor& x = *cache_x_;
  Tensor grad_in({n, in_features_});
  std::fill(weight_grad_.data().begin(), weight_grad_.data().end(), 0.0);
  std::fill(bias_grad_.data().begin(), bias_grad_.data().end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < out_features_; ++k) {
      const double g = grad_out[i * out_features_ + k];
      bias_grad_[k] += g;
      for (std::size_t f = 0; f < in_features_; ++f) {
        weight_grad_[k * in_features_ + f] += g * x[i * in_features_ + f];
        grad_in[i * in_features_ + f] += g * weight_[k * in_features_ + f];
      }
    }
  }
  return grad_in;
}

std::vector<Param> Linear::params() {
  return {{"weight", &weight_, &weight_grad_}, {"bias", &bias_, &bias_grad_}};
}

Shape Linear::output_shape(const Shape& in) const {
  if (in.size() != 2 || in[1] != in_features_) {
    throw ShapeError(describe() + ": incompatible input " + shape_str(in));
  }
  return {in[0], out_features_};
}

std::uint64_t Linear::macs(const Shape& in) const {
  (void)in;
  return static_cast<std::uint64_t>(in_features_) * out_features_;
}

void Linear::init(Rng& rng) {
  weight_ = fan_in_uniform(weight_.shape(), in_features_, rng);
  bias_ = Tensor({out_features_});
}

std::string Linear::describe() const {
  return "Linear " + std::to_string(in_features_) + "->" + std::to_string(out_features_);
}

}  // namespace orbitfilter
