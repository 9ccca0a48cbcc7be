#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "orbitfilter/rng.hpp"
#include "orbitfilter/tensor.hpp"

namespace orbitfilter {

enum class LayerKind {
  Conv,
  ChannelShuffle,
  GroupRecombine,
  BatchNorm,
  Relu6,
  Relu,
  MaxPool,
  GlobalAvgPool,
  Linear,
};

std::string_view kind_name(LayerKind kind);

enum class Mode { Train, Eval };

// ---------------------------------------------------------------------------
// Stateless kernels. Layers below are thin wrappers that add caching.
// ---------------------------------------------------------------------------

struct ConvHyper {
  std::size_t stride = 1;
  std::size_t pad = 0;
  std::size_t groups = 1;
};

/// Output extent of a zero-padded sliding window.
std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                            std::size_t pad);

/// Grouped 2-d convolution, x [N,Cin,H,W], weight [Cout,Cin/groups,kH,kW].
/// Covers depthwise (groups == Cin), pointwise (1x1) and standard convolution.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor* bias, const ConvHyper& hyper);

struct ConvGrads {
  Tensor input;
  Tensor weight;
  std::optional<Tensor> bias;
};

ConvGrads conv2d_backward(const Tensor& x, const Tensor& weight, bool has_bias,
                          const Tensor& grad_out, const ConvHyper& hyper);

/// Channel c moves to (c mod (C/g))*g + c/(C/g).
Tensor channel_shuffle(const Tensor& x, std::size_t groups);
/// Inverse permutation of channel_shuffle with the same group count.
Tensor channel_unshuffle(const Tensor& x, std::size_t groups);

Tensor relu(const Tensor& x);
Tensor relu6(const Tensor& x);

struct PoolResult {
  Tensor output;
  /// Flat input index of each output's winning element.
  std::vector<std::size_t> argmax;
};

/// 2x2 stride-2 max pooling; ties go to the first element in row-major order.
PoolResult maxpool2d(const Tensor& x);

/// [N,C,H,W] -> [N,C] spatial mean.
Tensor global_avg_pool(const Tensor& x);

/// x [N,F], weight [K,F], bias [K] -> x W^T + b.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// ---------------------------------------------------------------------------
// Layer nodes
// ---------------------------------------------------------------------------

/// Trainable tensor with its gradient accumulator.
struct Param {
  std::string name;
  Tensor* value;
  Tensor* grad;
};

/// Non-trainable persistent state (batch-norm running statistics).
struct Buffer {
  std::string name;
  Tensor* value;
};

class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;

  /// Forward pass; caches whatever backward needs.
  virtual Tensor forward(const Tensor& x, Mode mode) = 0;
  /// Returns dL/dx and accumulates parameter gradients. Throws if no forward
  /// pass has populated the cache.
  virtual Tensor backward(const Tensor& grad_out) = 0;

  virtual std::vector<Param> params() { return {}; }
  virtual std::vector<Buffer> buffers() { return {}; }

  /// Output shape for a full input shape (batch included). Throws on
  /// incompatible inputs.
  virtual Shape output_shape(const Shape& in) const = 0;
  /// Multiply-accumulates for one item of input shape `in` ([C,H,W] or [F]).
  virtual std::uint64_t macs(const Shape& in) const { (void)in; return 0; }

  /// Draws initial parameters.
  virtual void init(Rng& rng) { (void)rng; }

  /// Short human description, e.g. "Conv 3->16 k3 s2 p1 g1".
  virtual std::string describe() const { return std::string(kind_name(kind())); }

  void zero_grad();
};

class Conv2d final : public Layer {
 public:
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
         ConvHyper hyper, bool bias = false);

  LayerKind kind() const override { return LayerKind::Conv; }
  std::unique_ptr<Layer> clone() const override;
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Param> params() override;
  Shape output_shape(const Shape& in) const override;
  std::uint64_t macs(const Shape& in) const override;
  void init(Rng& rng) override;
  std::string describe() const override;

  std::size_t in_channels() const { return in_channels_; }
  std::size_t out_channels() const { return out_channels_; }
  std::size_t kernel() const { return kernel_; }
  const ConvHyper& hyper() const { return hyper_; }
  const Tensor& weight() const { return weight_; }
  Tensor& weight() { return weight_; }
  bool has_bias() const { return has_bias_; }
  Tensor& bias() { return bias_; }

 private:
  std::size_t in_channels_;
  std::size_t out_channels_;
  std::size_t kernel_;
  ConvHyper hyper_;
  bool has_bias_;
  Tensor weight_, weight_grad_;
  Tensor bias_, bias_grad_;
  std::optional<Tensor> cache_x_;
};

class ChannelShuffle final : public Layer {
 public:
  explicit ChannelShuffle(std::size_t groups);

  LayerKind kind() const override { return LayerKind::ChannelShuffle; }
  std::unique_ptr<Layer> clone() const override;
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  Shape output_shape(const Shape& in) const override;
  std::string describe() const override;

  std::size_t groups() const { return groups_; }

 private:
  std::size_t groups_;
  bool primed_ = false;
};

/// Per-group 1x1 projection to a shared width, rectified per term and summed:
/// R = sum_i relu(W_i * Y_i), with Y_i the i-th channel slice of the input.
class GroupRecombine final : public Layer {
 public:
  GroupRecombine(std::size_t in_channels, std::size_t groups, std::size_t out_channels);

  LayerKind kind() const override { return LayerKind::GroupRecombine; }
  std::unique_ptr<Layer> clone() const override;
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Param> params() override;
  Shape output_shape(const Shape& in) const override;
  std::uint64_t macs(const Shape& in) const override;
  void init(Rng& rng) override;
  std::string describe() const override;

  std::size_t groups() const { return groups_; }
  /// W_i, shaped [C_r, C/G, 1, 1].
  Tensor& group_weight(std::size_t i) { return weights_.at(i); }

 private:
  Tensor stacked_weight() const;

  std::size_t in_channels_;
  std::size_t groups_;
  std::size_t out_channels_;
  std::vector<Tensor> weights_, weight_grads_;
  std::optional<Tensor> cache_x_;
  std::optional<Tensor> cache_pre_;  // stacked pre-activation [N, G*C_r, H, W]
};

struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double epsilon = 1e-5;
};

/// Per-channel batch normalization over (N, H, W); also accepts [N, C].
class BatchNorm2d final : public Layer {
 public:
  explicit BatchNorm2d(std::size_t channels, double momentum = 0.1, double epsilon = 1e-5);

  LayerKind kind() const override { return LayerKind::BatchNorm; }
  std::unique_ptr<Layer> clone() const override;
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Param> params() override;
  std::vector<Buffer> buffers() override;
  Shape output_shape(const Shape& in) const override;
  std::uint64_t macs(const Shape& in) const override;
  void init(Rng& rng) override;
  std::string describe() const override;

  std::size_t channels() const { return channels_; }
  Tensor& gamma() { return gamma_; }
  Tensor& beta() { return beta_; }
  BatchNormState& state() { return state_; }
  const BatchNormState& state() const { return state_; }

 private:
  std::size_t channels_;
  Tensor gamma_, gamma_grad_;
  Tensor beta_, beta_grad_;
  BatchNormState state_;
  // Backward cache.
  std::optional<Tensor> cache_xhat_;
  std::vector<double> cache_inv_std_;
  Mode cache_mode_ = Mode::Eval;
};

class Activation final : public Layer {
 public:
  explicit Activation(LayerKind kind);

  LayerKind kind() const override { return kind_; }
  std::unique_ptr<Layer> clone() const override;
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  Shape output_shape(const Shape& in) const override { return in; }

 private:
  LayerKind kind_;
  std::optional<Tensor> cache_x_;
};

class MaxPool2d final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::MaxPool; }
  std::unique_ptr<Layer> clone() const override;
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  Shape output_shape(const Shape& in) const override;

 private:
  std::optional<Shape> cache_in_shape_;
  std::vector<std::size_t> cache_argmax_;
};

class GlobalAvgPool final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::GlobalAvgPool; }
  std::unique_ptr<Layer> clone() const override;
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  Shape output_shape(const Shape& in) const override;

 private:
  std::optional<Shape> cache_in_shape_;
};

class Linear final : public Layer {
 public:
  Linear(std::size_t in_features, std::size_t out_features);

  LayerKind kind() const override { return LayerKind::Linear; }
  std::unique_ptr<Layer> clone() const override;
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Param> params() override;
  Shape output_shape(const Shape& in) const override;
  std::uint64_t macs(const Shape& in) const override;
  void init(Rng& rng) override;
  std::string describe() const override;

  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  std::size_t in_features_;
  std::size_t out_features_;
  Tensor weight_, weight_grad_;
  Tensor bias_, bias_grad_;
  std::optional<Tensor> cache_x_;
};

/// Uniform in +-sqrt(6 / fan_in).
Tensor fan_in_uniform(const Shape& shape, std::size_t fan_in, Rng& rng);

}  // namespace orbitfilter
