#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "orbitfilter/layers.hpp"

namespace orbitfilter {

/// Ordered stack of layer nodes evaluated front to back.
///
/// Copies are deep; a copy shares no parameters or caches with the source.
class Model {
 public:
  Model() = default;
  /// `input_shape` is the per-item shape, e.g. {3, 64, 64}.
  Model(std::string arch, Shape input_shape, std::size_t classes);

  Model(const Model& other);
  Model& operator=(const Model& other);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const std::string& arch() const { return arch_; }
  const Shape& input_shape() const { return input_shape_; }
  std::size_t classes() const { return classes_; }

  template <typename L, typename... Args>
  L& emplace(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }
  const Layer& layer(std::size_t i) const { return *layers_.at(i); }

  Tensor forward(const Tensor& x, Mode mode);
  /// Backpropagates through every layer in reverse; returns dL/dinput.
  Tensor backward(const Tensor& grad_out);

  /// Parameters named "<layer index>.<param name>".
  std::vector<Param> params();
  std::vector<Buffer> buffers();
  std::size_t parameter_count() const;

  /// Every persistent tensor (parameters then buffers, per layer, in order).
  std::vector<std::pair<std::string, const Tensor*>> state_tensors() const;

  /// Initializes every layer from the (seed, "init/<arch>") stream.
  void init(std::uint64_t seed);

  /// Validates the layer chain for a batched input shape and returns the
  /// output shape.
  Shape output_shape(const Shape& batched_input) const;

  bool trained() const { return trained_; }
  void set_trained(bool trained) { trained_ = trained; }

 private:
  std::string arch_;
  Shape input_shape_;
  std::size_t classes_ = 0;
  std::vector<std::unique_ptr<Layer>> layers_;
  bool trained_ = false;
};

}  // namespace orbitfilter
