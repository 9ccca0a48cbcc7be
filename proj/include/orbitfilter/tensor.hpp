#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "orbitfilter/rng.hpp"

namespace orbitfilter {

/// Extents of a tensor, outermost first (N, C, H, W for images).
using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array of doubles with rank 1 to 4.
///
/// Operations never mutate their inputs; the mutable accessors exist for
/// layer kernels that fill freshly allocated outputs.
class Tensor {
 public:
  Tensor() = default;
  /// Zero-filled tensor.
  explicit Tensor(Shape shape);
  Tensor(Shape shape, double fill);
  /// Takes ownership of `data`, which must hold exactly numel(shape) values.
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  /// 4-d element access, no bounds checking beyond debug asserts.
  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const;
  double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w);

  /// Same data, different extents (product must match).
  Tensor reshaped(Shape shape) const;

  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

using Fill = std::variant<double, std::vector<double>>;

/// Builds a tensor from a scalar fill or an exact-length value array.
Tensor tensor_create(const Shape& shape, const Fill& fill);

enum class ZipOp { Add, Sub, Mul };

/// Elementwise combination of two equally shaped tensors.
Tensor tensor_zip(const Tensor& a, const Tensor& b, ZipOp op);

struct UniformDist {
  double lo = 0.0;
  double hi = 1.0;
};
struct NormalDist {
  double mean = 0.0;
  double stddev = 1.0;
};
using Distribution = std::variant<UniformDist, NormalDist>;

/// Draws every element from `dist` in row-major order using `rng`.
Tensor tensor_random(const Shape& shape, const Distribution& dist, Rng& rng);

}  // namespace orbitfilter
