#include "orbitfilter/tensor.hpp"

#include <cassert>
#include <cmath>
#include <sstream>

#include "orbitfilter/error.hpp"

namespace orbitfilter {

namespace {

void validate_shape(const Shape& shape) {
  if (shape.empty() || shape.size() > 4) {
    throw ShapeError("tensor rank must be 1..4, got " + std::to_string(shape.size()));
  }
  for (std::size_t e : shape) {
    if (e == 0) throw ShapeError("tensor extents must be >= 1, got " + shape_str(shape));
  }
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape) : Tensor(std::move(shape), 0.0) {}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  validate_shape(shape_);
  data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  validate_shape(shape_);
  if (data_.size() != shape_numel(shape_)) {
    throw ShapeError("tensor data length mismatch for shape " + shape_str(shape_) +
                     ": expected " + std::to_string(shape_numel(shape_)) + ", got " +
                     std::to_string(data_.size()));
  }
}

double Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
  assert(shape_.size() == 4);
  return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

double& Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
  assert(shape_.size() == 4);
  return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

Tensor Tensor::reshaped(Shape shape) const {
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor tensor_create(const Shape& shape, const Fill& fill) {
  if (const double* scalar = std::get_if<double>(&fill)) return Tensor(shape, *scalar);
  return Tensor(shape, std::get<std::vector<double>>(fill));
}

Tensor tensor_zip(const Tensor& a, const Tensor& b, ZipOp op) {
  if (a.shape() != b.shape()) {
    throw ShapeError("tensor_zip shape mismatch: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  std::vector<double> out(a.numel());
  auto x = a.data();
  auto y = b.data();
  switch (op) {
    case ZipOp::Add:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
      break;
    case ZipOp::Sub:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
      break;
    case ZipOp::Mul:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
      break;
  }
  return Tensor(a.shape(), std::move(out));
}

Tensor tensor_random(const Shape& shape, const Distribution& dist, Rng& rng) {
  std::vector<double> out(shape_numel(shape));
  if (const auto* u = std::get_if<UniformDist>(&dist)) {
    if (!(u->lo <= u->hi) || !std::isfinite(u->lo) || !std::isfinite(u->hi)) {
      throw Error("uniform distribution requires finite lo <= hi");
    }
    for (double& v : out) v = rng.uniform(u->lo, u->hi);
  } else {
    const auto& nd = std::get<NormalDist>(dist);
    if (!(nd.stddev >= 0.0) || !std::isfinite(nd.mean) || !std::isfinite(nd.stddev)) {
      throw Error("normal distribution requires finite mean and stddev >= 0");
    }
    for (double& v : out) v = rng.normal(nd.mean, nd.stddev);
  }
  return Tensor(shape, std::move(out));
}

}  // namespace orbitfilter
