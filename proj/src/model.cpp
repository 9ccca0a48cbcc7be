#include "orbitfilter/model.hpp"

#include "orbitfilter/error.hpp"

namespace orbitfilter {

Model::Model(std::string arch, Shape input_shape, std::size_t classes)
    : arch_(std::move(arch)), input_shape_(std::move(input_shape)), classes_(classes) {}

Model::Model(const Model& other)
    : arch_(other.arch_),
      input_shape_(other.input_shape_),
      classes_(other.classes_),
      trained_(other.trained_) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Model& Model::operator=(const Model& other) {
  if (this != &other) {
    Model copy(other);
    *this = std::move(copy);
  }
  return *this;
}

Tensor Model::forward(const Tensor& x, Mode mode) {
  if (layers_.empty()) throw Error("model '" + arch_ + "' has no layers");
  Tensor h = layers_.front()->forward(x, mode);
  for (std::size_t i = 1; i < layers_.size(); ++i) h = layers_[i]->forward(h, mode);
  return h;
}

Tensor Model::backward(const Tensor& grad_out) {
  if (layers_.empty()) throw Error("model '" + arch_ + "' has no layers");
  Tensor g = layers_.back()->backward(grad_out);
  for (std::size_t i = layers_.size() - 1; i-- > 0;) g = layers_[i]->backward(g);
  return g;
}

std::vector<Param> Model::params() {
  std::vector<Param> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (Param p : layers_[i]->params()) {
      p.name = std::to_string(i) + "." + p.name;
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<Buffer> Model::buffers() {
  std::vector<Buffer> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (Buffer b : layers_[i]->buffers()) {
      b.name = std::to_string(i) + "." + b.name;
      out.push_back(std::move(b));
    }
  }
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  // params() hands out mutable pointers; only their sizes are read here.
  for (const auto& l : layers_) {
    for (const Param& p : const_cast<Layer&>(*l).params()) n += p.value->numel();
  }
  return n;
}

std::vector<std::pair<std::string, const Tensor*>> Model::state_tensors() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto& l = const_cast<Layer&>(*layers_[i]);
    const std::string prefix = std::to_string(i) + ".";
    for (const Param& p : l.params()) out.emplace_back(prefix + p.name, p.value);
    for (const Buffer& b : l.buffers()) out.emplace_back(prefix + b.name, b.value);
  }
  return out;
}

void Model::init(std::uint64_t seed) {
  Rng rng(seed, "init/" + arch_);
  for (auto& l : layers_) l->init(rng);
  trained_ = false;
}

Shape Model::output_shape(const Shape& batched_input) const {
  Shape s = batched_input;
  for (const auto& l : layers_) s = l->output_shape(s);
  return s;
}

}  // namespace orbitfilter
