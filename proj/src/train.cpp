#include "orbitfilter/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "orbitfilter/error.hpp"

namespace orbitfilter {

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> labels) {
  if (logits.rank() != 2) {
    throw ShapeError("softmax_cross_entropy: logits must be [N,K], got " +
                     shape_str(logits.shape()));
  }
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for batch of " + std::to_string(n));
  }
  LossResult r{0.0, Tensor({n, k})};
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= k) {
      throw Error("softmax_cross_entropy: label " + std::to_string(labels[i]) +
                  " out of range for " + std::to_string(k) + " classes");
    }
    const double* row = logits.data().data() + i * k;
    const double mx = *std::max_element(row, row + k);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) sum += std::exp(row[j] - mx);
    const double log_sum = std::log(sum);
    r.loss += -(row[labels[i]] - mx - log_sum);
    for (std::size_t j = 0; j < k; ++j) {
      const double p = std::exp(row[j] - mx - log_sum);
      r.grad[i * k + j] = (p - (j == labels[i] ? 1.0 : 0.0)) * inv_n;
    }
  }
  r.loss *= inv_n;
  return r;
}

AdamState make_adam_state(std::span<const Param> params, const AdamHyper& hyper) {
  AdamState s;
  s.hyper = hyper;
  for (const Param& p : params) {
    s.m.emplace_back(p.value->shape());
    s.v.emplace_back(p.value->shape());
  }
  return s;
}

void adam_step(std::span<const Param> params, AdamState& state) {
  if (params.size() != state.m.size() || params.size() != state.v.size()) {
    throw Error("adam_step: optimizer state tracks " + std::to_string(state.m.size()) +
                " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Param& p = params[i];
    if (p.grad->shape() != p.value->shape() || state.m[i].shape() != p.value->shape()) {
      throw ShapeError("adam_step: shape mismatch for parameter " + p.name);
    }
    if (!p.grad->all_finite()) throw Error("adam_step: non-finite gradient in parameter " + p.name);
  }
  const AdamHyper& h = state.hyper;
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(h.beta1, t);
  const double bc2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].value->data();
    auto g = params[i].grad->data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = h.beta1 * m[j] + (1.0 - h.beta1) * g[j];
      v[j] = h.beta2 * v[j] + (1.0 - h.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      w[j] -= h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
    }
  }
}

Tensor stack_images(std::span<const LabeledImage> images, std::span<const std::size_t> indices) {
  if (indices.empty()) throw Error("stack_images: empty batch");
  const Shape& item = images[indices.front()].pixels.shape();
  const std::size_t per = shape_numel(item);
  Shape shape{indices.size()};
  shape.insert(shape.end(), item.begin(), item.end());
  std::vector<double> data(indices.size() * per);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const Tensor& px = images[indices[b]].pixels;
    if (px.shape() != item) {
      throw ShapeError("stack_images: mixed image shapes " + shape_str(item) + " and " +
                       shape_str(px.shape()));
    }
    std::copy(px.values().begin(), px.values().end(), data.begin() + b * per);
  }
  return Tensor(std::move(shape), std::move(data));
}

namespace {

std::size_t argmax_row(const Tensor& logits, std::size_t row) {
  const std::size_t k = logits.dim(1);
  std::size_t best = 0;
  for (std::size_t j = 1; j < k; ++j) {
    if (logits[row * k + j] > logits[row * k + best]) best = j;
  }
  return best;
}

void check_inputs(const Model& model, std::span<const LabeledImage> images) {
  for (const LabeledImage& img : images) {
    if (img.pixels.shape() != model.input_shape()) {
      throw ShapeError("image " + shape_str(img.pixels.shape()) + " does not match model '" +
                       model.arch() + "' input " + shape_str(model.input_shape()));
    }
    const int label = static_cast<int>(img.label);
    if (label < 0 || label >= static_cast<int>(model.classes())) {
      throw Error("label " + std::to_string(label) + " outside {0,1}");
    }
  }
}

}  // namespace

std::vector<EpochStats> train_model(Model& model, std::span<const LabeledImage> train_set,
                                    const TrainConfig& config) {
  if (train_set.empty()) throw Error("train_model: empty training set");
  if (config.batch == 0) throw ConfigError("train_model: batch size must be >= 1");
  check_inputs(model, train_set);

  Rng order_rng(config.seed, "shuffle/" + model.arch());
  std::vector<Param> params = model.params();
  AdamState adam = make_adam_state(params, config.adam);
  std::vector<std::size_t> order(train_set.size());
  std::vector<EpochStats> history;
  history.reserve(config.epochs);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[order_rng.below(i)]);
    }
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::size_t stop = std::min(order.size(), start + config.batch);
      std::span<const std::size_t> idx(order.data() + start, stop - start);
      std::vector<std::size_t> labels;
      labels.reserve(idx.size());
      for (std::size_t i : idx) labels.push_back(static_cast<std::size_t>(train_set[i].label));

      Tensor logits = model.forward(stack_images(train_set, idx), Mode::Train);
      LossResult lr = softmax_cross_entropy(logits, labels);
      if (!std::isfinite(lr.loss)) {
        throw Error("training diverged: non-finite loss at epoch " + std::to_string(epoch + 1));
      }
      for (std::size_t b = 0; b < idx.size(); ++b) {
        if (argmax_row(logits, b) == labels[b]) ++correct;
      }
      loss_sum += lr.loss * static_cast<double>(idx.size());
      model.backward(lr.grad);
      adam_step(params, adam);
    }
    const double n = static_cast<double>(train_set.size());
    history.push_back({loss_sum / n, static_cast<double>(correct) / n});
    if (config.on_epoch) config.on_epoch(epoch, history.back());
  }
  model.set_trained(true);
  return history;
}

Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  Metrics m{tp, fp, fn, tn};
  if (tp + fp > 0) {
    m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  } else {
    m.precision_undefined = true;
  }
  if (tp + fn > 0) {
    m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  } else {
    m.recall_undefined = true;
  }
  if (m.precision + m.recall > 0.0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  } else {
    m.f1_undefined = true;
  }
  const std::size_t total = tp + fp + fn + tn;
  if (total > 0) m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(total);
  return m;
}

Metrics compute_metrics(std::span<const Label> truth, std::span<const Label> predicted) {
  if (truth.size() != predicted.size()) {
    throw Error("compute_metrics: " + std::to_string(truth.size()) + " labels vs " +
                std::to_string(predicted.size()) + " predictions");
  }
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool actual = truth[i] == Label::Artificial;
    const bool said = predicted[i] == Label::Artificial;
    if (actual && said) ++tp;
    else if (!actual && said) ++fp;
    else if (actual && !said) ++fn;
    else ++tn;
  }
  return metrics_from_counts(tp, fp, fn, tn);
}

std::vector<Label> predict(Model& model, std::span<const LabeledImage> images, std::size_t batch) {
  check_inputs(model, images);
  std::vector<Label> out;
  out.reserve(images.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < images.size(); start += batch) {
    const std::size_t stop = std::min(images.size(), start + batch);
    idx.resize(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    Tensor logits = model.forward(stack_images(images, idx), Mode::Eval);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      out.push_back(argmax_row(logits, b) == 1 ? Label::Artificial : Label::Natural);
    }
  }
  return out;
}

Evaluation evaluate(Model& model, std::span<const LabeledImage> test_set) {
  Evaluation e;
  e.predictions = predict(model, test_set);
  std::vector<Label> truth;
  truth.reserve(test_set.size());
  for (const LabeledImage& img : test_set) truth.push_back(img.label);
  e.metrics = compute_metrics(truth, e.predictions);
  return e;
}

Split split_dataset(std::vector<LabeledImage> samples, double train_fraction, Rng& rng) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("split_dataset: train fraction must be in (0,1), got " +
                      std::to_string(train_fraction));
  }
  for (std::size_t i = samples.size(); i > 1; --i) {
    std::swap(samples[i - 1], samples[rng.below(i)]);
  }
  const auto n_train = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(samples.size())));
  Split s;
  s.train.assign(std::make_move_iterator(samples.begin()),
                 std::make_move_iterator(samples.begin() + static_cast<long>(n_train)));
  s.test.assign(std::make_move_iterator(samples.begin() + static_cast<long>(n_train)),
                std::make_move_iterator(samples.end()));
  return s;
}

}  // namespace orbitfilter
