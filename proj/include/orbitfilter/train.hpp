#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "orbitfilter/dataset.hpp"
#include "orbitfilter/model.hpp"

namespace orbitfilter {

struct LossResult {
  double loss = 0.0;
  Tensor grad;  // dLoss/dlogits, [N, K]
};

/// Mean softmax cross-entropy over the batch with max-subtraction.
/// grad = (softmax - onehot) / N.
LossResult softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> labels);

struct AdamHyper {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moments per parameter (same order as Model::params()).
struct AdamState {
  AdamHyper hyper;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t t = 0;
};

AdamState make_adam_state(std::span<const Param> params, const AdamHyper& hyper);

/// One bias-corrected Adam update of every parameter from its grad.
/// Throws (before touching anything) if any gradient is non-finite.
void adam_step(std::span<const Param> params, AdamState& state);

struct EpochStats {
  double loss = 0.0;            // sample-weighted mean batch loss
  double train_accuracy = 0.0;  // train-mode predictions during the epoch
};

struct TrainConfig {
  std::size_t epochs = 25;
  std::size_t batch = 32;
  AdamHyper adam;
  std::uint64_t seed = 0;
  /// Called after every epoch with its 0-based index.
  std::function<void(std::size_t, const EpochStats&)> on_epoch;
};

/// Trains `model` in place with shuffled mini-batches drawn from the
/// (seed, "shuffle/<arch>") stream. The model is left in a trained state and
/// is evaluated in eval mode afterwards. Throws on an empty set, an invalid
/// label, or a non-finite loss.
std::vector<EpochStats> train_model(Model& model, std::span<const LabeledImage> train_set,
                                    const TrainConfig& config);

/// Confusion counts with Artificial as the positive class.
struct Metrics {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  // Set when a denominator was zero and the ratio was reported as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;

  std::size_t total() const { return tp + fp + fn + tn; }
};

Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn);
Metrics compute_metrics(std::span<const Label> truth, std::span<const Label> predicted);

struct Evaluation {
  Metrics metrics;
  std::vector<Label> predictions;
};

/// argmax over logits (ties to the lower index) for every image, in order.
std::vector<Label> predict(Model& model, std::span<const LabeledImage> images,
                           std::size_t batch = 64);

/// Eval-mode predictions and metrics; leaves parameters and running
/// statistics untouched.
Evaluation evaluate(Model& model, std::span<const LabeledImage> test_set);

struct Split {
  std::vector<LabeledImage> train;
  std::vector<LabeledImage> test;
};

/// Uniform shuffle followed by a prefix split; the train part has
/// round(fraction * n) items.
Split split_dataset(std::vector<LabeledImage> samples, double train_fraction, Rng& rng);

/// Stacks [3,H,W] images into an [N,3,H,W] batch.
Tensor stack_images(std::span<const LabeledImage> images, std::span<const std::size_t> indices);

}  // namespace orbitfilter
