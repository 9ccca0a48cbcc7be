#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "orbitfilter/dataset.hpp"
#include "orbitfilter/linksim.hpp"
#include "orbitfilter/pipeline.hpp"
#include "orbitfilter/train.hpp"

namespace orbitfilter {

enum class DataSource { Synthetic, Directory };

struct DatasetConfig {
  DataSource source = DataSource::Synthetic;
  std::string path;
  std::size_t n_synthetic = 2100;
  double train_fraction = 0.8;

  friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

struct TrainingConfig {
  std::size_t epochs = 25;
  double lr = 0.001;
  std::size_t batch = 32;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  friend bool operator==(const TrainingConfig&, const TrainingConfig&) = default;
};

/// Link given in bytes/bandwidth form; per_image_s is derived from it.
struct BandwidthForm {
  double bytes_per_image = 0.0;
  double bandwidth_bytes_per_s = 0.0;
  double per_image_overhead_s = 0.0;
};

struct LinkConfig {
  double base_latency_s = 0.0;
  double per_image_s = 0.0;
  double jitter_std_s = 0.0;
  // Provenance only; not part of equality.
  std::optional<BandwidthForm> bandwidth;

  friend bool operator==(const LinkConfig& a, const LinkConfig& b) {
    return a.base_latency_s == b.base_latency_s && a.per_image_s == b.per_image_s &&
           a.jitter_std_s == b.jitter_std_s;
  }
};

/// Link parameters fitted to the bent-pipe (420 images, 3.96 s) and MSNet
/// (272 images, 2.61 s) transmission measurements.
LinkConfig default_link();

struct EdgeConfig {
  std::vector<std::string> archs{"msnet"};
  std::optional<double> mac_rate;  // empty: default_mac_rate()

  friend bool operator==(const EdgeConfig&, const EdgeConfig&) = default;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  DatasetConfig dataset;
  TrainingConfig training;
  LinkConfig link = default_link();
  EdgeConfig edge;
  std::vector<RunMode> modes{RunMode::BentPipe, RunMode::EdgeFilter};
  BinarizationMap binarization = default_binarization();

  LinkParams link_params() const;
  TrainConfig train_config() const;
  double mac_rate() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Parses `key = value` lines (dotted keys, '#' comments). Every absent key
/// takes its default. Unknown keys, malformed values and out-of-range values
/// throw ConfigError naming the key.
ExperimentConfig parse_config(std::string_view text);

/// Fully resolved configuration in the same grammar; re-parses to an equal
/// config.
std::string dump_config(const ExperimentConfig& config);

}  // namespace orbitfilter
