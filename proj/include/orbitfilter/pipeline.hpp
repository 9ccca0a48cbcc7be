#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "orbitfilter/dataset.hpp"
#include "orbitfilter/linksim.hpp"
#include "orbitfilter/model.hpp"
#include "orbitfilter/train.hpp"

namespace orbitfilter {

enum class RunMode { BentPipe, EdgeFilter };

std::string_view mode_name(RunMode mode);
RunMode parse_mode(std::string_view text);

/// One column of the comparison: how long a mode took and what it sent.
struct RunReport {
  RunMode mode = RunMode::BentPipe;
  std::string model;  // architecture name; empty for bent pipe
  std::size_t n_input = 0;
  std::size_t n_transmitted = 0;
  double edge_time_s = 0.0;       // modeled: n_input * MACs / mac_rate
  double edge_wall_time_s = 0.0;  // measured, informational only
  double transmission_time_s = 0.0;
  double total_s = 0.0;  // edge_time_s + transmission_time_s
  std::optional<Metrics> metrics;  // absent for bent pipe
  LinkParams link;
  std::uint64_t seed = 0;
};

/// Sends every test image; no edge work, no metrics.
RunReport run_bent_pipe(std::span<const LabeledImage> test_set, const LinkParams& link);

/// Edge filtering from precomputed per-image predictions: transmits exactly
/// the images predicted Artificial and charges n_input * macs_per_image /
/// mac_rate of modeled edge time.
RunReport run_edge_filter(std::span<const LabeledImage> test_set,
                          std::span<const Label> predictions, std::string model_name,
                          std::uint64_t macs_per_image, const LinkParams& link, double mac_rate);

/// Classifies every test image with `model` (which must be trained and
/// accept [3,64,64] input), then filters as above.
RunReport run_edge_filter(std::span<const LabeledImage> test_set, Model& model,
                          const LinkParams& link, double mac_rate);

/// Builds a report from externally supplied timings and counts.
RunReport make_report(RunMode mode, std::string model, std::size_t n_input,
                      std::size_t n_transmitted, double edge_time_s, double transmission_time_s,
                      std::optional<Metrics> metrics, const LinkParams& link);

/// Rate (MAC/s) that puts MSNet's modeled edge time for 420 images at 0.64 s.
double default_mac_rate();
inline constexpr double kReferenceEdgeSeconds = 0.64;
inline constexpr std::size_t kReferenceTestImages = 420;

struct ComparisonTable {
  std::vector<RunReport> rows;
  /// Percent total-time saving of each row relative to the first bent-pipe
  /// row; empty when there is no bent-pipe row or only one row.
  std::vector<std::optional<double>> time_saved_pct;
};

/// Orders rows as given and derives savings. Rows must share n_input and
/// link parameters.
ComparisonTable compare(std::vector<RunReport> reports);

}  // namespace orbitfilter
