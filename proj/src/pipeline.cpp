#include "orbitfilter/pipeline.hpp"

#include <chrono>

#include "orbitfilter/error.hpp"
#include "orbitfilter/models.hpp"

namespace orbitfilter {

std::string_view mode_name(RunMode mode) {
  return mode == RunMode::BentPipe ? "bent_pipe" : "edge_filter";
}

RunMode parse_mode(std::string_view text) {
  if (text == "bent_pipe") return RunMode::BentPipe;
  if (text == "edge_filter") return RunMode::EdgeFilter;
  throw ConfigError("mode must be 'bent_pipe' or 'edge_filter', got '" + std::string(text) + "'");
}

RunReport make_report(RunMode mode, std::string model, std::size_t n_input,
                      std::size_t n_transmitted, double edge_time_s, double transmission_time_s,
                      std::optional<Metrics> metrics, const LinkParams& link) {
  RunReport r;
  r.mode = mode;
  r.model = std::move(model);
  r.n_input = n_input;
  r.n_transmitted = n_transmitted;
  r.edge_time_s = edge_time_s;
  r.transmission_time_s = transmission_time_s;
  r.total_s = edge_time_s + transmission_time_s;
  r.metrics = std::move(metrics);
  r.link = link;
  r.seed = link.seed;
  return r;
}

RunReport run_bent_pipe(std::span<const LabeledImage> test_set, const LinkParams& link) {
  if (test_set.empty()) throw Error("run_bent_pipe: empty test set");
  const TransmitRecord tx = transmit(test_set.size(), link);
  return make_report(RunMode::BentPipe, "", test_set.size(), test_set.size(), 0.0,
                     tx.transmission_time_s, std::nullopt, link);
}

RunReport run_edge_filter(std::span<const LabeledImage> test_set,
                          std::span<const Label> predictions, std::string model_name,
                          std::uint64_t macs_per_image, const LinkParams& link, double mac_rate) {
  if (test_set.empty()) throw Error("run_edge_filter: empty test set");
  if (!(mac_rate > 0.0)) throw ConfigError("edge.mac_rate must be > 0");
  if (predictions.size() != test_set.size()) {
    throw Error("run_edge_filter: " + std::to_string(predictions.size()) + " predictions for " +
                std::to_string(test_set.size()) + " images");
  }
  std::vector<Label> truth;
  truth.reserve(test_set.size());
  for (const LabeledImage& img : test_set) truth.push_back(img.label);
  const Metrics m = compute_metrics(truth, predictions);
  const std::size_t accepted = m.tp + m.fp;
  const TransmitRecord tx = transmit(accepted, link);
  const double edge =
      static_cast<double>(test_set.size()) * static_cast<double>(macs_per_image) / mac_rate;
  return make_report(RunMode::EdgeFilter, std::move(model_name), test_set.size(), accepted, edge,
                     tx.transmission_time_s, m, link);
}

RunReport run_edge_filter(std::span<const LabeledImage> test_set, Model& model,
                          const LinkParams& link, double mac_rate) {
  if (!model.trained()) throw Error("run_edge_filter: model '" + model.arch() + "' is untrained");
  if (model.input_shape() != Shape{3, kImageSize, kImageSize}) {
    throw ShapeError("run_edge_filter: model input " + shape_str(model.input_shape()) +
                     " is not [3,64,64]");
  }
  const std::uint64_t macs = mac_count(model).total;
  const auto start = std::chrono::steady_clock::now();
  const std::vector<Label> predictions = predict(model, test_set);
  const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - start;
  RunReport r = run_edge_filter(test_set, predictions, model.arch(), macs, link, mac_rate);
  r.edge_wall_time_s = wall.count();
  return r;
}

double default_mac_rate() {
  static const double rate = static_cast<double>(kReferenceTestImages) *
                             static_cast<double>(mac_count(build_msnet()).total) /
                             kReferenceEdgeSeconds;
  return rate;
}

ComparisonTable compare(std::vector<RunReport> reports) {
  if (reports.empty()) throw Error("compare: no reports");
  for (const RunReport& r : reports) {
    if (r.n_input != reports.front().n_input) {
      throw Error("compare: rows disagree on n_input (" + std::to_string(r.n_input) + " vs " +
                  std::to_string(reports.front().n_input) + ")");
    }
    if (!(r.link == reports.front().link)) throw Error("compare: rows use different link parameters");
  }
  ComparisonTable t;
  t.time_saved_pct.assign(reports.size(), std::nullopt);
  if (reports.size() > 1) {
    const RunReport* ref = nullptr;
    for (const RunReport& r : reports) {
      if (r.mode == RunMode::BentPipe) {
        ref = &r;
        break;
      }
    }
    if (ref != nullptr && ref->total_s > 0.0) {
      for (std::size_t i = 0; i < reports.size(); ++i) {
        t.time_saved_pct[i] = 100.0 * (ref->total_s - reports[i].total_s) / ref->total_s;
      }
    }
  }
  t.rows = std::move(reports);
  return t;
}

}  // namespace orbitfilter
