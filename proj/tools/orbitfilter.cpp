#include <CLI11.hpp>

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "orbitfilter/config.hpp"
#include "orbitfilter/error.hpp"
#include "orbitfilter/experiment.hpp"
#include "orbitfilter/linksim.hpp"
#include "orbitfilter/models.hpp"
#include "orbitfilter/report.hpp"
#include "orbitfilter/serialize.hpp"

namespace fs = std::filesystem;
using namespace orbitfilter;

namespace {

struct CommonOptions {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
};

std::uint64_t parse_seed(const std::string& text, const std::string& origin) {
  std::uint64_t value = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw ConfigError(origin + ": expected a non-negative integer seed, got '" + text + "'");
  }
  return value;
}

ExperimentConfig load_config(const CommonOptions& opts) {
  ExperimentConfig config;
  if (!opts.config_path.empty()) config = parse_config(read_text(opts.config_path));
  if (const char* env = std::getenv("ORBITFILTER_SEED"); env != nullptr && *env != '\0') {
    config.seed = parse_seed(env, "ORBITFILTER_SEED");
  }
  if (opts.seed) config.seed = *opts.seed;
  return config;
}

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "Experiment configuration file")
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", opts.out_dir, "Output directory")->capture_default_str();
  cmd->add_option("--seed", opts.seed, "Root seed (overrides config and ORBITFILTER_SEED)");
}

int cmd_run(const CommonOptions& opts) {
  const ExperimentConfig config = load_config(opts);
  ExperimentResult result = run_experiment(config, std::cerr);
  write_outputs(config, result, opts.out_dir);
  std::cout << render_table(result.table);
  return 0;
}

int cmd_train(const CommonOptions& opts) {
  const ExperimentConfig config = load_config(opts);
  const PreparedData data = prepare_data(config);
  for (const std::string& w : data.warnings) std::cerr << "warning: " << w << "\n";
  const auto trained = train_archs(config, data, std::cerr);
  fs::create_directories(opts.out_dir);
  write_text(fs::path(opts.out_dir) / "resolved-config.txt", dump_config(config));
  for (const auto& [arch, t] : trained) {
    const fs::path path = fs::path(opts.out_dir) / ("model-" + arch + ".ofw");
    save_model(t.model, path);
    std::cout << arch << ": final loss " << t.history.back().loss << ", train accuracy "
              << format_percent(t.history.back().train_accuracy) << " -> " << path.string()
              << "\n";
  }
  return 0;
}

std::vector<std::size_t> parse_counts(const std::string& text) {
  std::vector<std::size_t> counts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t n = 0;
    const char* end = item.data() + item.size();
    auto [ptr, ec] = std::from_chars(item.data(), end, n);
    if (item.empty() || ec != std::errc() || ptr != end) {
      throw ConfigError("--counts: '" + item + "' is not an image count");
    }
    counts.push_back(n);
  }
  if (counts.empty()) throw ConfigError("--counts: no image counts given");
  return counts;
}

int cmd_simulate(const CommonOptions& opts, const std::string& counts_text) {
  const ExperimentConfig config = load_config(opts);
  const LinkParams link = config.link_params();
  std::ostringstream csv;
  csv << "images,transmission_time_s\n";
  for (std::size_t n : parse_counts(counts_text)) {
    const TransmitRecord rec = transmit(n, link);
    csv << n << ',' << format_fixed(rec.transmission_time_s, 6) << '\n';
  }
  fs::create_directories(opts.out_dir);
  write_text(fs::path(opts.out_dir) / "resolved-config.txt", dump_config(config));
  write_text(fs::path(opts.out_dir) / "simulate.csv", csv.str());
  std::cout << csv.str();
  return 0;
}

int cmd_macs(const CommonOptions& opts, std::vector<std::string> archs) {
  const ExperimentConfig config = load_config(opts);
  if (archs.empty()) archs = arch_names();
  std::ostringstream csv;
  csv << "model,layer,description,macs\n";
  for (const std::string& arch : archs) {
    const MacReport rep = mac_count(build_model(arch, config.seed));
    std::cout << arch_display_name(arch) << " (" << arch << ")\n";
    for (const LayerMacs& l : rep.layers) {
      std::cout << "  " << l.index << "  " << l.description << "  in " << shape_str(l.input)
                << "  " << l.macs << "\n";
      csv << arch << ',' << l.index << ",\"" << l.description << "\"," << l.macs << '\n';
    }
    std::cout << "  total MACs " << rep.total << ", parameters " << rep.parameters << "\n";
    csv << arch << ",total,," << rep.total << '\n';
  }
  fs::create_directories(opts.out_dir);
  write_text(fs::path(opts.out_dir) / "macs.csv", csv.str());
  return 0;
}

std::vector<CalibrationPoint> parse_points(const std::string& text) {
  std::vector<CalibrationPoint> points;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw ConfigError("--points: '" + item + "' is not of the form images:seconds");
    }
    CalibrationPoint p{};
    const std::string n = item.substr(0, colon);
    const std::string t = item.substr(colon + 1);
    auto r1 = std::from_chars(n.data(), n.data() + n.size(), p.images);
    auto r2 = std::from_chars(t.data(), t.data() + t.size(), p.seconds);
    if (n.empty() || t.empty() || r1.ec != std::errc() || r2.ec != std::errc() ||
        r1.ptr != n.data() + n.size() || r2.ptr != t.data() + t.size()) {
      throw ConfigError("--points: '" + item + "' is not of the form images:seconds");
    }
    points.push_back(p);
  }
  return points;
}

int cmd_calibrate(const CommonOptions& opts, const std::string& points_text) {
  const std::vector<CalibrationPoint> points = parse_points(points_text);
  const Calibration cal = calibrate(points);
  std::ostringstream out;
  out.precision(17);
  out << "link.base_latency_s = " << cal.params.base_latency_s << "\n"
      << "link.per_image_s = " << cal.params.per_image_s << "\n"
      << "# residual sum of squares " << cal.residual_ss << "\n";
  for (const CalibrationPoint& p : points) {
    const double predicted = cal.params.base_latency_s + cal.params.per_image_s * p.images;
    out << "# " << format_fixed(p.images, 0) << " images: measured "
        << format_fixed(p.seconds, 4) << " s, fitted " << format_fixed(predicted, 4) << " s\n";
  }
  fs::create_directories(opts.out_dir);
  write_text(fs::path(opts.out_dir) / "calibration.txt", out.str());
  std::cout << out.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Edge-filter versus bent-pipe satellite downlink simulator"};
  app.require_subcommand(1);

  CommonOptions opts;
  std::string counts;
  std::vector<std::string> archs;
  std::string points = "420:3.96,272:2.61";

  auto* run = app.add_subcommand("run", "Train, evaluate, simulate and write the report");
  add_common(run, opts);
  auto* train = app.add_subcommand("train", "Train the configured models and save them");
  add_common(train, opts);
  auto* simulate = app.add_subcommand("simulate", "Transmission times for given image counts");
  add_common(simulate, opts);
  simulate->add_option("--counts", counts, "Comma-separated image counts")->required();
  auto* macs = app.add_subcommand("macs", "Per-layer multiply-accumulate counts");
  add_common(macs, opts);
  macs->add_option("--arch", archs, "Architecture(s); default all")
      ->check(CLI::IsMember(arch_names()));
  auto* cal = app.add_subcommand("calibrate", "Fit link parameters to (images, seconds) pairs");
  add_common(cal, opts);
  cal->add_option("--points", points, "Comma-separated images:seconds pairs")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(opts);
    if (train->parsed()) return cmd_train(opts);
    if (simulate->parsed()) return cmd_simulate(opts, counts);
    if (macs->parsed()) return cmd_macs(opts, archs);
    if (cal->parsed()) return cmd_calibrate(opts, points);
  } catch (const std::exception& e) {
    std::cerr << "orbitfilter: error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
