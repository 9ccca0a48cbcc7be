#include "orbitfilter/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>

#include "orbitfilter/error.hpp"
#include "orbitfilter/models.hpp"
#include "orbitfilter/report.hpp"
#include "orbitfilter/serialize.hpp"

namespace orbitfilter {

namespace fs = std::filesystem;

PreparedData prepare_data(const ExperimentConfig& config) {
  PreparedData out;
  std::vector<LabeledImage> samples;
  if (config.dataset.source == DataSource::Synthetic) {
    Rng synth(config.seed, "synth");
    samples = generate_synthetic(config.dataset.n_synthetic, synth);
  } else {
    DirectoryLoad load = load_directory(config.dataset.path, config.binarization);
    samples = std::move(load.images);
    out.warnings = std::move(load.warnings);
    if (samples.size() < 2) {
      throw Error("dataset directory " + config.dataset.path + " yielded " +
                  std::to_string(samples.size()) + " images; need at least 2");
    }
  }
  Rng split(config.seed, "split");
  out.split = split_dataset(std::move(samples), config.dataset.train_fraction, split);
  if (out.split.train.empty() || out.split.test.empty()) {
    throw Error("dataset split left an empty train or test set");
  }
  return out;
}

std::map<std::string, TrainedArch> train_archs(const ExperimentConfig& config,
                                               const PreparedData& data, std::ostream& log) {
  std::map<std::string, TrainedArch> out;
  TrainConfig tc = config.train_config();
  tc.on_epoch = [&log](std::size_t epoch, const EpochStats& stats) {
    std::ostringstream line;
    line << "  epoch " << (epoch + 1) << " loss " << stats.loss << " train-acc "
         << stats.train_accuracy << "\n";
    log << line.str() << std::flush;
  };
  for (const std::string& arch : config.edge.archs) {
    TrainedArch t{build_model(arch, config.seed), {}};
    log << "training " << arch << " on " << data.split.train.size() << " images for "
        << tc.epochs << " epochs\n";
    t.history = train_model(t.model, data.split.train, tc);
    out.emplace(arch, std::move(t));
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream& log) {
  ExperimentResult result;
  PreparedData data = prepare_data(config);
  result.warnings = data.warnings;
  for (const std::string& w : data.warnings) log << "warning: " << w << "\n";
  const LinkParams link = config.link_params();
  const auto& test = data.split.test;

  const bool edge = std::find(config.modes.begin(), config.modes.end(), RunMode::EdgeFilter) !=
                    config.modes.end();
  if (edge) result.trained = train_archs(config, data, log);

  std::vector<RunReport> rows;
  for (RunMode mode : config.modes) {
    if (mode == RunMode::BentPipe) {
      RunReport r = run_bent_pipe(test, link);
      r.seed = config.seed;
      rows.push_back(std::move(r));
      continue;
    }
    for (const std::string& arch : config.edge.archs) {
      RunReport r = run_edge_filter(test, result.trained.at(arch).model, link, config.mac_rate());
      r.seed = config.seed;
      log << arch << ": edge wall clock " << r.edge_wall_time_s << " s for " << r.n_input
          << " images (modeled " << r.edge_time_s << " s)\n";
      rows.push_back(std::move(r));
    }
  }
  result.table = compare(std::move(rows));
  return result;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw FormatError(path.string() + ": write failed");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open");
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_outputs(const ExperimentConfig& config, const ExperimentResult& result,
                   const fs::path& out_dir) {
  fs::create_directories(out_dir);
  write_text(out_dir / "resolved-config.txt", dump_config(config));
  for (const auto& [arch, trained] : result.trained) {
    save_model(trained.model, out_dir / ("model-" + arch + ".ofw"));
  }
  write_text(out_dir / "report.md", render_table(result.table));
  // CSV last: its presence marks a complete run.
  write_text(out_dir / "report.csv", render_csv(result.table));
}

}  // namespace orbitfilter
