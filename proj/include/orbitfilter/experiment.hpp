#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "orbitfilter/config.hpp"
#include "orbitfilter/model.hpp"
#include "orbitfilter/pipeline.hpp"
#include "orbitfilter/train.hpp"

namespace orbitfilter {

struct PreparedData {
  Split split;
  std::vector<std::string> warnings;
};

/// Generates or loads the dataset named by the config and splits it with the
/// (seed, "split") stream. Synthetic data comes from (seed, "synth").
PreparedData prepare_data(const ExperimentConfig& config);

struct TrainedArch {
  Model model;
  std::vector<EpochStats> history;
};

/// Builds and trains every configured architecture on the train split.
/// Per-arch init and shuffle streams are labeled with the arch name.
std::map<std::string, TrainedArch> train_archs(const ExperimentConfig& config,
                                               const PreparedData& data, std::ostream& log);

struct ExperimentResult {
  ComparisonTable table;
  std::map<std::string, TrainedArch> trained;
  std::vector<std::string> warnings;
};

/// Split, train per edge arch, evaluate, run every configured mode and
/// compare. Rows: bent pipe first (if enabled), then one edge-filter row per
/// architecture in configured order.
ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream& log);

/// Writes report.csv, report.md, model-<arch>.ofw and resolved-config.txt.
void write_outputs(const ExperimentConfig& config, const ExperimentResult& result,
                   const std::filesystem::path& out_dir);

/// Text file helper; throws FormatError on I/O failure.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace orbitfilter
