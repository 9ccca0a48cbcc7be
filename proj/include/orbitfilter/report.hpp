#pragma once

#include <string>

#include "orbitfilter/pipeline.hpp"

namespace orbitfilter {

/// Fixed-point rendering that never produces "-0.00".
std::string format_fixed(double value, int decimals);
/// Ratio in [0,1] as a two-decimal percentage, e.g. "97.24%".
std::string format_percent(double ratio);

/// Column heading for a report: "Bent Pipe" or the architecture's display name.
std::string column_heading(const RunReport& report);

/// Aligned markdown table with one column per report and the rows
/// Edge Processing Time (s), Transmission Time (s), Total Time (s), Recall,
/// Precision, F1-Score, Images Transmitted. Absent metrics render as "/".
/// Total-time savings follow the table when available.
std::string render_table(const ComparisonTable& table);

/// One line per report, six decimals for times and ratios, empty fields for
/// absent metrics.
std::string render_csv(const ComparisonTable& table);

}  // namespace orbitfilter
