#include "orbitfilter/report.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <sstream>

#include "orbitfilter/error.hpp"
#include "orbitfilter/models.hpp"

namespace orbitfilter {

std::string format_fixed(double value, int decimals) {
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), "%.*f", decimals, value);
  std::string s = buf.data();
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::string format_percent(double ratio) { return format_fixed(100.0 * ratio, 2) + "%"; }

std::string column_heading(const RunReport& report) {
  if (report.mode == RunMode::BentPipe) return "Bent Pipe";
  return arch_display_name(report.model);
}

std::string render_table(const ComparisonTable& table) {
  if (table.rows.empty()) throw Error("render_table: empty comparison");
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header{""};
  for (const RunReport& r : table.rows) header.push_back(column_heading(r));
  grid.push_back(header);

  const auto metric_row = [&](const std::string& label, auto&& cell) {
    std::vector<std::string> row{label};
    for (const RunReport& r : table.rows) row.push_back(r.metrics ? cell(*r.metrics) : "/");
    grid.push_back(row);
  };
  const auto time_row = [&](const std::string& label, double RunReport::*field) {
    std::vector<std::string> row{label};
    for (const RunReport& r : table.rows) row.push_back(format_fixed(r.*field, 2));
    grid.push_back(row);
  };
  time_row("Edge Processing Time (s)", &RunReport::edge_time_s);
  time_row("Transmission Time (s)", &RunReport::transmission_time_s);
  time_row("Total Time (s)", &RunReport::total_s);
  metric_row("Recall", [](const Metrics& m) { return format_percent(m.recall); });
  metric_row("Precision", [](const Metrics& m) { return format_percent(m.precision); });
  metric_row("F1-Score", [](const Metrics& m) { return format_fixed(m.f1, 2); });
  {
    std::vector<std::string> row{"Images Transmitted"};
    for (const RunReport& r : table.rows) row.push_back(std::to_string(r.n_transmitted));
    grid.push_back(row);
  }

  std::vector<std::size_t> width(header.size(), 3);
  for (const auto& row : grid) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream os;
  const auto emit = [&](const std::vector<std::string>& row) {
    os << '|';
    for (std::size_t c = 0; c < row.size(); ++c) {
      os << ' ' << row[c] << std::string(width[c] - row[c].size(), ' ') << " |";
    }
    os << '\n';
  };
  emit(grid.front());
  os << '|';
  for (std::size_t w : width) os << ' ' << std::string(w, '-') << " |";
  os << '\n';
  for (std::size_t r = 1; r < grid.size(); ++r) emit(grid[r]);

  bool any_saving = false;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    if (!table.time_saved_pct[i] || table.rows[i].mode == RunMode::BentPipe) continue;
    if (!any_saving) os << "\nTotal-time saving vs Bent Pipe:\n";
    any_saving = true;
    os << "- " << column_heading(table.rows[i]) << ": "
       << format_fixed(*table.time_saved_pct[i], 2) << "%\n";
  }
  return os.str();
}

std::string render_csv(const ComparisonTable& table) {
  std::ostringstream os;
  os << "mode,model,column,n_input,n_transmitted,edge_time_s,transmission_time_s,total_s,"
        "recall,precision,f1,accuracy,tp,fp,fn,tn,time_saved_pct\n";
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const RunReport& r = table.rows[i];
    os << mode_name(r.mode) << ',' << r.model << ',' << column_heading(r) << ',' << r.n_input
       << ',' << r.n_transmitted << ',' << format_fixed(r.edge_time_s, 6) << ','
       << format_fixed(r.transmission_time_s, 6) << ',' << format_fixed(r.total_s, 6) << ',';
    if (r.metrics) {
      const Metrics& m = *r.metrics;
      os << format_fixed(m.recall, 6) << ',' << format_fixed(m.precision, 6) << ','
         << format_fixed(m.f1, 6) << ',' << format_fixed(m.accuracy, 6) << ',' << m.tp << ','
         << m.fp << ',' << m.fn << ',' << m.tn << ',';
    } else {
      os << ",,,,,,,,";
    }
    if (table.time_saved_pct[i]) os << format_fixed(*table.time_saved_pct[i], 6);
    os << '\n';
  }
  return os.str();
}

}  // namespace orbitfilter
