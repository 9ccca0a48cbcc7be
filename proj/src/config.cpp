#include "orbitfilter/config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <set>
#include <sstream>

#include "orbitfilter/error.hpp"
#include "orbitfilter/models.hpp"

namespace orbitfilter {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(std::string_view value) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    const std::size_t comma = value.find(',', start);
    const std::string_view item =
        trim(value.substr(start, comma == std::string_view::npos ? value.npos : comma - start));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void bad(const std::string& key, const std::string& why) {
  throw ConfigError(key + ": " + why);
}

double as_double(const std::string& key, std::string_view v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out)) {
    bad(key, "expected a number, got '" + std::string(v) + "'");
  }
  return out;
}

std::uint64_t as_uint(const std::string& key, std::string_view v) {
  if (!v.empty() && v.front() == '-') bad(key, "must be non-negative, got '" + std::string(v) + "'");
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    bad(key, "expected a non-negative integer, got '" + std::string(v) + "'");
  }
  return out;
}

std::string fmt_double(double v) {
  std::array<char, 40> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", v);
  // Shortest representation that still round-trips.
  for (int prec = 1; prec <= 17; ++prec) {
    std::array<char, 40> shorter{};
    std::snprintf(shorter.data(), shorter.size(), "%.*g", prec, v);
    if (std::strtod(shorter.data(), nullptr) == v) return shorter.data();
  }
  return buf.data();
}

}  // namespace

LinkConfig default_link() {
  const std::array<CalibrationPoint, 2> table{{{420.0, 3.96}, {272.0, 2.61}}};
  const Calibration c = calibrate(table);
  LinkConfig l;
  l.base_latency_s = c.params.base_latency_s;
  l.per_image_s = c.params.per_image_s;
  return l;
}

LinkParams ExperimentConfig::link_params() const {
  LinkParams p;
  p.base_latency_s = link.base_latency_s;
  p.per_image_s = link.per_image_s;
  p.jitter_std_s = link.jitter_std_s;
  p.seed = seed;
  return p;
}

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig t;
  t.epochs = training.epochs;
  t.batch = training.batch;
  t.adam = AdamHyper{training.lr, training.beta1, training.beta2, training.eps};
  t.seed = seed;
  return t;
}

double ExperimentConfig::mac_rate() const { return edge.mac_rate ? *edge.mac_rate : default_mac_rate(); }

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::map<std::string, std::string> kv;
  std::istringstream lines{std::string(text)};
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(lines, raw)) {
    ++lineno;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, value).second) bad(key, "duplicate key");
  }

  std::optional<double> bytes, bandwidth, overhead;
  bool per_image_given = false;
  for (const auto& [key, value] : kv) {
    if (key == "seed") {
      cfg.seed = as_uint(key, value);
    } else if (key == "dataset.source") {
      if (value == "synthetic") cfg.dataset.source = DataSource::Synthetic;
      else if (value == "directory") cfg.dataset.source = DataSource::Directory;
      else bad(key, "expected 'synthetic' or 'directory', got '" + value + "'");
    } else if (key == "dataset.path") {
      cfg.dataset.path = value;
    } else if (key == "dataset.n_synthetic") {
      cfg.dataset.n_synthetic = as_uint(key, value);
      if (cfg.dataset.n_synthetic < 2) bad(key, "must be >= 2");
    } else if (key == "dataset.train_fraction") {
      cfg.dataset.train_fraction = as_double(key, value);
      if (!(cfg.dataset.train_fraction > 0.0 && cfg.dataset.train_fraction < 1.0)) {
        bad(key, "must be in (0, 1)");
      }
    } else if (key == "training.epochs") {
      cfg.training.epochs = as_uint(key, value);
      if (cfg.training.epochs == 0) bad(key, "must be >= 1");
    } else if (key == "training.lr") {
      cfg.training.lr = as_double(key, value);
      if (!(cfg.training.lr > 0.0)) bad(key, "must be > 0");
    } else if (key == "training.batch") {
      cfg.training.batch = as_uint(key, value);
      if (cfg.training.batch == 0) bad(key, "must be >= 1");
    } else if (key == "training.beta1" || key == "training.beta2") {
      const double b = as_double(key, value);
      if (!(b >= 0.0 && b < 1.0)) bad(key, "must be in [0, 1)");
      (key == "training.beta1" ? cfg.training.beta1 : cfg.training.beta2) = b;
    } else if (key == "training.eps") {
      cfg.training.eps = as_double(key, value);
      if (!(cfg.training.eps > 0.0)) bad(key, "must be > 0");
    } else if (key == "link.base_latency_s") {
      cfg.link.base_latency_s = as_double(key, value);
      if (cfg.link.base_latency_s < 0.0) bad(key, "must be >= 0");
    } else if (key == "link.per_image_s") {
      cfg.link.per_image_s = as_double(key, value);
      if (!(cfg.link.per_image_s > 0.0)) bad(key, "must be > 0");
      per_image_given = true;
    } else if (key == "link.jitter_std_s") {
      cfg.link.jitter_std_s = as_double(key, value);
      if (cfg.link.jitter_std_s < 0.0) bad(key, "must be >= 0");
    } else if (key == "link.bytes_per_image") {
      bytes = as_double(key, value);
      if (!(*bytes > 0.0)) bad(key, "must be > 0");
    } else if (key == "link.bandwidth_bytes_per_s") {
      bandwidth = as_double(key, value);
      if (!(*bandwidth > 0.0)) bad(key, "must be > 0");
    } else if (key == "link.per_image_overhead_s") {
      overhead = as_double(key, value);
      if (*overhead < 0.0) bad(key, "must be >= 0");
    } else if (key == "edge.arch") {
      cfg.edge.archs = split_list(value);
      if (cfg.edge.archs.empty()) bad(key, "needs at least one architecture");
      for (const std::string& a : cfg.edge.archs) {
        const auto& known = arch_names();
        if (std::find(known.begin(), known.end(), a) == known.end()) {
          bad(key, "unknown architecture '" + a + "'");
        }
      }
      if (std::set<std::string>(cfg.edge.archs.begin(), cfg.edge.archs.end()).size() !=
          cfg.edge.archs.size()) {
        bad(key, "architectures must be distinct");
      }
    } else if (key == "edge.mac_rate") {
      if (value == "auto") {
        cfg.edge.mac_rate.reset();
      } else {
        cfg.edge.mac_rate = as_double(key, value);
        if (!(*cfg.edge.mac_rate > 0.0)) bad(key, "must be > 0 or 'auto'");
      }
    } else if (key == "modes") {
      cfg.modes.clear();
      for (const std::string& m : split_list(value)) {
        try {
          const RunMode mode = parse_mode(m);
          if (std::find(cfg.modes.begin(), cfg.modes.end(), mode) != cfg.modes.end()) {
            bad(key, "mode '" + m + "' listed twice");
          }
          cfg.modes.push_back(mode);
        } catch (const ConfigError& e) {
          if (std::string_view(e.what()).starts_with(key)) throw;
          bad(key, e.what());
        }
      }
      if (cfg.modes.empty()) bad(key, "needs at least one mode");
    } else if (key.starts_with("binarization.")) {
      const std::string cls = key.substr(std::string_view("binarization.").size());
      if (cls.empty()) bad(key, "missing class name");
      try {
        cfg.binarization.set(cls, parse_label(value));
      } catch (const ConfigError& e) {
        bad(key, e.what());
      }
    } else {
      throw ConfigError(key + ": unknown key");
    }
  }

  if (bytes || bandwidth || overhead) {
    if (!bytes || !bandwidth) {
      throw ConfigError("link.bytes_per_image: bytes/bandwidth form needs both "
                        "link.bytes_per_image and link.bandwidth_bytes_per_s");
    }
    if (per_image_given) {
      throw ConfigError("link.per_image_s: give either per_image_s or the bytes/bandwidth form");
    }
    BandwidthForm form{*bytes, *bandwidth, overhead.value_or(0.0)};
    cfg.link.per_image_s =
        per_image_from_bandwidth(form.bytes_per_image, form.bandwidth_bytes_per_s,
                                 form.per_image_overhead_s);
    cfg.link.bandwidth = form;
  }
  if (cfg.dataset.source == DataSource::Directory && cfg.dataset.path.empty()) {
    throw ConfigError("dataset.path: required when dataset.source = directory");
  }
  return cfg;
}

std::string dump_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "# orbitfilter resolved configuration\n";
  os << "seed = " << c.seed << "\n\n";
  os << "dataset.source = "
     << (c.dataset.source == DataSource::Synthetic ? "synthetic" : "directory") << "\n";
  if (!c.dataset.path.empty()) os << "dataset.path = " << c.dataset.path << "\n";
  os << "dataset.n_synthetic = " << c.dataset.n_synthetic << "\n";
  os << "dataset.train_fraction = " << fmt_double(c.dataset.train_fraction) << "\n\n";
  os << "training.epochs = " << c.training.epochs << "\n";
  os << "training.lr = " << fmt_double(c.training.lr) << "\n";
  os << "training.batch = " << c.training.batch << "\n";
  os << "training.beta1 = " << fmt_double(c.training.beta1) << "\n";
  os << "training.beta2 = " << fmt_double(c.training.beta2) << "\n";
  os << "training.eps = " << fmt_double(c.training.eps) << "\n\n";
  os << "link.base_latency_s = " << fmt_double(c.link.base_latency_s) << "\n";
  if (c.link.bandwidth) {
    os << "# per_image_s derived: bytes_per_image " << fmt_double(c.link.bandwidth->bytes_per_image)
       << " / bandwidth_bytes_per_s " << fmt_double(c.link.bandwidth->bandwidth_bytes_per_s)
       << " + per_image_overhead_s " << fmt_double(c.link.bandwidth->per_image_overhead_s) << "\n";
  }
  os << "link.per_image_s = " << fmt_double(c.link.per_image_s) << "\n";
  os << "link.jitter_std_s = " << fmt_double(c.link.jitter_std_s) << "\n\n";
  os << "edge.arch = ";
  for (std::size_t i = 0; i < c.edge.archs.size(); ++i) os << (i ? ", " : "") << c.edge.archs[i];
  os << "\n";
  os << "edge.mac_rate = " << (c.edge.mac_rate ? fmt_double(*c.edge.mac_rate) : "auto") << "\n\n";
  os << "modes = ";
  for (std::size_t i = 0; i < c.modes.size(); ++i) os << (i ? ", " : "") << mode_name(c.modes[i]);
  os << "\n\n";
  for (const auto& [cls, label] : c.binarization.entries()) {
    os << "binarization." << cls << " = " << label_name(label) << "\n";
  }
  return os.str();
}

}  // namespace orbitfilter
