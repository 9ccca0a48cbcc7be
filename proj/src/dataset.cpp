#include "orbitfilter/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>

#include "orbitfilter/error.hpp"

namespace orbitfilter {

namespace fs = std::filesystem;

std::string_view label_name(Label label) {
  return label == Label::Artificial ? "artificial" : "natural";
}

Label parse_label(std::string_view text) {
  if (text == "artificial") return Label::Artificial;
  if (text == "natural") return Label::Natural;
  throw ConfigError("label must be 'natural' or 'artificial', got '" + std::string(text) + "'");
}

bool BinarizationMap::contains(std::string_view cls) const {
  return entries_.find(cls) != entries_.end();
}

Label BinarizationMap::label_of(std::string_view cls) const {
  auto it = entries_.find(cls);
  if (it == entries_.end()) {
    throw ConfigError("class '" + std::string(cls) + "' is not in the binarization map");
  }
  return it->second;
}

void BinarizationMap::set(std::string cls, Label label) { entries_[std::move(cls)] = label; }

BinarizationMap default_binarization() {
  BinarizationMap::Entries e;
  for (const char* c : {"agricultural", "beach", "chaparral", "forest", "golfcourse", "river"}) {
    e.emplace(c, Label::Natural);
  }
  for (const char* c : {"airplane", "baseballdiamond", "buildings", "denseresidential", "freeway",
                        "harbor", "intersection", "mediumresidential", "mobilehomepark",
                        "overpass", "parkinglot", "runway", "sparseresidential", "storagetanks",
                        "tenniscourt"}) {
    e.emplace(c, Label::Artificial);
  }
  return BinarizationMap(std::move(e));
}

// ---------------------------------------------------------------------------
// Synthetic scenes

namespace {

constexpr std::size_t kS = kImageSize;
constexpr std::size_t kPlane = kS * kS;

using Rgb = std::array<double, 3>;

// Vegetation, soil, sand and water tones. All keep green above blue.
constexpr std::array<Rgb, 5> kNaturalPalette{{
    {0.30, 0.48, 0.26},
    {0.42, 0.47, 0.28},
    {0.52, 0.46, 0.34},
    {0.62, 0.57, 0.44},
    {0.24, 0.44, 0.38},
}};

// Fraction of artificial scenes drawn over a vegetation-toned background, so
// color alone does not separate the classes.
constexpr double kVegetatedArtificial = 0.05;

struct Canvas {
  std::vector<double> px = std::vector<double>(3 * kPlane, 0.0);

  double& at(std::size_t c, std::size_t y, std::size_t x) { return px[c * kPlane + y * kS + x]; }

  void fill_rect(std::size_t x0, std::size_t y0, std::size_t w, std::size_t h, const Rgb& color) {
    for (std::size_t y = y0; y < std::min(kS, y0 + h); ++y) {
      for (std::size_t x = x0; x < std::min(kS, x0 + w); ++x) {
        for (std::size_t c = 0; c < 3; ++c) at(c, y, x) = color[c];
      }
    }
  }

  Tensor finish() {
    for (double& v : px) v = normalize_unit(std::clamp(v, 0.0, 1.0));
    return Tensor({3, kS, kS}, std::move(px));
  }
};

Rgb jitter_color(const Rgb& base, double spread, Rng& rng) {
  Rgb out{};
  for (std::size_t c = 0; c < 3; ++c) out[c] = base[c] + rng.uniform(-spread, spread);
  return out;
}

Rgb structure_color(double background, Rng& rng) {
  // Keep structures visibly off the background level.
  double v = rng.uniform(0.05, 0.95);
  if (std::abs(v - background) < 0.2) v = background < 0.5 ? background + 0.3 : background - 0.3;
  return jitter_color({v, v, v}, 0.03, rng);
}

std::vector<double> box_blur(const std::vector<double>& src, std::size_t radius) {
  std::vector<double> tmp(kPlane), out(kPlane);
  const double norm = 1.0 / static_cast<double>(2 * radius + 1);
  const auto clampi = [](long v) { return static_cast<std::size_t>(std::clamp<long>(v, 0, kS - 1)); };
  const long r = static_cast<long>(radius);
  for (std::size_t y = 0; y < kS; ++y) {
    for (std::size_t x = 0; x < kS; ++x) {
      double acc = 0.0;
      for (long d = -r; d <= r; ++d) acc += src[y * kS + clampi(static_cast<long>(x) + d)];
      tmp[y * kS + x] = acc * norm;
    }
  }
  for (std::size_t y = 0; y < kS; ++y) {
    for (std::size_t x = 0; x < kS; ++x) {
      double acc = 0.0;
      for (long d = -r; d <= r; ++d) acc += tmp[clampi(static_cast<long>(y) + d) * kS + x];
      out[y * kS + x] = acc * norm;
    }
  }
  return out;
}

LabeledImage artificial_scene(Rng& rng) {
  Canvas cv;
  Rgb bg;
  if (rng.uniform() < kVegetatedArtificial) {
    bg = jitter_color(kNaturalPalette[rng.below(kNaturalPalette.size())], 0.04, rng);
  } else {
    const double g = rng.uniform(0.30, 0.65);
    bg = jitter_color({g, g, g}, 0.02, rng);
  }
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < kPlane; ++i) cv.px[c * kPlane + i] = bg[c] + rng.normal(0.0, 0.02);
  }
  const double bg_level = (bg[0] + bg[1] + bg[2]) / 3.0;

  std::string kind;
  const std::uint64_t pattern = rng.below(3);
  if (pattern == 0) {
    kind = "rectangles";
    const std::size_t count = 3 + rng.below(5);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t w = 6 + rng.below(17), h = 6 + rng.below(17);
      const std::size_t x0 = rng.below(kS - w + 1), y0 = rng.below(kS - h + 1);
      cv.fill_rect(x0, y0, w, h, structure_color(bg_level, rng));
    }
  } else {
    // Gratings draw lines along one axis; grids along both.
    const bool both = pattern == 2;
    kind = both ? "grid" : "grating";
    const std::size_t period = 4 + rng.below(7);
    const std::size_t width = 1 + rng.below(std::max<std::size_t>(1, period / 2));
    const std::size_t phase = rng.below(period);
    const bool vertical = rng.uniform() < 0.5;
    const Rgb line = structure_color(bg_level, rng);
    for (std::size_t y = 0; y < kS; ++y) {
      for (std::size_t x = 0; x < kS; ++x) {
        const std::size_t a = vertical ? x : y;
        const std::size_t b = vertical ? y : x;
        const bool on = (a + phase) % period < width || (both && (b + phase) % period < width);
        if (!on) continue;
        for (std::size_t c = 0; c < 3; ++c) cv.at(c, y, x) = line[c];
      }
    }
  }
  return {cv.finish(), Label::Artificial, "synthetic/" + kind};
}

LabeledImage natural_scene(Rng& rng) {
  std::vector<double> noise(kPlane);
  for (double& v : noise) v = rng.uniform();
  const std::size_t radius = 2 + rng.below(3);
  std::vector<double> field = box_blur(box_blur(noise, radius), radius);
  double mean = 0.0, var = 0.0;
  for (double v : field) mean += v;
  mean /= static_cast<double>(kPlane);
  for (double v : field) var += (v - mean) * (v - mean);
  const double inv_std = 1.0 / std::sqrt(var / static_cast<double>(kPlane) + 1e-12);
  const double amp = rng.uniform(0.06, 0.14);
  const Rgb tint = jitter_color(kNaturalPalette[rng.below(kNaturalPalette.size())], 0.04, rng);
  Canvas cv;
  for (std::size_t c = 0; c < 3; ++c) {
    const double gain = rng.uniform(0.8, 1.2);
    for (std::size_t i = 0; i < kPlane; ++i) {
      cv.px[c * kPlane + i] =
          tint[c] + amp * gain * (field[i] - mean) * inv_std + rng.normal(0.0, 0.01);
    }
  }
  return {cv.finish(), Label::Natural, "synthetic/texture"};
}

}  // namespace

std::vector<LabeledImage> generate_synthetic(std::size_t n, Rng& rng) {
  if (n < 2) throw Error("generate_synthetic: need at least 2 images, got " + std::to_string(n));
  std::vector<LabeledImage> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(i % 2 == 0 ? artificial_scene(rng) : natural_scene(rng));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Resize

Tensor resize_bilinear(const Tensor& image, std::size_t target_h, std::size_t target_w) {
  if (image.rank() != 3) {
    throw ShapeError("resize_bilinear: expected [C,H,W], got " + shape_str(image.shape()));
  }
  if (target_h == 0 || target_w == 0) throw ShapeError("resize_bilinear: target must be >= 1");
  const std::size_t ch = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (h == target_h && w == target_w) return image;

  struct Tap {
    std::size_t i0, i1;
    double frac;
  };
  const auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
      double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in - 1));
      const auto i0 = static_cast<std::size_t>(std::floor(src));
      const std::size_t i1 = std::min(i0 + 1, in - 1);
      t[o] = {i0, i1, src - static_cast<double>(i0)};
    }
    return t;
  };
  const std::vector<Tap> ty = taps(h, target_h), tx = taps(w, target_w);
  Tensor out({ch, target_h, target_w});
  auto src = image.data();
  for (std::size_t c = 0; c < ch; ++c) {
    const double* p = src.data() + c * h * w;
    for (std::size_t oy = 0; oy < target_h; ++oy) {
      const Tap& vy = ty[oy];
      for (std::size_t ox = 0; ox < target_w; ++ox) {
        const Tap& vx = tx[ox];
        const double a = p[vy.i0 * w + vx.i0], b = p[vy.i0 * w + vx.i1];
        const double c0 = p[vy.i1 * w + vx.i0], d = p[vy.i1 * w + vx.i1];
        // a + f*(b-a) keeps constant regions exact.
        const double top = a + vx.frac * (b - a);
        const double bottom = c0 + vx.frac * (d - c0);
        out[(c * target_h + oy) * target_w + ox] = top + vy.frac * (bottom - top);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Portable pixmap I/O

namespace {

class PpmReader {
 public:
  PpmReader(const std::vector<unsigned char>& bytes, const fs::path& path)
      : bytes_(bytes), path_(path) {}

  [[noreturn]] void fail(const std::string& why) const {
    throw FormatError(path_.string() + ": " + why);
  }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const unsigned char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t read_uint(const char* what) {
    skip_space_and_comments();
    std::size_t v = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > 1'000'000) fail(std::string("header ") + what + " too large");
      ++pos_;
      ++digits;
    }
    if (digits == 0) fail(std::string("malformed header: missing ") + what);
    return v;
  }

  Tensor decode() {
    if (bytes_.size() < 2 || bytes_[0] != 'P' || bytes_[1] != '6') {
      fail("malformed header: not a binary P6 pixmap");
    }
    pos_ = 2;
    const std::size_t width = read_uint("width");
    const std::size_t height = read_uint("height");
    const std::size_t maxval = read_uint("maxval");
    if (width == 0 || height == 0) fail("malformed header: zero extent");
    if (maxval == 0 || maxval > 255) {
      fail("unsupported maxval " + std::to_string(maxval) + " (expected 1..255)");
    }
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      fail("malformed header: missing separator before pixel data");
    }
    ++pos_;
    const std::size_t need = width * height * 3;
    if (bytes_.size() - pos_ < need) {
      fail("truncated pixel data: expected " + std::to_string(need) + " bytes, found " +
           std::to_string(bytes_.size() - pos_));
    }
    Tensor img({3, height, width});
    const double scale = 1.0 / static_cast<double>(maxval);
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        for (std::size_t c = 0; c < 3; ++c) {
          const unsigned char v = bytes_[pos_ + (y * width + x) * 3 + c];
          img[(c * height + y) * width + x] = std::min(1.0, v * scale);
        }
      }
    }
    return img;
  }

 private:
  const std::vector<unsigned char>& bytes_;
  const fs::path& path_;
  std::size_t pos_ = 0;
};

}  // namespace

Tensor read_ppm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return PpmReader(bytes, path).decode();
}

void write_ppm(const fs::path& path, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError("write_ppm: expected [3,H,W], got " + shape_str(image.shape()));
  }
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  out << "P6\n" << w << ' ' << h << "\n255\n";
  std::vector<char> row(w * 3);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = std::clamp(image[(c * h + y) * w + x], 0.0, 1.0);
        row[x * 3 + c] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
      }
    }
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw FormatError(path.string() + ": write failed");
}

DirectoryLoad load_directory(const fs::path& root, const BinarizationMap& map) {
  if (!fs::is_directory(root)) throw FormatError(root.string() + ": not a directory");
  DirectoryLoad result;
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) result.warnings.push_back(root.string() + ": no class directories");

  for (const fs::path& dir : class_dirs) {
    const std::string cls = dir.filename().string();
    if (!map.contains(cls)) {
      throw ConfigError("class directory '" + cls + "' is not in the binarization map");
    }
    const Label label = map.label_of(cls);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".ppm") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) result.warnings.push_back("class '" + cls + "' has no .ppm files");
    for (const fs::path& f : files) {
      Tensor img = resize_bilinear(read_ppm(f), kImageSize);
      for (double& v : img.data()) v = normalize_unit(v);
      result.images.push_back({std::move(img), label, cls});
    }
  }
  for (const auto& [cls, label] : map.entries()) {
    (void)label;
    if (!fs::is_directory(root / cls)) {
      result.warnings.push_back("class '" + cls + "' not present on disk, skipped");
    }
  }
  return result;
}

}  // namespace orbitfilter
