#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "orbitfilter/rng.hpp"
#include "orbitfilter/tensor.hpp"

namespace orbitfilter {

/// Positive class is Artificial.
enum class Label : int { Natural = 0, Artificial = 1 };

std::string_view label_name(Label label);
Label parse_label(std::string_view text);

inline constexpr std::size_t kImageSize = 64;

struct LabeledImage {
  Tensor pixels;  // [3, 64, 64], normalized to [-1, 1]
  Label label = Label::Natural;
  std::string origin;  // class name, or "synthetic/<kind>"
};

/// Scene class name -> binary label.
class BinarizationMap {
 public:
  using Entries = std::map<std::string, Label, std::less<>>;

  BinarizationMap() = default;
  explicit BinarizationMap(Entries entries) : entries_(std::move(entries)) {}

  bool contains(std::string_view cls) const;
  /// Throws ConfigError for classes not in the map.
  Label label_of(std::string_view cls) const;
  void set(std::string cls, Label label);

  std::size_t size() const { return entries_.size(); }
  const Entries& entries() const { return entries_; }

  friend bool operator==(const BinarizationMap&, const BinarizationMap&) = default;

 private:
  Entries entries_;
};

/// The 21 UCMerced land-use classes: agricultural, beach, chaparral, forest,
/// golfcourse and river are natural; the other 15 are artificial.
BinarizationMap default_binarization();

/// Maps an 8-bit channel value in [0, 1] to the [-1, 1] training range.
inline double normalize_unit(double v) { return (v - 0.5) / 0.5; }

/// Balanced synthetic artificial-vs-natural scenes, deterministic per rng.
///
/// Artificial scenes are axis-aligned rectangles, line gratings or grids on a
/// low-noise background; natural scenes are twice box-blurred white noise
/// under a mild color tint. Labels alternate starting with Artificial, so an
/// even count is exactly balanced. Requires n >= 2.
std::vector<LabeledImage> generate_synthetic(std::size_t n, Rng& rng);

/// Bilinear resize of a [C,H,W] image with half-pixel-centered sampling.
/// Equal-size input is returned unchanged.
Tensor resize_bilinear(const Tensor& image, std::size_t target_h, std::size_t target_w);
inline Tensor resize_bilinear(const Tensor& image, std::size_t target) {
  return resize_bilinear(image, target, target);
}

/// Decodes a binary portable pixmap (P6, maxval <= 255) into a [3,H,W]
/// tensor with values in [0, 1]. Errors name the file.
Tensor read_ppm(const std::filesystem::path& path);
/// Writes a [3,H,W] tensor with values in [0, 1] as P6 (maxval 255).
void write_ppm(const std::filesystem::path& path, const Tensor& image);

struct DirectoryLoad {
  std::vector<LabeledImage> images;
  std::vector<std::string> warnings;
};

/// Loads `<root>/<class>/<file>.ppm`, resized to 64x64 and normalized.
/// Classes and files are visited in sorted order. Unknown class directories
/// are errors; map classes missing on disk produce warnings.
DirectoryLoad load_directory(const std::filesystem::path& root, const BinarizationMap& map);

}  // namespace orbitfilter
