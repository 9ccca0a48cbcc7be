#pragma once

#include <filesystem>
#include <iosfwd>

#include "orbitfilter/model.hpp"

namespace orbitfilter {

/// Flat little-endian parameter container:
///
///   "OFW1"
///   u64 arch-name length, arch-name bytes
///   u64 layer count
///   u64 tensor count
///   per tensor: u64 name length, name bytes, u64 rank, rank x u64 extents,
///               numel x f64 values
///
/// Tensors are every parameter and batch-norm running statistic, named
/// "<layer index>.<name>" in layer order.
void save_model(const Model& model, std::ostream& out);
void save_model(const Model& model, const std::filesystem::path& path);

/// Rebuilds the architecture named in the header and fills it. Any
/// disagreement with the builder's table (layer count, names, shapes) is a
/// FormatError. The returned model is marked trained.
Model load_model(std::istream& in);
Model load_model(const std::filesystem::path& path);

}  // namespace orbitfilter
