#include "orbitfilter/serialize.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>

#include "orbitfilter/error.hpp"
#include "orbitfilter/models.hpp"

namespace orbitfilter {

namespace {

constexpr std::array<char, 4> kMagic{'O', 'F', 'W', '1'};
// Guards allocation on corrupt headers.
constexpr std::uint64_t kMaxName = 4096;
constexpr std::uint64_t kMaxCount = 1u << 20;

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> b{};
  for (std::size_t i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b.data(), 8);
}

void put_str(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint64_t get_u64(std::istream& in, const char* what) {
  std::array<unsigned char, 8> b{};
  in.read(reinterpret_cast<char*>(b.data()), 8);
  if (!in) throw FormatError(std::string("model container truncated reading ") + what);
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::string get_str(std::istream& in, const char* what) {
  const std::uint64_t n = get_u64(in, what);
  if (n > kMaxName) throw FormatError(std::string("model container: implausible ") + what + " length");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw FormatError(std::string("model container truncated reading ") + what);
  return s;
}

}  // namespace

void save_model(const Model& model, std::ostream& out) {
  const auto tensors = model.state_tensors();
  out.write(kMagic.data(), kMagic.size());
  put_str(out, model.arch());
  put_u64(out, model.size());
  put_u64(out, tensors.size());
  for (const auto& [name, t] : tensors) {
    put_str(out, name);
    put_u64(out, t->rank());
    for (std::size_t e : t->shape()) put_u64(out, e);
    for (double v : t->values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw FormatError("model container: write failed");
}

void save_model(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  save_model(model, out);
}

Model load_model(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw FormatError("model container: bad magic (expected OFW1)");
  const std::string arch = get_str(in, "arch name");
  Model model;
  try {
    model = build_model(arch);
  } catch (const ConfigError&) {
    throw FormatError("model container: unknown architecture '" + arch + "'");
  }
  const std::uint64_t layers = get_u64(in, "layer count");
  if (layers != model.size()) {
    throw FormatError("model container: '" + arch + "' has " + std::to_string(model.size()) +
                      " layers, file declares " + std::to_string(layers));
  }
  auto expected = model.state_tensors();
  const std::uint64_t count = get_u64(in, "tensor count");
  if (count != expected.size()) {
    throw FormatError("model container: expected " + std::to_string(expected.size()) +
                      " tensors, file declares " + std::to_string(count));
  }
  for (auto& [name, slot] : expected) {
    const std::string got = get_str(in, "tensor name");
    if (got != name) {
      throw FormatError("model container: expected tensor '" + name + "', found '" + got + "'");
    }
    const std::uint64_t rank = get_u64(in, "rank");
    if (rank == 0 || rank > 4) throw FormatError("model container: bad rank for " + name);
    Shape shape;
    for (std::uint64_t i = 0; i < rank; ++i) {
      const std::uint64_t e = get_u64(in, "extent");
      if (e == 0 || e > kMaxCount) throw FormatError("model container: bad extent for " + name);
      shape.push_back(static_cast<std::size_t>(e));
    }
    if (shape != slot->shape()) {
      throw FormatError("model container: tensor '" + name + "' has shape " + shape_str(shape) +
                        ", architecture expects " + shape_str(slot->shape()));
    }
    auto* target = const_cast<Tensor*>(slot);
    for (double& v : target->data()) v = std::bit_cast<double>(get_u64(in, "tensor values"));
  }
  model.set_trained(true);
  return model;
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open");
  try {
    return load_model(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace orbitfilter
