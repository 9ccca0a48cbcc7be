#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "orbitfilter/model.hpp"

namespace orbitfilter {

inline constexpr std::string_view kSimpleCnn = "simple_cnn";
inline constexpr std::string_view kMobileNetV2Lite = "mobilenet_v2_lite";
inline constexpr std::string_view kShuffleNetLite = "shufflenet_lite";
inline constexpr std::string_view kMsNet = "msnet";

/// Architecture names in report column order.
const std::vector<std::string>& arch_names();

/// Column heading used in rendered reports, e.g. "MobileShuffleNet".
std::string arch_display_name(std::string_view arch);

/// Hybrid depthwise-separable / grouped-shuffle network with a final
/// group-recombination stage:
///
///   conv3x3 3->16 s2, BN, relu6
///   dw3x3 16, BN, relu6, pw 16->32, BN, relu6
///   dw3x3 32 s2, BN, relu6, pw 32->64, BN, relu6
///   gpw 64->64 G4, BN, shuffle(4)
///   dw3x3 64 s2, BN, gpw 64->128 G4, BN, relu6, shuffle(4)
///   recombine G4 -> 128, GAP, linear 128->2
Model build_msnet(std::uint64_t init_seed = 0);

/// Three conv3x3/BN/relu/maxpool stages (32, 64, 128 channels), GAP, linear.
Model build_simple_cnn(std::uint64_t init_seed = 0);

/// Scaled-down inverted-bottleneck stack (expand pw, dw, project pw) in
/// three stages. Only depthwise and dense convolutions.
Model build_mobilenet_v2_lite(std::uint64_t init_seed = 0);

/// Scaled-down shuffle units (grouped pw, shuffle, dw, grouped pw) in
/// three stages.
Model build_shufflenet_lite(std::uint64_t init_seed = 0);

/// Dispatches on an architecture name; throws ConfigError on unknown names.
Model build_model(std::string_view arch, std::uint64_t init_seed = 0);

struct LayerMacs {
  std::size_t index;
  std::string description;
  Shape input;  // per-item
  std::uint64_t macs;
};

struct MacReport {
  std::vector<LayerMacs> layers;
  std::uint64_t total = 0;
  std::uint64_t parameters = 0;
};

/// Closed-form multiply-accumulate count for one item of `input_shape`
/// ([C,H,W]). Convolutions count Cout*(Cin/g)*k*k*Hout*Wout, batch norm
/// 2*C*H*W, linear in*out; reshuffles, activations and pools count zero.
MacReport mac_count(const Model& model, const Shape& input_shape);
MacReport mac_count(const Model& model);

}  // namespace orbitfilter
