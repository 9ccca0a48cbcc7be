#include "orbitfilter/models.hpp"

#include "orbitfilter/error.hpp"

namespace orbitfilter {

namespace {

const Shape kInput{3, 64, 64};
constexpr std::size_t kClasses = 2;

void conv_bn(Model& m, std::size_t cin, std::size_t cout, std::size_t k, std::size_t stride,
             std::size_t groups) {
  m.emplace<Conv2d>(cin, cout, k, ConvHyper{stride, k / 2, groups});
  m.emplace<BatchNorm2d>(cout);
}

void conv_bn_act(Model& m, std::size_t cin, std::size_t cout, std::size_t k, std::size_t stride,
                 std::size_t groups, LayerKind act) {
  conv_bn(m, cin, cout, k, stride, groups);
  m.emplace<Activation>(act);
}

void classifier(Model& m, std::size_t features) {
  m.emplace<GlobalAvgPool>();
  m.emplace<Linear>(features, kClasses);
}

}  // namespace

const std::vector<std::string>& arch_names() {
  static const std::vector<std::string> names{std::string(kSimpleCnn),
                                              std::string(kMobileNetV2Lite),
                                              std::string(kShuffleNetLite), std::string(kMsNet)};
  return names;
}

std::string arch_display_name(std::string_view arch) {
  if (arch == kSimpleCnn) return "SimpleCNN";
  if (arch == kMobileNetV2Lite) return "MobileNetV2";
  if (arch == kShuffleNetLite) return "ShuffleNet";
  if (arch == kMsNet) return "MobileShuffleNet";
  return std::string(arch);
}

Model build_msnet(std::uint64_t init_seed) {
  Model m(std::string(kMsNet), kInput, kClasses);
  constexpr auto r6 = LayerKind::Relu6;
  conv_bn_act(m, 3, 16, 3, 2, 1, r6);     // stem, 32x32
  conv_bn_act(m, 16, 16, 3, 1, 16, r6);   // depthwise
  conv_bn_act(m, 16, 32, 1, 1, 1, r6);    // pointwise
  conv_bn_act(m, 32, 32, 3, 2, 32, r6);   // depthwise, 16x16
  conv_bn_act(m, 32, 64, 1, 1, 1, r6);    // pointwise
  conv_bn(m, 64, 64, 1, 1, 4);            // grouped pointwise
  m.emplace<ChannelShuffle>(4);
  conv_bn(m, 64, 64, 3, 2, 64);           // depthwise, 8x8
  conv_bn_act(m, 64, 128, 1, 1, 4, r6);   // grouped pointwise
  m.emplace<ChannelShuffle>(4);
  m.emplace<GroupRecombine>(128, 4, 128);
  classifier(m, 128);
  m.init(init_seed);
  return m;
}

Model build_simple_cnn(std::uint64_t init_seed) {
  Model m(std::string(kSimpleCnn), kInput, kClasses);
  std::size_t cin = 3;
  for (std::size_t cout : {32, 64, 128}) {
    conv_bn_act(m, cin, cout, 3, 1, 1, LayerKind::Relu);
    m.emplace<MaxPool2d>();
    cin = cout;
  }
  classifier(m, 128);
  m.init(init_seed);
  return m;
}

Model build_mobilenet_v2_lite(std::uint64_t init_seed) {
  Model m(std::string(kMobileNetV2Lite), kInput, kClasses);
  constexpr auto r6 = LayerKind::Relu6;
  constexpr std::size_t expand = 4;
  conv_bn_act(m, 3, 16, 3, 2, 1, r6);
  struct Stage {
    std::size_t cin, cout, stride;
  };
  for (const Stage& s : {Stage{16, 24, 1}, Stage{24, 32, 2}, Stage{32, 64, 2}}) {
    const std::size_t hidden = s.cin * expand;
    conv_bn_act(m, s.cin, hidden, 1, 1, 1, r6);
    conv_bn_act(m, hidden, hidden, 3, s.stride, hidden, r6);
    conv_bn(m, hidden, s.cout, 1, 1, 1);  // linear bottleneck
  }
  conv_bn_act(m, 64, 128, 1, 1, 1, r6);
  classifier(m, 128);
  m.init(init_seed);
  return m;
}

Model build_shufflenet_lite(std::uint64_t init_seed) {
  Model m(std::string(kShuffleNetLite), kInput, kClasses);
  constexpr auto relu = LayerKind::Relu;
  constexpr std::size_t groups = 4;
  conv_bn_act(m, 3, 24, 3, 2, 1, relu);
  struct Unit {
    std::size_t cin, mid, cout, stride;
  };
  for (const Unit& u : {Unit{24, 48, 96, 2}, Unit{96, 96, 192, 2}, Unit{192, 192, 192, 1}}) {
    conv_bn_act(m, u.cin, u.mid, 1, 1, groups, relu);
    m.emplace<ChannelShuffle>(groups);
    conv_bn(m, u.mid, u.mid, 3, u.stride, u.mid);
    conv_bn_act(m, u.mid, u.cout, 1, 1, groups, relu);
  }
  classifier(m, 192);
  m.init(init_seed);
  return m;
}

Model build_model(std::string_view arch, std::uint64_t init_seed) {
  if (arch == kMsNet) return build_msnet(init_seed);
  if (arch == kSimpleCnn) return build_simple_cnn(init_seed);
  if (arch == kMobileNetV2Lite) return build_mobilenet_v2_lite(init_seed);
  if (arch == kShuffleNetLite) return build_shufflenet_lite(init_seed);
  throw ConfigError("unknown architecture '" + std::string(arch) +
                    "' (expected simple_cnn, mobilenet_v2_lite, shufflenet_lite or msnet)");
}

MacReport mac_count(const Model& model, const Shape& input_shape) {
  MacReport r;
  Shape batched{1};
  batched.insert(batched.end(), input_shape.begin(), input_shape.end());
  for (std::size_t i = 0; i < model.size(); ++i) {
    const Layer& l = model.layer(i);
    const Shape item(batched.begin() + 1, batched.end());
    const std::uint64_t macs = l.macs(item);
    r.layers.push_back({i, l.describe(), item, macs});
    r.total += macs;
    batched = l.output_shape(batched);
  }
  r.parameters = model.parameter_count();
  return r;
}

MacReport mac_count(const Model& model) { return mac_count(model, model.input_shape()); }

}  // namespace orbitfilter
