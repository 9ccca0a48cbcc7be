#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "orbitfilter/dataset.hpp"
#include "orbitfilter/error.hpp"
#include "support.hpp"

using namespace orbitfilter;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("orbitfilter-test-" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
             "-" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void write_bytes(const fs::path& p, const std::string& bytes) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

std::string gray_ppm(std::size_t w, std::size_t h, unsigned char level) {
  std::string s = "P6\n# constant\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  s.append(w * h * 3, static_cast<char>(level));
  return s;
}

// Plain logistic regression on raw pixels, fitted with full-batch gradient
// descent. Returns accuracy on `test`.
double linear_probe(const std::vector<LabeledImage>& train, const std::vector<LabeledImage>& test) {
  const std::size_t d = train.front().pixels.numel();
  std::vector<double> w(d, 0.0);
  double b = 0.0;
  const double lr = 0.05;
  const double l2 = 1e-4;
  std::vector<double> grad(d);
  for (int it = 0; it < 300; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double gb = 0.0;
    for (const LabeledImage& s : train) {
      const auto x = s.pixels.data();
      double z = b;
      for (std::size_t j = 0; j < d; ++j) z += w[j] * x[j];
      const double p = 1.0 / (1.0 + std::exp(-z));
      const double err = p - (s.label == Label::Artificial ? 1.0 : 0.0);
      for (std::size_t j = 0; j < d; ++j) grad[j] += err * x[j];
      gb += err;
    }
    const double inv = 1.0 / static_cast<double>(train.size());
    for (std::size_t j = 0; j < d; ++j) w[j] -= lr * (grad[j] * inv + l2 * w[j]);
    b -= lr * gb * inv;
  }
  std::size_t correct = 0;
  for (const LabeledImage& s : test) {
    double z = b;
    const auto x = s.pixels.data();
    for (std::size_t j = 0; j < d; ++j) z += w[j] * x[j];
    if ((z > 0.0) == (s.label == Label::Artificial)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace

TEST(Synthetic, BalancedAndInRange) {
  Rng rng(1, "synth");
  const auto imgs = generate_synthetic(10, rng);
  ASSERT_EQ(imgs.size(), 10u);
  int art = 0;
  for (const auto& im : imgs) {
    EXPECT_EQ(im.pixels.shape(), (Shape{3, 64, 64}));
    if (im.label == Label::Artificial) ++art;
    for (double v : im.pixels.data()) {
      ASSERT_GE(v, -1.0);
      ASSERT_LE(v, 1.0);
    }
  }
  EXPECT_EQ(art, 5);
}

TEST(Synthetic, SameSeedSameImages) {
  Rng a(3, "synth"), b(3, "synth"), c(4, "synth");
  const auto ia = generate_synthetic(6, a);
  const auto ib = generate_synthetic(6, b);
  const auto ic = generate_synthetic(6, c);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(ia[i].pixels, ib[i].pixels);
    EXPECT_EQ(ia[i].origin, ib[i].origin);
  }
  EXPECT_NE(ia[0].pixels, ic[0].pixels);
}

TEST(Synthetic, RejectsTinyCounts) {
  Rng rng(1, "synth");
  EXPECT_THROW(generate_synthetic(1, rng), Error);
}

TEST(Synthetic, LinearProbeSeparatesClasses) {
  Rng rng(1, "probe");
  const auto train = generate_synthetic(2000, rng);
  const auto test = generate_synthetic(500, rng);
  const double acc = linear_probe(train, test);
  RecordProperty("probe_accuracy", std::to_string(acc));
  EXPECT_GE(acc, 0.80);
}

TEST(Resize, IdentityWhenSizeMatches) {
  Rng rng(2, "resize");
  const Tensor img = oftest::random_tensor({3, 64, 64}, rng, 0.0, 1.0);
  EXPECT_EQ(resize_bilinear(img, 64), img);
}

TEST(Resize, ConstantsArePreserved) {
  for (std::size_t h : {1u, 7u, 64u, 256u}) {
    const Tensor img({3, h, h + 3}, 0.37);
    const Tensor out = resize_bilinear(img, 64);
    for (double v : out.data()) EXPECT_NEAR(v, 0.37, 1e-15);
  }
}

TEST(Resize, CheckerboardToOnePixelIsMean) {
  const Tensor img = tensor_create({1, 2, 2}, std::vector<double>{0, 1, 1, 0});
  const Tensor out = resize_bilinear(img, 1, 1);
  EXPECT_NEAR(out[0], 0.5, 1e-15);
}

TEST(Resize, CommutesWithAffinePixelMaps) {
  Rng rng(5, "affine");
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t h = 1 + rng.below(90), w = 1 + rng.below(90);
    const Tensor img = oftest::random_tensor({3, h, w}, rng, 0.0, 1.0);
    const double a = rng.uniform(-2, 2), b = rng.uniform(-1, 1);
    Tensor mapped = img;
    for (double& v : mapped.data()) v = a * v + b;
    const Tensor lhs = resize_bilinear(mapped, 64);
    const Tensor rhs = resize_bilinear(img, 64);
    for (std::size_t i = 0; i < lhs.numel(); ++i) ASSERT_NEAR(lhs[i], a * rhs[i] + b, 1e-12);
  }
}

TEST(Resize, DownscaleByTwoAveragesBlocks) {
  // Half-pixel centers land exactly between source pixels at a 2:1 ratio.
  Rng rng(6, "half");
  const Tensor img = oftest::random_tensor({1, 4, 4}, rng);
  const Tensor out = resize_bilinear(img, 2, 2);
  for (std::size_t y = 0; y < 2; ++y)
    for (std::size_t x = 0; x < 2; ++x) {
      const double want = (img[(2 * y) * 4 + 2 * x] + img[(2 * y) * 4 + 2 * x + 1] +
                           img[(2 * y + 1) * 4 + 2 * x] + img[(2 * y + 1) * 4 + 2 * x + 1]) / 4.0;
      EXPECT_NEAR(out[y * 2 + x], want, 1e-15);
    }
}

TEST(Binarization, DefaultMapCoversAllClasses) {
  const BinarizationMap m = default_binarization();
  EXPECT_EQ(m.size(), 21u);
  int natural = 0;
  for (const auto& [cls, label] : m.entries()) natural += label == Label::Natural;
  EXPECT_EQ(natural, 6);
  EXPECT_EQ(m.label_of("forest"), Label::Natural);
  EXPECT_EQ(m.label_of("river"), Label::Natural);
  EXPECT_EQ(m.label_of("storagetanks"), Label::Artificial);
  EXPECT_EQ(m.label_of("denseresidential"), Label::Artificial);
  EXPECT_THROW(m.label_of("moon"), ConfigError);
}

TEST(Binarization, OverridesReplaceLabels) {
  BinarizationMap m = default_binarization();
  m.set("golfcourse", Label::Artificial);
  EXPECT_EQ(m.label_of("golfcourse"), Label::Artificial);
  EXPECT_EQ(m.size(), 21u);
}

TEST(Ppm, ConstantGrayDecodesToZeroAfterNormalization) {
  TempDir dir;
  write_bytes(dir.path() / "forest" / "a.ppm", gray_ppm(256, 256, 128));
  const DirectoryLoad load = load_directory(dir.path(), default_binarization());
  ASSERT_EQ(load.images.size(), 1u);
  EXPECT_EQ(load.images[0].label, Label::Natural);
  EXPECT_EQ(load.images[0].origin, "forest");
  EXPECT_EQ(load.images[0].pixels.shape(), (Shape{3, 64, 64}));
  for (double v : load.images[0].pixels.data()) EXPECT_NEAR(v, normalize_unit(128.0 / 255.0), 1e-12);
  EXPECT_NEAR(load.images[0].pixels[0], 0.0, 0.01);
  EXPECT_EQ(load.warnings.size(), 20u);
}

TEST(Ppm, WriteReadRoundTrip) {
  TempDir dir;
  Tensor img({3, 5, 7});
  for (std::size_t i = 0; i < img.numel(); ++i) img[i] = static_cast<double>(i % 256) / 255.0;
  write_ppm(dir.path() / "x.ppm", img);
  const Tensor back = read_ppm(dir.path() / "x.ppm");
  EXPECT_EQ(back.shape(), img.shape());
  for (std::size_t i = 0; i < img.numel(); ++i) EXPECT_NEAR(back[i], img[i], 1e-12);
}

TEST(Ppm, MalformedFilesNameThePath) {
  TempDir dir;
  const fs::path bad = dir.path() / "bad.ppm";
  for (const std::string& bytes : {std::string("P3\n2 2\n255\n"), std::string("P6\n2\n"),
                                   std::string("P6\n2 2\n65535\n"), gray_ppm(4, 4, 1).substr(0, 20)}) {
    write_bytes(bad, bytes);
    try {
      read_ppm(bad);
      ADD_FAILURE() << "accepted malformed file";
    } catch (const FormatError& e) {
      EXPECT_NE(std::string(e.what()).find("bad.ppm"), std::string::npos);
    }
  }
}

TEST(Ppm, ComponentOrderIsInterleavedRgb) {
  TempDir dir;
  std::string bytes = "P6 1 1 255\n";
  bytes += static_cast<char>(255);
  bytes += static_cast<char>(0);
  bytes += static_cast<char>(51);
  write_bytes(dir.path() / "px.ppm", bytes);
  const Tensor t = read_ppm(dir.path() / "px.ppm");
  EXPECT_EQ(t.values(), (std::vector<double>{1.0, 0.0, 0.2}));
}

TEST(LoadDirectory, EmptyRootGivesNoImagesAndWarnings) {
  TempDir dir;
  const DirectoryLoad load = load_directory(dir.path(), default_binarization());
  EXPECT_TRUE(load.images.empty());
  EXPECT_FALSE(load.warnings.empty());
}

TEST(LoadDirectory, UnknownClassIsError) {
  TempDir dir;
  write_bytes(dir.path() / "volcano" / "a.ppm", gray_ppm(2, 2, 0));
  EXPECT_THROW(load_directory(dir.path(), default_binarization()), ConfigError);
}

TEST(LoadDirectory, SortedDeterministicOrder) {
  TempDir dir;
  write_bytes(dir.path() / "river" / "b.ppm", gray_ppm(8, 8, 10));
  write_bytes(dir.path() / "river" / "a.ppm", gray_ppm(8, 8, 20));
  write_bytes(dir.path() / "airplane" / "z.ppm", gray_ppm(8, 8, 30));
  const DirectoryLoad load = load_directory(dir.path(), default_binarization());
  ASSERT_EQ(load.images.size(), 3u);
  EXPECT_EQ(load.images[0].origin, "airplane");
  EXPECT_EQ(load.images[0].label, Label::Artificial);
  EXPECT_NEAR(load.images[1].pixels[0], normalize_unit(20.0 / 255.0), 1e-12);
  EXPECT_NEAR(load.images[2].pixels[0], normalize_unit(10.0 / 255.0), 1e-12);
}
