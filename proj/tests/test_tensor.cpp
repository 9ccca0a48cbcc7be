#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "orbitfilter/error.hpp"
#include "orbitfilter/rng.hpp"
#include "orbitfilter/tensor.hpp"

using namespace orbitfilter;

TEST(Tensor, ScalarFillProducesConstantTensor) {
  const Tensor t = tensor_create({2, 3}, 1.5);
  ASSERT_EQ(t.numel(), 6u);
  for (double v : t.data()) EXPECT_EQ(v, 1.5);
}

TEST(Tensor, ArrayFillIsRowMajor) {
  const Tensor t = tensor_create({2, 2}, std::vector<double>{1, 2, 3, 4});
  EXPECT_EQ(t.shape(), (Shape{2, 2}));
  EXPECT_EQ(t[0], 1);
  EXPECT_EQ(t[3], 4);
}

TEST(Tensor, ArrayLengthMismatchIsShapeError) {
  EXPECT_THROW(tensor_create({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST(Tensor, RejectsZeroExtentAndBadRank) {
  EXPECT_THROW(Tensor(Shape{0, 3}), ShapeError);
  EXPECT_THROW(Tensor(Shape{}), ShapeError);
  EXPECT_THROW(Tensor(Shape{1, 1, 1, 1, 1}), ShapeError);
}

TEST(Tensor, FourDimensionalIndexing) {
  Tensor t({2, 3, 4, 5});
  t.at(1, 2, 3, 4) = 7.0;
  EXPECT_EQ(t[t.numel() - 1], 7.0);
  t.at(0, 1, 0, 0) = 2.0;
  EXPECT_EQ(t[20], 2.0);
}

TEST(Tensor, ZipMatchesElementwiseArithmetic) {
  Rng rng(3, "zip");
  const Tensor a = tensor_random({3, 4}, UniformDist{-2, 2}, rng);
  const Tensor b = tensor_random({3, 4}, UniformDist{-2, 2}, rng);
  const Tensor s = tensor_zip(a, b, ZipOp::Add);
  const Tensor d = tensor_zip(a, b, ZipOp::Sub);
  const Tensor m = tensor_zip(a, b, ZipOp::Mul);
  for (std::size_t i = 0; i < a.numel(); ++i) {
    EXPECT_EQ(s[i], a[i] + b[i]);
    EXPECT_EQ(d[i], a[i] - b[i]);
    EXPECT_EQ(m[i], a[i] * b[i]);
  }
}

TEST(Tensor, ZipShapeMismatchThrows) {
  EXPECT_THROW(tensor_zip(Tensor({2, 3}), Tensor({3, 2}), ZipOp::Add), ShapeError);
}

TEST(Tensor, ReshapeKeepsDataAndChecksCount) {
  const Tensor t = tensor_create({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  const Tensor r = t.reshaped({3, 2});
  EXPECT_EQ(r.values(), t.values());
  EXPECT_THROW(t.reshaped({4, 2}), ShapeError);
}

TEST(Tensor, RandomIsReproduciblePerSeedAndLabel) {
  Rng a(42, "w"), b(42, "w"), c(42, "other");
  const Tensor ta = tensor_random({4, 4}, NormalDist{0, 1}, a);
  const Tensor tb = tensor_random({4, 4}, NormalDist{0, 1}, b);
  const Tensor tc = tensor_random({4, 4}, NormalDist{0, 1}, c);
  EXPECT_EQ(ta, tb);
  EXPECT_NE(ta, tc);
}

TEST(Tensor, UniformDrawsStayInRange) {
  Rng rng(9, "range");
  const Tensor t = tensor_random({1000}, UniformDist{-0.25, 0.75}, rng);
  for (double v : t.data()) {
    EXPECT_GE(v, -0.25);
    EXPECT_LE(v, 0.75);
  }
}

TEST(Tensor, AllFiniteDetectsNan) {
  Tensor t({3}, 0.0);
  EXPECT_TRUE(t.all_finite());
  t[1] = std::nan("");
  EXPECT_FALSE(t.all_finite());
}

TEST(Rng, StreamsDependOnSeedAndLabelOnly) {
  Rng a(1, "x"), b(1, "x"), c(2, "x"), d(1, "y");
  const auto first = a.next_u64();
  EXPECT_EQ(first, b.next_u64());
  EXPECT_NE(first, c.next_u64());
  EXPECT_NE(first, d.next_u64());
}

TEST(Rng, UniformMomentsAreSane) {
  Rng rng(5, "moments");
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sq += u * u;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.005);
  EXPECT_NEAR(sq / n - (sum / n) * (sum / n), 1.0 / 12.0, 0.002);
}

TEST(Rng, NormalMomentsAreSane) {
  Rng rng(6, "normal");
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}

TEST(Rng, BelowCoversRangeUniformly) {
  Rng rng(7, "below");
  std::vector<int> hits(6, 0);
  for (int i = 0; i < 60000; ++i) ++hits[rng.below(6)];
  for (int h : hits) EXPECT_NEAR(h, 10000, 400);
}

TEST(Rng, ForkExtendsLabel) {
  Rng parent(11, "init");
  const Rng child = parent.fork("msnet");
  EXPECT_EQ(child.label(), "init/msnet");
  Rng direct(11, "init/msnet");
  Rng copy = child;
  EXPECT_EQ(copy.next_u64(), direct.next_u64());
}

TEST(Rng, HashLabelIsStable) {
  // FNV-1a 64-bit of the empty string and of "a".
  EXPECT_EQ(hash_label(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(hash_label("a"), 0xaf63dc4c8601ec8cULL);
}
