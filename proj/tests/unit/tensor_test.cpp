#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <limits>

#include "sscnn/error.hpp"
#include "sscnn/labels.hpp"
#include "sscnn/random.hpp"
#include "sscnn/tensor.hpp"
#include "test_support.hpp"

namespace sscnn {
namespace {

TEST(Tensor, FillAndShape) {
  Tensor t({2, 3, 4}, 1.5);
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.rank(), 3u);
  EXPECT_EQ(t.dim(2), 4u);
  for (double v : t.data()) EXPECT_EQ(v, 1.5);
}

TEST(Tensor, RowMajorOffset) {
  Tensor t({2, 3, 4});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
  EXPECT_EQ(t.at({1, 2, 3}), 1 * 12 + 2 * 4 + 3);
  EXPECT_EQ(t.at({0, 1, 0}), 4);
}

TEST(Tensor, RandomFillIsReproducible) {
  Tensor a({5, 7}, RandomFill{0.5, 42});
  Tensor b({5, 7}, RandomFill{0.5, 42});
  Tensor c({5, 7}, RandomFill{0.5, 43});
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  for (double v : a.data()) {
    EXPECT_GE(v, -0.5);
    EXPECT_LE(v, 0.5);
  }
}

TEST(Tensor, CheckedShapeRejectsNonPositive) {
  const std::int64_t bad[] = {3, 0};
  EXPECT_THROW(checked_shape(bad), InvalidShapeError);
  const std::int64_t ok[] = {3, 2};
  EXPECT_EQ(checked_shape(ok), (Shape{3, 2}));
}

TEST(Tensor, ReshapeKeepsData) {
  Tensor t({2, 3}, RandomFill{1.0, 1});
  Tensor r = t.reshaped({3, 2});
  EXPECT_TRUE(std::equal(t.data().begin(), t.data().end(), r.data().begin()));
  EXPECT_THROW(t.reshaped({4, 2}), InvalidShapeError);
}

TEST(Tensor, SstnRoundTrip) {
  Tensor t({3, 4, 2}, RandomFill{10.0, 9});
  const auto bytes = encode_tensor(t);
  EXPECT_EQ(decode_tensor(bytes), t);

  testing::TempDir dir("tensor");
  save_tensor(dir / "t.sstn", t);
  EXPECT_EQ(load_tensor(dir / "t.sstn"), t);
  EXPECT_EQ(testing::read_bytes(dir / "t.sstn"), bytes);
}

TEST(Tensor, CorruptFileNamesPath) {
  testing::TempDir dir("tensor_bad");
  auto bytes = encode_tensor(Tensor({4, 4}, 1.0));
  bytes.resize(bytes.size() - 5);
  {
    std::ofstream out(dir / "broken.sstn", std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
  }
  try {
    load_tensor(dir / "broken.sstn");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("broken.sstn"), std::string::npos);
  }
  std::vector<std::uint8_t> junk{'N', 'O', 'P', 'E', 0, 0, 0, 0};
  EXPECT_THROW(decode_tensor(junk), DataError);
}

TEST(Tensor, AllFinite) {
  Tensor t({3}, 1.0);
  EXPECT_TRUE(t.all_finite());
  t[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(t.all_finite());
}

TEST(Labels, ArgmaxTiesToLowest) {
  const double v[] = {1.0, 3.0, 3.0, 2.0};
  EXPECT_EQ(argmax(v), 1u);
  Tensor s({1, 2, 3}, std::vector<double>{0, 5, 1, 2, 2, 0});
  const LabelMap l = argmax_labels(s);
  EXPECT_EQ(l.at(0, 0), 1);
  EXPECT_EQ(l.at(0, 1), 0);
}

TEST(Labels, TensorRoundTripAndValidation) {
  LabelMap l(2, 3, 4);
  l.at(1, 2) = kIgnoreLabel;
  EXPECT_EQ(labels_from_tensor(labels_to_tensor(l)), l);
  Tensor bad({1, 2}, std::vector<double>{1.0, 0.5});
  EXPECT_THROW(labels_from_tensor(bad), DataError);
  const IgnoreMask m = ignore_mask_from_labels(l);
  EXPECT_TRUE(m[5]);
  EXPECT_FALSE(m[0]);
}

TEST(Random, StreamIsSeeded) {
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
  Rng c(6);
  EXPECT_NE(Rng(5).next(), c.next());
}

}  // namespace
}  // namespace sscnn
