#include <gtest/gtest.h>

#include <cmath>

#include "sscnn/error.hpp"
#include "sscnn/random.hpp"
#include "sscnn/refinement.hpp"
#include "test_support.hpp"

namespace sscnn {
namespace {

CooccurrenceCounts counts(std::size_t ms, std::size_t mo, std::vector<std::uint64_t> f) {
  CooccurrenceCounts c(ms, mo);
  c.f = std::move(f);
  return c;
}

SampleRecord labelled(std::size_t scene, std::vector<std::uint16_t> labels) {
  SampleRecord s;
  s.scene = scene;
  s.labels = LabelMap(1, labels.size());
  s.labels.labels = std::move(labels);
  s.mask = ignore_mask_from_labels(s.labels);
  return s;
}

TEST(Refinement, WorkedExample) {
  const RefinementMatrix r = build_refinement_matrix(counts(2, 2, {3, 0, 1, 2}));
  EXPECT_NEAR(r.w[0], std::log(7.0 / 3.0), 1e-15);
  EXPECT_EQ(r.w[1], 1e-2);
  EXPECT_NEAR(r.w[2], std::log(5.0 / 3.0), 1e-15);
  EXPECT_NEAR(r.w[3], std::log(3.0), 1e-15);
  EXPECT_NEAR(r.w[0], 0.8473, 5e-5);
  EXPECT_NEAR(r.w[2], 0.5108, 5e-5);
  EXPECT_NEAR(r.w[3], 1.0986, 5e-5);
}

TEST(Refinement, SingleSceneIsExactlyLn2) {
  for (std::uint64_t f = 1; f <= 2000; ++f) {
    const RefinementMatrix r = build_refinement_matrix(counts(1, 1, {f}));
    ASSERT_EQ(r.w[0], std::log(2.0)) << f;
  }
}

TEST(Refinement, AllZeroFloors) {
  const RefinementMatrix r = build_refinement_matrix(CooccurrenceCounts(3, 4));
  for (double v : r.w.data()) EXPECT_EQ(v, kRefinementFloor);
  for (double v : r.idf.data()) EXPECT_EQ(v, 0.0);
}

TEST(Refinement, MatchesOracleOnRandomCounts) {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t ms = 1 + rng.index(10), mo = 1 + rng.index(10);
    std::vector<std::uint64_t> f(ms * mo);
    for (auto& v : f) v = rng.bernoulli(0.3) ? 0 : rng.index(500);
    const RefinementMatrix r = build_refinement_matrix(counts(ms, mo, f));
    const auto want = testing::refinement_oracle(f, ms, mo);
    for (std::size_t k = 0; k < f.size(); ++k) {
      ASSERT_NEAR(r.w[k], want[k], 1e-12);
      ASSERT_GT(r.w[k], 0.0);
    }
  }
}

TEST(Refinement, MonotoneWithIdfFixed) {
  // w = ln(1 + ln(1 + f) idf) is increasing in f for a fixed idf > 0.
  const double idf = 0.7;
  double prev = 0.0;
  for (int f = 0; f < 50; ++f) {
    const double w = std::log1p(std::log1p(static_cast<double>(f)) * idf);
    EXPECT_GE(w, prev);
    prev = w;
  }
}

TEST(Cooccurrence, ImagePresenceCounts) {
  const std::vector<SampleRecord> one{labelled(0, {1, 2, 2, kIgnoreLabel})};
  const CooccurrenceCounts c = count_cooccurrence(one, 2, 4);
  EXPECT_EQ(c.f, (std::vector<std::uint64_t>{0, 1, 1, 0, 0, 0, 0, 0}));

  const std::vector<SampleRecord> twice{one[0], one[0], labelled(1, {3})};
  const CooccurrenceCounts d = count_cooccurrence(twice, 2, 4);
  EXPECT_EQ(d.at(0, 1), 2u);
  EXPECT_EQ(d.at(0, 2), 2u);
  EXPECT_EQ(d.at(1, 3), 1u);
  EXPECT_EQ(d.at(1, 1), 0u);
}

TEST(Cooccurrence, Errors) {
  EXPECT_THROW(count_cooccurrence(std::span<const SampleRecord>{}, 2, 2), DataError);
  const std::vector<SampleRecord> bad{labelled(0, {5})};
  EXPECT_THROW(count_cooccurrence(bad, 2, 2), InvalidArgumentError);
}

Tensor random_probs(std::size_t h, std::size_t w, std::size_t m, std::uint64_t seed) {
  Tensor t({h, w, m}, RandomFill{0.5, seed});
  for (double& v : t.data()) v += 0.5;
  return normalize_pixels(t);
}

TEST(ApplyRefinement, ArgmaxInvariantUnderRenormalization) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor p_o = random_probs(6, 5, 7, seed);
    Tensor p_s({4}, RandomFill{0.5, seed + 100});
    for (double& v : p_s.data()) v += 0.5;
    Tensor w({4, 7}, RandomFill{1.0, seed + 200});
    for (double& v : w.data()) v = std::abs(v) + 1e-2;
    const Tensor refined = apply_refinement(p_s, w, p_o);
    EXPECT_EQ(argmax_labels(refined), argmax_labels(normalize_pixels(refined)));
  }
}

TEST(ApplyRefinement, AllOnesLeavesArgmax) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor p_o = random_probs(4, 4, 5, seed);
    const Tensor p_s = normalize_pixels(random_probs(1, 1, 3, seed + 7)).reshaped({3});
    const Tensor refined = apply_refinement(p_s, Tensor({3, 5}, 1.0), p_o);
    EXPECT_EQ(argmax_labels(refined), argmax_labels(p_o));
  }
}

TEST(ApplyRefinement, OneHotSelectsRow) {
  const Tensor w({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  const Tensor prior = scene_prior(Tensor({2}, std::vector<double>{0, 1}), w);
  EXPECT_EQ(prior, Tensor({3}, std::vector<double>{4, 5, 6}));
}

TEST(ApplyRefinement, UniformPixelFollowsPrior) {
  const Tensor w({2, 3}, std::vector<double>{1, 0.5, 0.2, 0.1, 0.3, 2.0});
  const Tensor p_s({2}, std::vector<double>{0.3, 0.7});
  const Tensor refined = apply_refinement(p_s, w, Tensor({1, 1, 3}, 1.0 / 3.0));
  EXPECT_EQ(argmax_labels(refined).at(0, 0), argmax(scene_prior(p_s, w).data()));
}

TEST(ApplyRefinement, ShapeMismatch) {
  EXPECT_THROW(apply_refinement(Tensor({3}, 0.3), Tensor({2, 3}, 1.0), Tensor({1, 1, 3}, 1.0)),
               InvalidShapeError);
  EXPECT_THROW(apply_refinement(Tensor({2}, 0.5), Tensor({2, 3}, 1.0), Tensor({1, 1, 4}, 1.0)),
               InvalidShapeError);
}

TEST(Refinement, SaveLoadWithSidecar) {
  testing::TempDir dir("wso");
  const Tensor w({2, 2}, std::vector<double>{1, 0.01, 0.5, 2});
  const std::vector<std::string> scenes{"bedroom", "office"}, objects{"bg", "bed"};
  save_refinement(dir / "w_so.sstn", w, scenes, objects);
  EXPECT_EQ(load_refinement(dir / "w_so.sstn"), w);
  const auto side = testing::read_bytes(dir / "w_so.sstn.classes.txt");
  const std::string text(side.begin(), side.end());
  EXPECT_NE(text.find("scene office"), std::string::npos);
  EXPECT_NE(text.find("object bed"), std::string::npos);
  EXPECT_THROW(save_refinement(dir / "x.sstn", w, scenes, std::vector<std::string>{"a"}),
               InvalidShapeError);
}

}  // namespace
}  // namespace sscnn
