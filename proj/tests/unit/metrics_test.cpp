#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "sscnn/error.hpp"
#include "sscnn/metrics.hpp"
#include "sscnn/random.hpp"

namespace sscnn {
namespace {

ConfusionMatrix matrix2(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
  ConfusionMatrix m(2);
  m.add(0, 0, a);
  m.add(0, 1, b);
  m.add(1, 0, c);
  m.add(1, 1, d);
  return m;
}

TEST(Metrics, BalancedExample) {
  const ClassAccuracy a = mean_class_accuracy(matrix2(9, 1, 5, 5));
  EXPECT_EQ(*a.per_class[0], 9.0 / 10.0);
  EXPECT_EQ(*a.per_class[1], 5.0 / 10.0);
  EXPECT_EQ(a.mean, 0.7);
  EXPECT_EQ(a.overall, 14.0 / 20.0);
}

TEST(Metrics, ImbalancedExample) {
  const ClassAccuracy a = mean_class_accuracy(matrix2(9, 1, 1, 1));
  EXPECT_EQ(a.overall, 10.0 / 12.0);
  EXPECT_EQ(*a.per_class[1], 1.0 / 2.0);
  EXPECT_EQ(a.mean, 0.7);
  EXPECT_EQ(a.confusion.row_total(0), 10u);
  EXPECT_EQ(a.confusion.row_total(1), 2u);
  EXPECT_EQ(a.confusion.correct(), 10u);
}

TEST(Metrics, PerfectScenePredictions) {
  const std::vector<std::size_t> y{0, 1, 2, 2, 1};
  const ClassAccuracy a = scene_mean_class_accuracy(y, y, 3);
  for (const auto& c : a.per_class) EXPECT_EQ(*c, 1.0);
  EXPECT_EQ(a.mean, 1.0);
}

TEST(Metrics, RowSumsAreClassCounts) {
  const std::vector<std::size_t> pred{0, 0, 1, 2, 2, 2, 1};
  const std::vector<std::size_t> truth{0, 1, 1, 2, 0, 2, 2};
  const ClassAccuracy a = scene_mean_class_accuracy(pred, truth, 3);
  EXPECT_EQ(a.confusion.row_total(0), 2u);
  EXPECT_EQ(a.confusion.row_total(1), 2u);
  EXPECT_EQ(a.confusion.row_total(2), 3u);
  EXPECT_EQ(a.confusion.at(2, 1), 1u);
  EXPECT_EQ(a.confusion.total(), 7u);
}

TEST(Metrics, PermutationInvariant) {
  std::vector<std::size_t> pred{0, 0, 1, 2, 2, 2, 1}, truth{0, 1, 1, 2, 0, 2, 2};
  const ClassAccuracy a = scene_mean_class_accuracy(pred, truth, 3);
  std::reverse(pred.begin(), pred.end());
  std::reverse(truth.begin(), truth.end());
  const ClassAccuracy b = scene_mean_class_accuracy(pred, truth, 3);
  EXPECT_EQ(a.confusion, b.confusion);
  EXPECT_EQ(a.mean, b.mean);
}

TEST(Metrics, AbsentClassExcludedWithWarning) {
  const std::vector<std::size_t> pred{0, 1, 1}, truth{0, 0, 1};
  const ClassAccuracy a = scene_mean_class_accuracy(pred, truth, 3);
  EXPECT_FALSE(a.per_class[2].has_value());
  EXPECT_EQ(a.mean, (1.0 / 2.0 + 1.0) / 2.0);
  EXPECT_FALSE(a.warnings.empty());
}

TEST(Metrics, EmptyEvaluation) {
  EXPECT_THROW(mean_class_accuracy(ConfusionMatrix(3)), EmptyEvaluationError);
  EXPECT_THROW(scene_mean_class_accuracy(std::vector<std::size_t>{},
                                         std::vector<std::size_t>{}, 2),
               EmptyEvaluationError);
}

TEST(Metrics, PixelsRespectIgnore) {
  LabelMap truth(1, 4, 0), pred(1, 4, 0);
  truth.labels = {0, 0, 1, kIgnoreLabel};
  pred.labels = {0, 0, 0, 1};
  const std::vector<LabelMap> p{pred}, t{truth};
  const std::vector<IgnoreMask> m{ignore_mask_from_labels(truth)};
  const ClassAccuracy a = pixel_mean_class_accuracy(p, t, m, 2);
  EXPECT_EQ(a.confusion.total(), 3u);
  EXPECT_EQ(a.mean, 0.5);

  const std::vector<IgnoreMask> all{IgnoreMask(1, 4, true)};
  EXPECT_THROW(pixel_mean_class_accuracy(p, t, all, 2), EmptyEvaluationError);
}

TEST(Metrics, UniformRandomPredictor) {
  constexpr std::size_t k = 4, n = 10000;
  Rng rng(99);
  std::vector<std::size_t> pred(n), truth(n);
  for (std::size_t i = 0; i < n; ++i) {
    truth[i] = i % k;
    pred[i] = rng.index(k);
  }
  const double mean = scene_mean_class_accuracy(pred, truth, k).mean;
  const double per_class_var = (1.0 / k) * (1.0 - 1.0 / k) / (n / k);
  const double sigma = std::sqrt(per_class_var / k);
  EXPECT_NEAR(mean, 1.0 / k, 3.0 * sigma);
}

TEST(Metrics, MergeAdds) {
  ConfusionMatrix a = matrix2(1, 2, 3, 4);
  a.merge(matrix2(1, 1, 1, 1));
  EXPECT_EQ(a, matrix2(2, 3, 4, 5));
  EXPECT_THROW(a.merge(ConfusionMatrix(3)), InvalidArgumentError);
}

TEST(Metrics, ConfusionCsv) {
  const std::vector<std::string> names{"bed", "sofa"};
  const std::string csv = confusion_to_csv(matrix2(9, 1, 5, 5), names);
  EXPECT_EQ(csv, "truth\\predicted,bed,sofa\nbed,9,1\nsofa,5,5\n");
}

}  // namespace
}  // namespace sscnn
