#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sscnn/labels.hpp"

namespace sscnn {

/// K x K counts; rows are ground truth, columns are predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = 0);

  std::size_t classes() const { return k_; }
  void add(std::size_t truth, std::size_t predicted, std::uint64_t count = 1);
  std::uint64_t at(std::size_t truth, std::size_t predicted) const {
    return counts_[truth * k_ + predicted];
  }
  std::uint64_t row_total(std::size_t truth) const;
  std::uint64_t correct() const;
  std::uint64_t total() const;
  void merge(const ConfusionMatrix& other);

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t k_ = 0;
  std::vector<std::uint64_t> counts_;
};

struct ClassAccuracy {
  ConfusionMatrix confusion;
  /// correct_c / total_c, or nullopt for classes absent from the ground truth.
  std::vector<std::optional<double>> per_class;
  /// Mean over classes that have at least one ground-truth item.
  double mean = 0.0;
  double overall = 0.0;
  std::vector<std::string> warnings;
};

/// Throws EmptyEvaluationError if the matrix holds no items.
ClassAccuracy mean_class_accuracy(const ConfusionMatrix& confusion);

ClassAccuracy scene_mean_class_accuracy(std::span<const std::size_t> predictions,
                                        std::span<const std::size_t> labels,
                                        std::size_t num_classes);

/// Adds every non-ignored pixel of one image to `confusion`.
void accumulate_pixels(ConfusionMatrix& confusion, const LabelMap& predicted,
                       const LabelMap& truth, const IgnoreMask& mask);

ClassAccuracy pixel_mean_class_accuracy(std::span<const LabelMap> predicted,
                                        std::span<const LabelMap> truth,
                                        std::span<const IgnoreMask> masks,
                                        std::size_t num_classes);

/// Header row and first column carry the class names.
std::string confusion_to_csv(const ConfusionMatrix& confusion,
                             std::span<const std::string> class_names);

}  // namespace sscnn
