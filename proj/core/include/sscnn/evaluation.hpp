#pragma once

#include <optional>
#include <span>
#include <vector>

#include "sscnn/metrics.hpp"
#include "sscnn/network.hpp"
#include "sscnn/sample.hpp"

namespace sscnn {

struct EvalResult {
  ClassAccuracy scene;
  /// Empty when no evaluated pixel was left unignored.
  std::optional<ClassAccuracy> pixel;
  /// Filled when requested, in sample order.
  std::vector<Prediction> predictions;
};

/// Eval-mode predictions over `samples`. Throws EmptyEvaluationError for an
/// empty set.
EvalResult evaluate(SSCNNModel& model, std::span<const SampleRecord> samples,
                    bool keep_predictions = false);

struct RefinementEval {
  ClassAccuracy unrefined;
  ClassAccuracy refined;
};

/// Pixel accuracy of stored predictions before and after scene-prior
/// refinement with `w_so`.
RefinementEval evaluate_refinement(std::span<const Prediction> predictions,
                                   std::span<const SampleRecord> samples,
                                   const Tensor& w_so, std::size_t num_objects);

}  // namespace sscnn
