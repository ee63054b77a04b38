#pragma once

#include <span>
#include <string>
#include <vector>

#include "sscnn/labels.hpp"

namespace sscnn {

/// Entry j is 1 iff object j covers at least one non-ignored pixel.
std::vector<double> encode_occurrence(const LabelMap& labels, const IgnoreMask& mask,
                                      std::size_t num_objects);

struct SvmConfig {
  double c = 1.0;
  std::size_t iterations = 2000;
  double step = 0.5;  // subgradient step at iteration t is step / sqrt(t + 1)
};

/// One-vs-rest linear classifiers.
struct LinearSvm {
  std::size_t classes = 0;
  std::size_t features = 0;
  std::vector<double> weights;  // classes x features
  std::vector<double> bias;     // classes
  /// Full-batch objective of each binary problem per iteration.
  std::vector<std::vector<double>> objective_history;

  std::vector<double> decision_values(std::span<const double> x) const;
  /// argmax of the decision values, ties to the lowest class.
  std::size_t predict(std::span<const double> x) const;
};

/// Per class, minimizes 0.5 |w|^2 + C mean_i max(0, 1 - y_i (w x_i + b)) by
/// full-batch subgradient descent, returning the best iterate. Throws
/// InvalidArgumentError when fewer than two classes are present.
LinearSvm train_linear_svm(std::span<const std::vector<double>> vectors,
                           std::span<const std::size_t> labels, std::size_t num_classes,
                           const SvmConfig& config = {});

double svm_objective(std::span<const std::vector<double>> vectors,
                     std::span<const double> targets, std::span<const double> w,
                     double b, double c);

std::string svm_to_json(const LinearSvm& svm);
LinearSvm svm_from_json(const std::string& text);

}  // namespace sscnn
