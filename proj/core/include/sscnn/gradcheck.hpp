#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sscnn/layer.hpp"

namespace sscnn {

/// |a - b| / max(|a|, |b|, 1e-8).
double relative_error(double analytic, double numeric);

struct GradCheckEntry {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  /// Elements whose +/- epsilon evaluations fell in a different
  /// piecewise-linear region (ReLU sign flip or pooling argmax change).
  std::size_t skipped_kinks = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  double tolerance = 1e-4;
  std::vector<GradCheckEntry> entries;

  std::size_t checked() const;
  std::size_t skipped_kinks() const;
  bool passed() const { return max_relative_error < tolerance; }
};

/// One block of values to perturb, with the analytic gradient computed at
/// the unperturbed point.
struct GradTarget {
  std::string name;
  std::span<double> values;
  std::span<const double> analytic;
};

/// Central differences (f(x+e) - f(x-e)) / 2e for every element of every
/// target. `region`, when provided, fingerprints the piecewise-linear region
/// of the last objective evaluation; elements whose perturbed evaluations
/// leave the baseline region are skipped and counted.
GradCheckReport check_gradients(const std::function<double()>& objective,
                                std::span<const GradTarget> targets,
                                double epsilon, double tolerance,
                                const std::function<std::uint64_t()>& region = {});

/// Checks a layer's input and parameter gradients on the scalar objective
/// sum(r * layer(x)) with r drawn uniformly from [-1, 1] using `seed`.
GradCheckReport finite_difference_check(Layer& layer, const Tensor& input,
                                        double epsilon, double tolerance,
                                        Mode mode = Mode::kTrain,
                                        std::uint64_t seed = 0);

}  // namespace sscnn
