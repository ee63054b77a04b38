#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sscnn/gradcheck.hpp"
#include "sscnn/network.hpp"

namespace sscnn {

struct LayerGradCheck {
  std::string layer;
  GradCheckReport report;
};

struct ModelGradCheck {
  std::vector<LayerGradCheck> layers;
  /// d L_ss for every parameter of the whole model.
  GradCheckReport end_to_end;

  double max_relative_error() const;
  bool passed() const;
};

/// Checks every layer in isolation and then L_ss end to end, on a random
/// input and label map drawn from `seed`.
ModelGradCheck check_model_gradients(const NetworkConfig& config, std::uint64_t seed,
                                     double epsilon = 1e-4, double tolerance = 1e-4);

}  // namespace sscnn
