#pragma once

#include <cstddef>

#include "sscnn/labels.hpp"
#include "sscnn/tensor.hpp"

namespace sscnn {

/// Probabilities below this are clamped inside log().
inline constexpr double kLogFloor = 1e-12;

/// Numerically stable softmax over a rank-1 tensor (max-subtracted).
Tensor softmax(const Tensor& logits);

/// Scene probabilities p_k = exp(f.theta_k) / sum_i exp(f.theta_i) for
/// features f of length F and theta of shape (F, M_s).
Tensor scene_softmax(const Tensor& features, const Tensor& theta);

/// Softmax over the last axis of an H x W x M score map.
Tensor pixel_softmax(const Tensor& scores);

struct LossValue {
  double loss = 0.0;
  /// Gradient with respect to the pre-softmax logits / scores.
  Tensor grad;
  /// Number of probabilities that hit kLogFloor.
  std::size_t floor_hits = 0;
  /// Set when the mask excluded every pixel (loss is then 0).
  bool all_ignored = false;
};

/// -log p_s[label]; gradient at the logits is p_s - onehot(label).
LossValue scene_loss(const Tensor& probabilities, std::size_t label);

/// Sum over non-ignored pixels of -log p_o[i, j, Y(i, j)]. Ignored pixels
/// contribute exactly zero to the loss and the gradient.
LossValue segmentation_loss(const Tensor& probabilities, const LabelMap& labels,
                            const IgnoreMask& mask);

}  // namespace sscnn
