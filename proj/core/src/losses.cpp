#include "sscnn/losses.hpp"

#include <algorithm>
#include <cmath>

#include "sscnn/error.hpp"

namespace sscnn {

namespace {

// In-place softmax of n contiguous values.
void softmax_inplace(double* v, std::size_t n) {
  const double m = *std::max_element(v, v + n);
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    v[k] = std::exp(v[k] - m);
    sum += v[k];
  }
  for (std::size_t k = 0; k < n; ++k) v[k] /= sum;
}

double floored_neg_log(double p, std::size_t& floor_hits) {
  if (p < kLogFloor) {
    ++floor_hits;
    p = kLogFloor;
  }
  return -std::log(p);
}

}  // namespace

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 1) {
    throw InvalidShapeError("softmax expects a vector, got " +
                            shape_to_string(logits.shape()));
  }
  Tensor p = logits;
  softmax_inplace(p.raw(), p.size());
  return p;
}

Tensor scene_softmax(const Tensor& features, const Tensor& theta) {
  if (theta.rank() != 2 || theta.dim(0) != features.size()) {
    throw InvalidShapeError("scene_softmax: theta " +
                            shape_to_string(theta.shape()) +
                            " incompatible with features of length " +
                            std::to_string(features.size()));
  }
  const std::size_t f = theta.dim(0), m = theta.dim(1);
  Tensor logits({m});
  for (std::size_t i = 0; i < f; ++i) {
    const double fi = features[i];
    for (std::size_t k = 0; k < m; ++k) logits[k] += fi * theta[i * m + k];
  }
  return softmax(logits);
}

Tensor pixel_softmax(const Tensor& scores) {
  if (scores.rank() != 3) {
    throw InvalidShapeError("pixel_softmax expects H x W x M scores, got " +
                            shape_to_string(scores.shape()));
  }
  Tensor p = scores;
  const std::size_t m = p.dim(2);
  for (std::size_t px = 0; px < p.size() / m; ++px) {
    softmax_inplace(p.raw() + px * m, m);
  }
  return p;
}

LossValue scene_loss(const Tensor& probabilities, std::size_t label) {
  if (probabilities.rank() != 1) {
    throw InvalidShapeError("scene_loss expects a probability vector");
  }
  if (label >= probabilities.size()) {
    throw InvalidArgumentError("scene label " + std::to_string(label) +
                               " out of range for " +
                               std::to_string(probabilities.size()) + " classes");
  }
  LossValue out;
  out.loss = floored_neg_log(probabilities[label], out.floor_hits);
  out.grad = probabilities;
  out.grad[label] -= 1.0;
  return out;
}

LossValue segmentation_loss(const Tensor& probabilities, const LabelMap& labels,
                            const IgnoreMask& mask) {
  if (probabilities.rank() != 3 || probabilities.dim(0) != labels.height ||
      probabilities.dim(1) != labels.width) {
    throw InvalidShapeError("segmentation_loss: probabilities " +
                            shape_to_string(probabilities.shape()) +
                            " do not match label map " +
                            std::to_string(labels.height) + "x" +
                            std::to_string(labels.width));
  }
  if (mask.height != labels.height || mask.width != labels.width) {
    throw InvalidShapeError("segmentation_loss: ignore mask shape mismatch");
  }
  const std::size_t m = probabilities.dim(2);
  LossValue out;
  out.grad = Tensor(probabilities.shape());
  std::size_t used = 0;
  for (std::size_t px = 0; px < labels.size(); ++px) {
    if (mask[px]) continue;
    const std::size_t y = labels.labels[px];
    if (y >= m) {
      throw InvalidArgumentError("pixel label " + std::to_string(y) +
                                 " out of range for " + std::to_string(m) +
                                 " object classes");
    }
    const double* p = probabilities.raw() + px * m;
    out.loss += floored_neg_log(p[y], out.floor_hits);
    double* g = out.grad.raw() + px * m;
    std::copy(p, p + m, g);
    g[y] -= 1.0;
    ++used;
  }
  out.all_ignored = used == 0;
  return out;
}

IgnoreMask ignore_mask_from_labels(const LabelMap& labels) {
  IgnoreMask mask(labels.height, labels.width);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    mask.ignored[i] = labels.labels[i] == kIgnoreLabel ? 1 : 0;
  }
  return mask;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw InvalidArgumentError("argmax of an empty range");
  return static_cast<std::size_t>(
      std::max_element(values.begin(), values.end()) - values.begin());
}

LabelMap argmax_labels(const Tensor& scores) {
  if (scores.rank() != 3) {
    throw InvalidShapeError("argmax_labels expects H x W x M, got " +
                            shape_to_string(scores.shape()));
  }
  const std::size_t m = scores.dim(2);
  LabelMap out(scores.dim(0), scores.dim(1));
  for (std::size_t px = 0; px < out.size(); ++px) {
    out.labels[px] = static_cast<std::uint16_t>(
        argmax(scores.data().subspan(px * m, m)));
  }
  return out;
}

Tensor labels_to_tensor(const LabelMap& labels) {
  Tensor t({labels.height, labels.width});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    t[i] = static_cast<double>(labels.labels[i]);
  }
  return t;
}

LabelMap labels_from_tensor(const Tensor& t) {
  if (t.rank() != 2) {
    throw DataError("label tensor must be H x W, got " +
                    shape_to_string(t.shape()));
  }
  LabelMap labels(t.dim(0), t.dim(1));
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double v = t[i];
    if (!(v >= 0.0 && v < 65536.0) || std::floor(v) != v) {
      throw DataError("label tensor holds a non-integer or out-of-range value");
    }
    labels.labels[i] = static_cast<std::uint16_t>(v);
  }
  return labels;
}

}  // namespace sscnn
