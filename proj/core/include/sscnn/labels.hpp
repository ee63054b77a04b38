#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sscnn/tensor.hpp"

namespace sscnn {

/// Pixel label value meaning "excluded from loss and metrics".
inline constexpr std::uint16_t kIgnoreLabel = 255;

/// H x W map of object-class indices.
struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint16_t> labels;

  LabelMap() = default;
  LabelMap(std::size_t h, std::size_t w, std::uint16_t fill = 0)
      : height(h), width(w), labels(h * w, fill) {}

  std::uint16_t& at(std::size_t y, std::size_t x) { return labels[y * width + x]; }
  std::uint16_t at(std::size_t y, std::size_t x) const {
    return labels[y * width + x];
  }
  std::size_t size() const { return labels.size(); }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

/// true = pixel excluded.
struct IgnoreMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> ignored;

  IgnoreMask() = default;
  IgnoreMask(std::size_t h, std::size_t w, bool fill = false)
      : height(h), width(w), ignored(h * w, fill ? 1 : 0) {}

  bool operator[](std::size_t i) const { return ignored[i] != 0; }
  std::size_t size() const { return ignored.size(); }
};

/// Marks every pixel carrying kIgnoreLabel.
IgnoreMask ignore_mask_from_labels(const LabelMap& labels);

/// Index of the largest value; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> values);

/// Per-pixel argmax over the last axis of an H x W x M tensor.
LabelMap argmax_labels(const Tensor& scores);

/// Labels stored as an H x W tensor of integer values.
Tensor labels_to_tensor(const LabelMap& labels);
/// Throws DataError if any value is not a non-negative integer < 65536.
LabelMap labels_from_tensor(const Tensor& t);

}  // namespace sscnn
