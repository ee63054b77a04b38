#pragma once

#include <cstddef>
#include <string>

#include "sscnn/labels.hpp"
#include "sscnn/tensor.hpp"

namespace sscnn {

/// One training example: an H x W x C input stack with channel values in
/// [0, 255], its scene label, and an object-label map with ignore mask.
///
/// `labels` sits at the segmentation head's output geometry; training and
/// pixel metrics both use that resolution.
struct SampleRecord {
  std::string id;
  Tensor x;
  std::size_t scene = 0;
  LabelMap labels;
  IgnoreMask mask;
};

}  // namespace sscnn
