#include "sscnn/metrics.hpp"

#include <sstream>

#include "sscnn/error.hpp"

namespace sscnn {

ConfusionMatrix::ConfusionMatrix(std::size_t classes)
    : k_(classes), counts_(classes * classes, 0) {}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted,
                          std::uint64_t count) {
  if (truth >= k_ || predicted >= k_) {
    throw InvalidArgumentError("confusion matrix index out of range (" +
                               std::to_string(truth) + ", " +
                               std::to_string(predicted) + ") for " +
                               std::to_string(k_) + " classes");
  }
  counts_[truth * k_ + predicted] += count;
}

std::uint64_t ConfusionMatrix::row_total(std::size_t truth) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < k_; ++p) s += at(truth, p);
  return s;
}

std::uint64_t ConfusionMatrix::correct() const {
  std::uint64_t s = 0;
  for (std::size_t c = 0; c < k_; ++c) s += at(c, c);
  return s;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t s = 0;
  for (auto v : counts_) s += v;
  return s;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.k_ != k_) {
    throw InvalidArgumentError("cannot merge confusion matrices of different size");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

ClassAccuracy mean_class_accuracy(const ConfusionMatrix& confusion) {
  if (confusion.total() == 0) {
    throw EmptyEvaluationError("evaluation set is empty");
  }
  ClassAccuracy r;
  r.confusion = confusion;
  r.per_class.resize(confusion.classes());
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < confusion.classes(); ++c) {
    const std::uint64_t n = confusion.row_total(c);
    if (n == 0) {
      r.warnings.push_back("class " + std::to_string(c) +
                           " has no ground-truth items; excluded from the mean");
      continue;
    }
    const double acc = static_cast<double>(confusion.at(c, c)) / static_cast<double>(n);
    r.per_class[c] = acc;
    sum += acc;
    ++present;
  }
  r.mean = sum / static_cast<double>(present);
  r.overall = static_cast<double>(confusion.correct()) /
              static_cast<double>(confusion.total());
  return r;
}

ClassAccuracy scene_mean_class_accuracy(std::span<const std::size_t> predictions,
                                        std::span<const std::size_t> labels,
                                        std::size_t num_classes) {
  if (predictions.size() != labels.size()) {
    throw InvalidArgumentError("prediction and label counts differ");
  }
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) cm.add(labels[i], predictions[i]);
  return mean_class_accuracy(cm);
}

void accumulate_pixels(ConfusionMatrix& confusion, const LabelMap& predicted,
                       const LabelMap& truth, const IgnoreMask& mask) {
  if (predicted.height != truth.height || predicted.width != truth.width ||
      mask.height != truth.height || mask.width != truth.width) {
    throw InvalidShapeError("predicted map, label map and mask must share a shape");
  }
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (mask[i]) continue;
    confusion.add(truth.labels[i], predicted.labels[i]);
  }
}

ClassAccuracy pixel_mean_class_accuracy(std::span<const LabelMap> predicted,
                                        std::span<const LabelMap> truth,
                                        std::span<const IgnoreMask> masks,
                                        std::size_t num_classes) {
  if (predicted.size() != truth.size() || masks.size() != truth.size()) {
    throw InvalidArgumentError("predicted, truth and mask counts differ");
  }
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    accumulate_pixels(cm, predicted[i], truth[i], masks[i]);
  }
  return mean_class_accuracy(cm);
}

std::string confusion_to_csv(const ConfusionMatrix& confusion,
                             std::span<const std::string> class_names) {
  if (class_names.size() != confusion.classes()) {
    throw InvalidArgumentError("class name count does not match confusion size");
  }
  std::ostringstream os;
  os << "truth\\predicted";
  for (const auto& n : class_names) os << ',' << n;
  os << '\n';
  for (std::size_t t = 0; t < confusion.classes(); ++t) {
    os << class_names[t];
    for (std::size_t p = 0; p < confusion.classes(); ++p) os << ',' << confusion.at(t, p);
    os << '\n';
  }
  return os.str();
}

}  // namespace sscnn
