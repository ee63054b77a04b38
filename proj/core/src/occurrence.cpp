#include "sscnn/occurrence.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "sscnn/error.hpp"

namespace sscnn {

std::vector<double> encode_occurrence(const LabelMap& labels, const IgnoreMask& mask,
                                      std::size_t num_objects) {
  std::vector<double> v(num_objects, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (mask[i]) continue;
    const std::uint16_t l = labels.labels[i];
    if (l >= num_objects) {
      throw InvalidArgumentError("object label " + std::to_string(l) + " out of range");
    }
    v[l] = 1.0;
  }
  return v;
}

double svm_objective(std::span<const std::vector<double>> xs,
                     std::span<const double> y, std::span<const double> w, double b,
                     double c) {
  double reg = 0.0;
  for (double v : w) reg += v * v;
  double hinge = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double s = b;
    for (std::size_t d = 0; d < w.size(); ++d) s += w[d] * xs[i][d];
    hinge += std::max(0.0, 1.0 - y[i] * s);
  }
  return 0.5 * reg + c * hinge / static_cast<double>(xs.size());
}

std::vector<double> LinearSvm::decision_values(std::span<const double> x) const {
  if (x.size() != features) {
    throw InvalidShapeError("feature vector has length " + std::to_string(x.size()) +
                            ", expected " + std::to_string(features));
  }
  std::vector<double> out(classes);
  for (std::size_t k = 0; k < classes; ++k) {
    double s = bias[k];
    for (std::size_t d = 0; d < features; ++d) s += weights[k * features + d] * x[d];
    out[k] = s;
  }
  return out;
}

std::size_t LinearSvm::predict(std::span<const double> x) const {
  const std::vector<double> v = decision_values(x);
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k] > v[best]) best = k;
  }
  return best;
}

LinearSvm train_linear_svm(std::span<const std::vector<double>> xs,
                           std::span<const std::size_t> labels, std::size_t num_classes,
                           const SvmConfig& config) {
  if (xs.size() != labels.size()) {
    throw InvalidArgumentError("vector and label counts differ");
  }
  if (!(config.c > 0.0) || !(config.step > 0.0)) {
    throw InvalidArgumentError("SVM C and step must be positive");
  }
  std::vector<bool> present(num_classes, false);
  for (std::size_t l : labels) {
    if (l >= num_classes) throw InvalidArgumentError("label out of range");
    present[l] = true;
  }
  if (std::count(present.begin(), present.end(), true) < 2) {
    throw InvalidArgumentError("linear SVM needs at least two classes");
  }
  const std::size_t dim = xs.front().size();
  for (const auto& x : xs) {
    if (x.size() != dim) throw InvalidShapeError("feature vectors differ in length");
  }
  const double n = static_cast<double>(xs.size());

  LinearSvm svm;
  svm.classes = num_classes;
  svm.features = dim;
  svm.weights.assign(num_classes * dim, 0.0);
  svm.bias.assign(num_classes, 0.0);
  svm.objective_history.resize(num_classes);

  std::vector<double> y(xs.size());
  std::vector<double> w(dim), gw(dim);
  for (std::size_t k = 0; k < num_classes; ++k) {
    for (std::size_t i = 0; i < xs.size(); ++i) y[i] = labels[i] == k ? 1.0 : -1.0;
    std::fill(w.begin(), w.end(), 0.0);
    double b = 0.0;
    std::vector<double> best_w = w;
    double best_b = b;
    double best = svm_objective(xs, y, w, b, config.c);
    auto& history = svm.objective_history[k];
    history.push_back(best);
    for (std::size_t t = 0; t < config.iterations; ++t) {
      gw = w;
      double gb = 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        double s = b;
        for (std::size_t d = 0; d < dim; ++d) s += w[d] * xs[i][d];
        if (y[i] * s < 1.0) {
          const double g = config.c * y[i] / n;
          for (std::size_t d = 0; d < dim; ++d) gw[d] -= g * xs[i][d];
          gb -= g;
        }
      }
      const double eta = config.step / std::sqrt(static_cast<double>(t + 1));
      for (std::size_t d = 0; d < dim; ++d) w[d] -= eta * gw[d];
      b -= eta * gb;
      const double obj = svm_objective(xs, y, w, b, config.c);
      history.push_back(obj);
      if (obj < best) {
        best = obj;
        best_w = w;
        best_b = b;
      }
    }
    std::copy(best_w.begin(), best_w.end(), svm.weights.begin() + k * dim);
    svm.bias[k] = best_b;
  }
  return svm;
}

std::string svm_to_json(const LinearSvm& svm) {
  nlohmann::json j;
  j["format"] = "sscnn-occurrence-svm";
  j["classes"] = svm.classes;
  j["features"] = svm.features;
  j["weights"] = svm.weights;
  j["bias"] = svm.bias;
  return j.dump(2) + "\n";
}

LinearSvm svm_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.value("format", "") != "sscnn-occurrence-svm") {
      throw DataError("not an occurrence SVM model");
    }
    LinearSvm svm;
    svm.classes = j.at("classes").get<std::size_t>();
    svm.features = j.at("features").get<std::size_t>();
    svm.weights = j.at("weights").get<std::vector<double>>();
    svm.bias = j.at("bias").get<std::vector<double>>();
    if (svm.weights.size() != svm.classes * svm.features ||
        svm.bias.size() != svm.classes) {
      throw DataError("occurrence SVM model has inconsistent sizes");
    }
    return svm;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed occurrence SVM model: ") + e.what());
  }
}

}  // namespace sscnn
