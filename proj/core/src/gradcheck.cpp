#include "sscnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "sscnn/error.hpp"
#include "sscnn/random.hpp"

namespace sscnn {

double relative_error(double analytic, double numeric) {
  const double denom =
      std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

std::size_t GradCheckReport::checked() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.checked;
  return n;
}

std::size_t GradCheckReport::skipped_kinks() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.skipped_kinks;
  return n;
}

GradCheckReport check_gradients(const std::function<double()>& objective,
                                std::span<const GradTarget> targets,
                                double epsilon, double tolerance,
                                const std::function<std::uint64_t()>& region) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
    throw InvalidArgumentError("gradient check epsilon must be in [1e-7, 1e-3]");
  }
  if (!(tolerance > 0.0)) {
    throw InvalidArgumentError("gradient check tolerance must be positive");
  }
  for (const auto& t : targets) {
    if (t.values.size() != t.analytic.size()) {
      throw InvalidShapeError("gradient target '" + t.name +
                              "' has mismatched value/gradient sizes");
    }
    for (double g : t.analytic) {
      if (!std::isfinite(g)) {
        throw GradientNanError("non-finite analytic gradient in '" + t.name + "'");
      }
    }
  }

  std::uint64_t base_region = 0;
  if (region) {
    objective();
    base_region = region();
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  for (const auto& t : targets) {
    GradCheckEntry entry;
    entry.name = t.name;
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      const double saved = t.values[i];
      t.values[i] = saved + epsilon;
      const double plus = objective();
      const bool plus_same = !region || region() == base_region;
      t.values[i] = saved - epsilon;
      const double minus = objective();
      const bool minus_same = !region || region() == base_region;
      t.values[i] = saved;
      if (!plus_same || !minus_same) {
        ++entry.skipped_kinks;
        continue;
      }
      const double numeric = (plus - minus) / (2.0 * epsilon);
      entry.max_relative_error =
          std::max(entry.max_relative_error, relative_error(t.analytic[i], numeric));
      ++entry.checked;
    }
    report.max_relative_error =
        std::max(report.max_relative_error, entry.max_relative_error);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

GradCheckReport finite_difference_check(Layer& layer, const Tensor& input,
                                        double epsilon, double tolerance,
                                        Mode mode, std::uint64_t seed) {
  const Shape out_shape = layer.output_shape(input.shape());
  const Tensor projection(out_shape, RandomFill{1.0, seed});

  for (Parameter* p : layer.parameters()) p->zero_grad();
  layer.forward(input, mode);
  const Tensor input_grad = layer.backward(projection);

  Tensor x = input;
  std::vector<std::pair<std::string, Tensor>> param_grads;
  for (Parameter* p : layer.parameters()) param_grads.emplace_back(p->name, p->grad);

  std::vector<GradTarget> targets;
  targets.push_back({"input", x.data(), input_grad.data()});
  auto params = layer.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    targets.push_back({param_grads[i].first, params[i]->value.data(),
                       param_grads[i].second.data()});
  }

  auto objective = [&]() {
    const Tensor y = layer.forward(x, mode);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += projection[i] * y[i];
    return s;
  };
  auto region = [&]() { return layer.region_signature(); };
  return check_gradients(objective, targets, epsilon, tolerance, region);
}

}  // namespace sscnn
