#include "sscnn/model_gradcheck.hpp"

#include <algorithm>

#include "sscnn/random.hpp"

namespace sscnn {

double ModelGradCheck::max_relative_error() const {
  double m = end_to_end.max_relative_error;
  for (const auto& l : layers) m = std::max(m, l.report.max_relative_error);
  return m;
}

bool ModelGradCheck::passed() const {
  return end_to_end.passed() &&
         std::all_of(layers.begin(), layers.end(),
                     [](const LayerGradCheck& l) { return l.report.passed(); });
}

ModelGradCheck check_model_gradients(const NetworkConfig& config, std::uint64_t seed,
                                     double epsilon, double tolerance) {
  SSCNNModel model = SSCNNModel::build(config, seed);
  ModelGradCheck out;

  const auto layers = model.layers();
  const std::vector<Shape> shapes = model.layer_input_shapes();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Tensor input(shapes[i], RandomFill{1.0, hash_combine(seed, 2 * i + 1)});
    layers[i].second->set_stochastic_step(hash_combine(seed, 2 * i + 2));
    out.layers.push_back({layers[i].first,
                          finite_difference_check(*layers[i].second, input, epsilon,
                                                  tolerance, Mode::kTrain,
                                                  hash_combine(seed, i))});
  }

  Tensor x(model.input_shape(), RandomFill{127.0, hash_combine(seed, 101)});
  for (double& v : x.data()) v += 128.0;
  const Extent2 seg = model.seg_output_size();
  LabelMap labels(seg.h, seg.w);
  Rng rng(hash_combine(seed, 103));
  for (auto& l : labels.labels) {
    l = static_cast<std::uint16_t>(rng.index(config.num_objects));
  }
  labels.labels[0] = kIgnoreLabel;
  const IgnoreMask mask = ignore_mask_from_labels(labels);
  const std::size_t scene = rng.index(config.num_scenes);

  model.set_stochastic_step(hash_combine(seed, 107));
  model.zero_grad();
  const ForwardResult r = model.forward(x, scene, labels, mask, Mode::kTrain);
  model.backward(r);
  std::vector<Parameter*> params = model.parameters();
  std::vector<Tensor> grads;
  grads.reserve(params.size());
  for (Parameter* p : params) grads.push_back(p->grad);
  std::vector<GradTarget> targets;
  for (std::size_t i = 0; i < params.size(); ++i) {
    targets.push_back({params[i]->name, params[i]->value.data(), grads[i].data()});
  }
  out.end_to_end = check_gradients(
      [&] { return model.forward(x, scene, labels, mask, Mode::kTrain).l_ss; }, targets,
      epsilon, tolerance, [&] { return model.region_signature(); });
  return out;
}

}  // namespace sscnn
