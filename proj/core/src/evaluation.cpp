#include "sscnn/evaluation.hpp"

#include "sscnn/error.hpp"
#include "sscnn/refinement.hpp"

namespace sscnn {

EvalResult evaluate(SSCNNModel& model, std::span<const SampleRecord> samples,
                    bool keep_predictions) {
  if (samples.empty()) throw EmptyEvaluationError("evaluation set is empty");
  const NetworkConfig& c = model.config();
  ConfusionMatrix scene_cm(c.num_scenes), pixel_cm(c.num_objects);
  EvalResult r;
  for (const auto& s : samples) {
    Prediction p = model.predict(s.x);
    scene_cm.add(s.scene, argmax(p.p_s.data()));
    accumulate_pixels(pixel_cm, argmax_labels(p.p_o), s.labels, s.mask);
    if (keep_predictions) r.predictions.push_back(std::move(p));
  }
  r.scene = mean_class_accuracy(scene_cm);
  if (pixel_cm.total() > 0) r.pixel = mean_class_accuracy(pixel_cm);
  return r;
}

RefinementEval evaluate_refinement(std::span<const Prediction> predictions,
                                   std::span<const SampleRecord> samples,
                                   const Tensor& w_so, std::size_t num_objects) {
  if (predictions.size() != samples.size()) {
    throw InvalidArgumentError("prediction and sample counts differ");
  }
  ConfusionMatrix before(num_objects), after(num_objects);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Prediction& p = predictions[i];
    accumulate_pixels(before, argmax_labels(p.p_o), samples[i].labels, samples[i].mask);
    accumulate_pixels(after, argmax_labels(apply_refinement(p.p_s, w_so, p.p_o)),
                      samples[i].labels, samples[i].mask);
  }
  return {mean_class_accuracy(before), mean_class_accuracy(after)};
}

}  // namespace sscnn
