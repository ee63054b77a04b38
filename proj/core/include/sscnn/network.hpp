#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sscnn/labels.hpp"
#include "sscnn/layer.hpp"
#include "sscnn/layers.hpp"
#include "sscnn/sample.hpp"

namespace sscnn {

enum class LayerKind { kConv, kFullyConnected };

/// One parameterized layer together with the ReLU / pooling / dropout that
/// follow it. Only parameterized layers count towards the trunk depth.
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::kConv;
  std::size_t out = 1;  // channels (conv) or features (fc)
  Extent2 kernel{1, 1};
  Extent2 stride{1, 1};
  Extent2 padding{0, 0};
  bool relu = true;
  std::optional<PoolSpec> pool;
  double dropout = 0.0;
};

/// Architecture of an SS-CNN-Rn network.
///
/// The first `branch_point` trunk layers are shared between the scene branch
/// and the segmentation branch. Trunk fully-connected layers that fall inside
/// the shared prefix are cast to 1x1 convolutions. The segmentation branch
/// holds its own fully convolutional copies of the unshared trunk layers
/// (all but a final scene classifier) followed by `seg_head`, so n = 0 gives
/// two independent networks. When every trunk layer is shared, `scene_extra`
/// supplies the scene classifier.
struct NetworkConfig {
  std::string preset = "custom";
  std::size_t input_height = 32;
  std::size_t input_width = 32;
  std::size_t input_channels = 3;
  /// Fixed input normalization x' = (x - input_offset) * input_scale.
  double input_offset = 127.5;
  double input_scale = 1.0 / 127.5;

  std::vector<LayerSpec> trunk;
  std::vector<LayerSpec> scene_head;
  std::vector<LayerSpec> scene_extra;
  std::vector<LayerSpec> seg_head;
  /// The segmentation branch max-pools down to this stride when its layers
  /// leave it finer.
  std::size_t seg_output_stride = 4;

  std::size_t branch_point = 0;
  double alpha = 1e-3;
  std::size_t num_scenes = 2;
  std::size_t num_objects = 2;

  std::size_t layer_count() const { return trunk.size(); }
};

/// Throws InvalidConfigError describing the first violated constraint.
void validate_config(const NetworkConfig& config);

std::string config_to_json(const NetworkConfig& config);
NetworkConfig config_from_json(const std::string& text);

struct PresetOptions {
  std::size_t num_scenes = 4;
  std::size_t num_objects = 8;
  std::size_t input_channels = 3;
  std::size_t branch_point = 0;
  double alpha = 0.01;
  std::size_t input_size = 32;  // tiny preset only: square input side
};

/// Four 3x3 conv layers (8, 16, 16, 32 channels; 2x2 pools after the first
/// two), a 64-wide fc + M_s classifier, and a 1x1 conv segmentation head at
/// output stride 4.
NetworkConfig tiny_preset(const PresetOptions& options);

/// Alexnet-shaped trunk (5 conv + fc6, fc7 = 512, fc8) on 210x158 inputs,
/// modified to stride 16 and an 81x81 receptive field at conv5.
NetworkConfig alexnet_preset(const PresetOptions& options);

struct SegmentationGeometry {
  std::size_t output_stride = 1;
  std::size_t receptive_field = 1;  // square inputs only use the height axis
  Extent2 receptive_field_2d{1, 1};
  Extent2 output_size{1, 1};
};

/// Stride, receptive field and output size of the segmentation branch.
SegmentationGeometry segmentation_geometry(const NetworkConfig& config);

struct ForwardResult {
  Tensor p_s;  // M_s
  Tensor p_o;  // H' x W' x M_o
  double l_scene = 0.0;
  double l_object = 0.0;
  double l_ss = 0.0;
  double alpha = 0.0;
  Tensor scene_logit_grad;  // dL_scene / d logits
  Tensor seg_score_grad;    // dL_object / d scores
  std::size_t floor_hits = 0;
  bool all_pixels_ignored = false;
};

/// L_ss = L_scene + alpha L_object.
inline double compose_ss_loss(double l_scene, double l_object, double alpha) {
  return l_scene + alpha * l_object;
}

/// Multipliers on the upstream gradients of L_scene and L_object.
/// SSCNNModel::backward(result) uses {1, alpha}, i.e. dL_ss.
struct LossWeights {
  double scene = 1.0;
  double object = 1.0;
};

struct Prediction {
  Tensor p_s;
  Tensor p_o;
};

class SSCNNModel {
 public:
  /// Deterministic in `seed`. Each layer's initialization depends only on
  /// (seed, layer name), so the same seed yields the same trunk weights for
  /// every branch point.
  static SSCNNModel build(const NetworkConfig& config, std::uint64_t seed);

  SSCNNModel(SSCNNModel&&) = default;
  SSCNNModel& operator=(SSCNNModel&&) = default;

  const NetworkConfig& config() const { return config_; }
  Shape input_shape() const;
  Extent2 seg_output_size() const { return seg_size_; }

  ForwardResult forward(const SampleRecord& sample, Mode mode);
  ForwardResult forward(const Tensor& x, std::size_t scene_label,
                        const LabelMap& labels, const IgnoreMask& mask,
                        Mode mode);
  Prediction predict(const Tensor& x);

  /// Accumulates parameter gradients for the last train-mode forward.
  void backward(const ForwardResult& result);
  void backward(const ForwardResult& result, const LossWeights& weights);
  /// Like backward, returning the gradient with respect to the raw input.
  Tensor backward_to_input(const ForwardResult& result,
                           const LossWeights& weights);

  std::vector<Parameter*> parameters();
  std::vector<Parameter*> parameters(Branch owner);
  void zero_grad();
  void set_stochastic_step(std::uint64_t step);
  std::uint64_t region_signature() const;

  /// Named views of the primitive layers, for per-layer diagnostics.
  std::vector<std::pair<std::string, Layer*>> layers();
  /// Input shape of each entry of layers(), in the same order.
  std::vector<Shape> layer_input_shapes() const;

 private:
  SSCNNModel() = default;
  Tensor normalize(const Tensor& x) const;

  NetworkConfig config_;
  Sequential shared_;
  Sequential scene_;
  Sequential seg_;
  Extent2 seg_size_;
  bool has_train_forward_ = false;
};

}  // namespace sscnn
