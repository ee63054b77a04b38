#pragma once

#include <cstdint>
#include <vector>

#include "sscnn/layer.hpp"

namespace sscnn {

struct Extent2 {
  std::size_t h = 1;
  std::size_t w = 1;
  friend bool operator==(const Extent2&, const Extent2&) = default;
};

struct ConvSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  Extent2 kernel{3, 3};
  Extent2 stride{1, 1};
  Extent2 padding{0, 0};

  /// Output spatial size for an input of the given size; throws
  /// InvalidShapeError if the window does not fit.
  Extent2 output_size(Extent2 input) const;
};

struct PoolSpec {
  Extent2 window{2, 2};
  Extent2 stride{2, 2};
  Extent2 padding{0, 0};

  Extent2 output_size(Extent2 input) const;
};

/// Uniform(-s, s) with s = sqrt(6 / (fan_in + fan_out)).
double glorot_scale(std::size_t fan_in, std::size_t fan_out);

class Identity final : public Layer {
 public:
  std::string kind() const override { return "identity"; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor forward(const Tensor& input, Mode) override;
  Tensor backward(const Tensor& grad_output) override;

 private:
  bool has_forward_ = false;
};

/// Cross-correlation over H x W x Cin inputs with weights (kh, kw, Cin, Cout).
class Conv2d final : public Layer {
 public:
  Conv2d(const ConvSpec& spec, std::uint64_t seed);
  Conv2d(const ConvSpec& spec, Tensor weights, Tensor bias);

  std::string kind() const override { return "conv"; }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& input, Mode mode) override;
  Tensor backward(const Tensor& grad_output) override;
  std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }

  const ConvSpec& spec() const { return spec_; }
  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  ConvSpec spec_;
  Parameter weight_;
  Parameter bias_;
  // im2col buffer of the last input: (H'*W') x (kh*kw*Cin), row-major.
  std::vector<double> columns_;
  Shape input_shape_;
  Extent2 out_size_;
  bool has_forward_ = false;
};

class MaxPool2d final : public Layer {
 public:
  explicit MaxPool2d(const PoolSpec& spec) : spec_(spec) {}

  std::string kind() const override { return "maxpool"; }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& input, Mode mode) override;
  Tensor backward(const Tensor& grad_output) override;
  std::uint64_t region_signature() const override;

  const PoolSpec& spec() const { return spec_; }

 private:
  PoolSpec spec_;
  Shape input_shape_;
  // Flat input index chosen for each output element.
  std::vector<std::size_t> argmax_;
  bool has_forward_ = false;
};

class Relu final : public Layer {
 public:
  std::string kind() const override { return "relu"; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor forward(const Tensor& input, Mode mode) override;
  Tensor backward(const Tensor& grad_output) override;
  std::uint64_t region_signature() const override;

 private:
  std::vector<bool> active_;
  Shape shape_;
  bool has_forward_ = false;
};

/// y = W^T x + b with W of shape (in, out); any input shape is flattened.
class FullyConnected final : public Layer {
 public:
  FullyConnected(std::size_t in_features, std::size_t out_features,
                 std::uint64_t seed);
  FullyConnected(Tensor weights, Tensor bias);

  std::string kind() const override { return "fc"; }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& input, Mode mode) override;
  Tensor backward(const Tensor& grad_output) override;
  std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }

  std::size_t in_features() const { return weight_.value.dim(0); }
  std::size_t out_features() const { return weight_.value.dim(1); }
  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  Parameter weight_;
  Parameter bias_;
  Tensor input_;
  bool has_forward_ = false;
};

/// Inverted dropout. The mask is a pure function of (seed, step, index) so a
/// given step always reproduces the same mask.
class Dropout final : public Layer {
 public:
  Dropout(double rate, std::uint64_t seed);

  std::string kind() const override { return "dropout"; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor forward(const Tensor& input, Mode mode) override;
  Tensor backward(const Tensor& grad_output) override;
  void set_stochastic_step(std::uint64_t step) override { step_ = step; }

  double rate() const { return rate_; }

 private:
  double rate_;
  std::uint64_t seed_;
  std::uint64_t step_ = 0;
  std::vector<double> scale_;
  bool has_forward_ = false;
};

// Functional forms, convenient for one-off evaluation.
Tensor conv2d(const Tensor& input, const ConvSpec& spec, const Tensor& weights,
              const Tensor& bias);
Tensor maxpool2d(const Tensor& input, const PoolSpec& spec);
Tensor relu(const Tensor& input);
Tensor fully_connected(const Tensor& input, const Tensor& weights,
                       const Tensor& bias);
Tensor dropout(const Tensor& input, double rate, Mode mode, std::uint64_t seed);

}  // namespace sscnn
