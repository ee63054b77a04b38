#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sscnn/tensor.hpp"

namespace sscnn {

enum class Mode { kTrain, kEval };

/// Which loss a parameter is tuned against in a branched network.
enum class Branch { kShared, kScene, kSeg };

const char* branch_name(Branch b);

/// A learnable tensor with its gradient accumulator and momentum buffer.
struct Parameter {
  Parameter(std::string name, Tensor value, bool is_bias);

  std::string name;
  Tensor value;
  Tensor grad;
  Tensor velocity;
  bool is_bias = false;
  /// Scales the learning rate; 2 for biases, 1 for weights.
  double lr_multiplier = 1.0;
  Branch owner = Branch::kShared;

  void zero_grad() { grad.fill(0.0); }
};

/// Forward/backward contract for every network building block.
///
/// `forward` caches whatever `backward` needs; `backward` takes the gradient
/// of a scalar objective with respect to the last output, accumulates into
/// parameter gradients (+=) and returns the gradient with respect to the
/// last input. Calling `backward` without a preceding `forward` throws
/// ContractViolationError.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string kind() const = 0;
  virtual Shape output_shape(const Shape& input) const = 0;
  virtual Tensor forward(const Tensor& input, Mode mode) = 0;
  virtual Tensor backward(const Tensor& grad_output) = 0;
  virtual std::vector<Parameter*> parameters() { return {}; }

  /// Fingerprint of the piecewise-linear region selected by the last forward
  /// (ReLU sign pattern, pooling argmax). Zero for smooth layers.
  virtual std::uint64_t region_signature() const { return 0; }

  /// Dropout-style layers derive their masks from (seed, step).
  virtual void set_stochastic_step(std::uint64_t /*step*/) {}

  const std::string& name() const { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }

 private:
  std::string name_;
};

using LayerPtr = std::unique_ptr<Layer>;

/// A chain of layers evaluated in order.
class Sequential {
 public:
  Sequential() = default;
  Sequential(Sequential&&) = default;
  Sequential& operator=(Sequential&&) = default;

  void add(LayerPtr layer) { layers_.push_back(std::move(layer)); }
  bool empty() const { return layers_.empty(); }
  std::size_t size() const { return layers_.size(); }
  Layer& operator[](std::size_t i) { return *layers_[i]; }
  const Layer& operator[](std::size_t i) const { return *layers_[i]; }

  Shape output_shape(Shape input) const;
  Tensor forward(const Tensor& input, Mode mode);
  Tensor backward(const Tensor& grad_output);
  std::vector<Parameter*> parameters();
  std::uint64_t region_signature() const;
  void set_stochastic_step(std::uint64_t step);

 private:
  std::vector<LayerPtr> layers_;
};

}  // namespace sscnn
