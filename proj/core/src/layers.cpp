#include "sscnn/layers.hpp"

#include <Eigen/Core>
#include <cmath>
#include <limits>

#include "sscnn/error.hpp"
#include "sscnn/random.hpp"

namespace sscnn {

namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

void require_forward(bool has_forward, const std::string& kind) {
  if (!has_forward) {
    throw ContractViolationError(kind + ": backward called before forward");
  }
}

void require_rank3(const Shape& s, const std::string& kind) {
  if (s.size() != 3) {
    throw InvalidShapeError(kind + " expects an H x W x C input, got " +
                            shape_to_string(s));
  }
}

std::size_t window_output(std::size_t in, std::size_t window,
                          std::size_t stride, std::size_t pad,
                          const char* what) {
  if (window == 0 || stride == 0) {
    throw InvalidShapeError(std::string(what) + ": window and stride must be >= 1");
  }
  if (in + 2 * pad < window) {
    throw InvalidShapeError(std::string(what) + ": window " +
                            std::to_string(window) + " larger than padded input " +
                            std::to_string(in + 2 * pad));
  }
  return (in + 2 * pad - window) / stride + 1;
}

std::uint64_t hash_bits(const std::vector<bool>& bits) {
  std::uint64_t h = 0x5353434e4eULL;
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    word = (word << 1) | static_cast<std::uint64_t>(bits[i]);
    if (i % 64 == 63) {
      h = hash_combine(h, word);
      word = 0;
    }
  }
  return hash_combine(h, word ^ bits.size());
}

}  // namespace

const char* branch_name(Branch b) {
  switch (b) {
    case Branch::kShared: return "shared";
    case Branch::kScene: return "scene";
    case Branch::kSeg: return "seg";
  }
  return "?";
}

Parameter::Parameter(std::string name_, Tensor value_, bool is_bias_)
    : name(std::move(name_)),
      value(std::move(value_)),
      grad(value.shape()),
      velocity(value.shape()),
      is_bias(is_bias_),
      lr_multiplier(is_bias_ ? 2.0 : 1.0) {}

Shape Sequential::output_shape(Shape input) const {
  for (const auto& l : layers_) input = l->output_shape(input);
  return input;
}

Tensor Sequential::forward(const Tensor& input, Mode mode) {
  if (layers_.empty()) return input;
  Tensor h = layers_.front()->forward(input, mode);
  for (std::size_t i = 1; i < layers_.size(); ++i) {
    h = layers_[i]->forward(h, mode);
  }
  return h;
}

Tensor Sequential::backward(const Tensor& grad_output) {
  if (layers_.empty()) return grad_output;
  Tensor g = layers_.back()->backward(grad_output);
  for (std::size_t i = layers_.size() - 1; i-- > 0;) {
    g = layers_[i]->backward(g);
  }
  return g;
}

std::vector<Parameter*> Sequential::parameters() {
  std::vector<Parameter*> out;
  for (auto& l : layers_) {
    for (Parameter* p : l->parameters()) out.push_back(p);
  }
  return out;
}

std::uint64_t Sequential::region_signature() const {
  std::uint64_t h = 0;
  for (const auto& l : layers_) h = hash_combine(h, l->region_signature());
  return h;
}

void Sequential::set_stochastic_step(std::uint64_t step) {
  for (auto& l : layers_) l->set_stochastic_step(step);
}

Extent2 ConvSpec::output_size(Extent2 input) const {
  return {window_output(input.h, kernel.h, stride.h, padding.h, "conv"),
          window_output(input.w, kernel.w, stride.w, padding.w, "conv")};
}

Extent2 PoolSpec::output_size(Extent2 input) const {
  if (padding.h >= window.h || padding.w >= window.w) {
    throw InvalidShapeError("maxpool: padding must be smaller than the window");
  }
  return {window_output(input.h, window.h, stride.h, padding.h, "maxpool"),
          window_output(input.w, window.w, stride.w, padding.w, "maxpool")};
}

double glorot_scale(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

// ---------------------------------------------------------------- Identity

Tensor Identity::forward(const Tensor& input, Mode) {
  has_forward_ = true;
  return input;
}

Tensor Identity::backward(const Tensor& grad_output) {
  require_forward(has_forward_, kind());
  return grad_output;
}

// ------------------------------------------------------------------ Conv2d

namespace {

Tensor conv_weight_init(const ConvSpec& s, std::uint64_t seed) {
  const std::size_t area = s.kernel.h * s.kernel.w;
  return Tensor({s.kernel.h, s.kernel.w, s.in_channels, s.out_channels},
                RandomFill{glorot_scale(area * s.in_channels,
                                        area * s.out_channels),
                           seed});
}

}  // namespace

Conv2d::Conv2d(const ConvSpec& spec, std::uint64_t seed)
    : Conv2d(spec, conv_weight_init(spec, seed), Tensor({spec.out_channels})) {}

Conv2d::Conv2d(const ConvSpec& spec, Tensor weights, Tensor bias)
    : spec_(spec),
      weight_("weight", std::move(weights), false),
      bias_("bias", std::move(bias), true) {
  if (spec_.in_channels == 0 || spec_.out_channels == 0) {
    throw InvalidShapeError("conv: channel counts must be >= 1");
  }
  const Shape expected_w{spec_.kernel.h, spec_.kernel.w, spec_.in_channels,
                         spec_.out_channels};
  if (weight_.value.shape() != expected_w) {
    throw InvalidShapeError("conv: weight shape " +
                            shape_to_string(weight_.value.shape()) +
                            " does not match " + shape_to_string(expected_w));
  }
  if (bias_.value.shape() != Shape{spec_.out_channels}) {
    throw InvalidShapeError("conv: bias shape " +
                            shape_to_string(bias_.value.shape()) +
                            " does not match [" +
                            std::to_string(spec_.out_channels) + "]");
  }
}

Shape Conv2d::output_shape(const Shape& input) const {
  require_rank3(input, "conv");
  if (input[2] != spec_.in_channels) {
    throw InvalidShapeError("conv: expected " + std::to_string(spec_.in_channels) +
                            " input channels, got " + std::to_string(input[2]));
  }
  const Extent2 out = spec_.output_size({input[0], input[1]});
  return {out.h, out.w, spec_.out_channels};
}

Tensor Conv2d::forward(const Tensor& input, Mode) {
  const Shape out_shape = output_shape(input.shape());
  const std::size_t in_h = input.dim(0), in_w = input.dim(1);
  const std::size_t cin = spec_.in_channels;
  out_size_ = {out_shape[0], out_shape[1]};
  input_shape_ = input.shape();

  const std::size_t rows = out_size_.h * out_size_.w;
  const std::size_t cols = spec_.kernel.h * spec_.kernel.w * cin;
  columns_.assign(rows * cols, 0.0);
  const double* src = input.raw();
  for (std::size_t oy = 0; oy < out_size_.h; ++oy) {
    for (std::size_t ox = 0; ox < out_size_.w; ++ox) {
      double* row = columns_.data() + (oy * out_size_.w + ox) * cols;
      for (std::size_t ky = 0; ky < spec_.kernel.h; ++ky) {
        const long iy = static_cast<long>(oy * spec_.stride.h + ky) -
                        static_cast<long>(spec_.padding.h);
        if (iy < 0 || iy >= static_cast<long>(in_h)) continue;
        for (std::size_t kx = 0; kx < spec_.kernel.w; ++kx) {
          const long ix = static_cast<long>(ox * spec_.stride.w + kx) -
                          static_cast<long>(spec_.padding.w);
          if (ix < 0 || ix >= static_cast<long>(in_w)) continue;
          const double* px = src + (static_cast<std::size_t>(iy) * in_w +
                                    static_cast<std::size_t>(ix)) * cin;
          double* dst = row + (ky * spec_.kernel.w + kx) * cin;
          for (std::size_t c = 0; c < cin; ++c) dst[c] = px[c];
        }
      }
    }
  }

  Tensor out(out_shape);
  ConstMatrixMap col_mat(columns_.data(), rows, cols);
  ConstMatrixMap w_mat(weight_.value.raw(), cols, spec_.out_channels);
  MatrixMap out_mat(out.raw(), rows, spec_.out_channels);
  out_mat.noalias() = col_mat * w_mat;
  Eigen::Map<const Eigen::RowVectorXd> b(bias_.value.raw(), spec_.out_channels);
  out_mat.rowwise() += b;
  has_forward_ = true;
  return out;
}

Tensor Conv2d::backward(const Tensor& grad_output) {
  require_forward(has_forward_, kind());
  const Shape expected{out_size_.h, out_size_.w, spec_.out_channels};
  if (grad_output.shape() != expected) {
    throw InvalidShapeError("conv: gradient shape " +
                            shape_to_string(grad_output.shape()) +
                            " does not match output " + shape_to_string(expected));
  }
  const std::size_t cin = spec_.in_channels;
  const std::size_t rows = out_size_.h * out_size_.w;
  const std::size_t cols = spec_.kernel.h * spec_.kernel.w * cin;

  ConstMatrixMap g(grad_output.raw(), rows, spec_.out_channels);
  ConstMatrixMap col_mat(columns_.data(), rows, cols);
  MatrixMap dw(weight_.grad.raw(), cols, spec_.out_channels);
  dw.noalias() += col_mat.transpose() * g;
  // Plain loop: Eigen's vectorized reductions peel by address, so the
  // summation order (and the last bit) would depend on allocation.
  double* db = bias_.grad.raw();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* gr = grad_output.raw() + r * spec_.out_channels;
    for (std::size_t o = 0; o < spec_.out_channels; ++o) db[o] += gr[o];
  }

  RowMatrix dcols(rows, cols);
  ConstMatrixMap w_mat(weight_.value.raw(), cols, spec_.out_channels);
  dcols.noalias() = g * w_mat.transpose();

  Tensor grad_input(input_shape_);
  const std::size_t in_h = input_shape_[0], in_w = input_shape_[1];
  double* dst = grad_input.raw();
  for (std::size_t oy = 0; oy < out_size_.h; ++oy) {
    for (std::size_t ox = 0; ox < out_size_.w; ++ox) {
      const double* row = dcols.data() + (oy * out_size_.w + ox) * cols;
      for (std::size_t ky = 0; ky < spec_.kernel.h; ++ky) {
        const long iy = static_cast<long>(oy * spec_.stride.h + ky) -
                        static_cast<long>(spec_.padding.h);
        if (iy < 0 || iy >= static_cast<long>(in_h)) continue;
        for (std::size_t kx = 0; kx < spec_.kernel.w; ++kx) {
          const long ix = static_cast<long>(ox * spec_.stride.w + kx) -
                          static_cast<long>(spec_.padding.w);
          if (ix < 0 || ix >= static_cast<long>(in_w)) continue;
          double* px = dst + (static_cast<std::size_t>(iy) * in_w +
                              static_cast<std::size_t>(ix)) * cin;
          const double* src = row + (ky * spec_.kernel.w + kx) * cin;
          for (std::size_t c = 0; c < cin; ++c) px[c] += src[c];
        }
      }
    }
  }
  return grad_input;
}

// --------------------------------------------------------------- MaxPool2d

Shape MaxPool2d::output_shape(const Shape& input) const {
  require_rank3(input, "maxpool");
  const Extent2 out = spec_.output_size({input[0], input[1]});
  return {out.h, out.w, input[2]};
}

Tensor MaxPool2d::forward(const Tensor& input, Mode) {
  const Shape out_shape = output_shape(input.shape());
  const std::size_t in_h = input.dim(0), in_w = input.dim(1), ch = input.dim(2);
  Tensor out(out_shape);
  argmax_.assign(out.size(), 0);
  const double* src = input.raw();
  for (std::size_t oy = 0; oy < out_shape[0]; ++oy) {
    for (std::size_t ox = 0; ox < out_shape[1]; ++ox) {
      for (std::size_t c = 0; c < ch; ++c) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_idx = std::numeric_limits<std::size_t>::max();
        // Row-major scan with strict '>' keeps the first maximum on ties.
        for (std::size_t ky = 0; ky < spec_.window.h; ++ky) {
          const long iy = static_cast<long>(oy * spec_.stride.h + ky) -
                          static_cast<long>(spec_.padding.h);
          if (iy < 0 || iy >= static_cast<long>(in_h)) continue;
          for (std::size_t kx = 0; kx < spec_.window.w; ++kx) {
            const long ix = static_cast<long>(ox * spec_.stride.w + kx) -
                            static_cast<long>(spec_.padding.w);
            if (ix < 0 || ix >= static_cast<long>(in_w)) continue;
            const std::size_t idx =
                (static_cast<std::size_t>(iy) * in_w + static_cast<std::size_t>(ix)) *
                    ch + c;
            if (best_idx == std::numeric_limits<std::size_t>::max() ||
                src[idx] > best) {
              best = src[idx];
              best_idx = idx;
            }
          }
        }
        const std::size_t o = (oy * out_shape[1] + ox) * ch + c;
        out[o] = best;
        argmax_[o] = best_idx;
      }
    }
  }
  input_shape_ = input.shape();
  has_forward_ = true;
  return out;
}

Tensor MaxPool2d::backward(const Tensor& grad_output) {
  require_forward(has_forward_, kind());
  if (grad_output.size() != argmax_.size()) {
    throw InvalidShapeError("maxpool: gradient shape mismatch");
  }
  Tensor grad_input(input_shape_);
  for (std::size_t o = 0; o < argmax_.size(); ++o) {
    grad_input[argmax_[o]] += grad_output[o];
  }
  return grad_input;
}

std::uint64_t MaxPool2d::region_signature() const {
  std::uint64_t h = 0x6d6178ULL;
  for (std::size_t idx : argmax_) h = hash_combine(h, idx);
  return h;
}

// -------------------------------------------------------------------- Relu

Tensor Relu::forward(const Tensor& input, Mode) {
  Tensor out = input;
  active_.assign(input.size(), false);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] > 0.0) {
      active_[i] = true;
    } else {
      out[i] = 0.0;
    }
  }
  shape_ = input.shape();
  has_forward_ = true;
  return out;
}

Tensor Relu::backward(const Tensor& grad_output) {
  require_forward(has_forward_, kind());
  if (grad_output.shape() != shape_) {
    throw InvalidShapeError("relu: gradient shape mismatch");
  }
  Tensor g = grad_output;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!active_[i]) g[i] = 0.0;
  }
  return g;
}

std::uint64_t Relu::region_signature() const { return hash_bits(active_); }

// ---------------------------------------------------------- FullyConnected

FullyConnected::FullyConnected(std::size_t in_features, std::size_t out_features,
                               std::uint64_t seed)
    : FullyConnected(
          Tensor({in_features, out_features},
                 RandomFill{glorot_scale(in_features, out_features), seed}),
          Tensor({out_features})) {}

FullyConnected::FullyConnected(Tensor weights, Tensor bias)
    : weight_("weight", std::move(weights), false),
      bias_("bias", std::move(bias), true) {
  if (weight_.value.rank() != 2) {
    throw InvalidShapeError("fc: weights must be (in, out)");
  }
  if (bias_.value.shape() != Shape{weight_.value.dim(1)}) {
    throw InvalidShapeError("fc: bias shape " +
                            shape_to_string(bias_.value.shape()) +
                            " does not match output width " +
                            std::to_string(weight_.value.dim(1)));
  }
}

Shape FullyConnected::output_shape(const Shape& input) const {
  if (shape_volume(input) != in_features()) {
    throw InvalidShapeError("fc: input " + shape_to_string(input) + " has " +
                            std::to_string(shape_volume(input)) +
                            " elements, expected " + std::to_string(in_features()));
  }
  return {out_features()};
}

Tensor FullyConnected::forward(const Tensor& input, Mode) {
  const Shape out_shape = output_shape(input.shape());
  input_ = input;
  Tensor out(out_shape);
  Eigen::Map<const Eigen::RowVectorXd> x(input.raw(), in_features());
  ConstMatrixMap w(weight_.value.raw(), in_features(), out_features());
  Eigen::Map<const Eigen::RowVectorXd> b(bias_.value.raw(), out_features());
  Eigen::Map<Eigen::RowVectorXd> y(out.raw(), out_features());
  y.noalias() = x * w;
  y += b;
  has_forward_ = true;
  return out;
}

Tensor FullyConnected::backward(const Tensor& grad_output) {
  require_forward(has_forward_, kind());
  if (grad_output.size() != out_features()) {
    throw InvalidShapeError("fc: gradient shape mismatch");
  }
  Eigen::Map<const Eigen::RowVectorXd> g(grad_output.raw(), out_features());
  Eigen::Map<const Eigen::RowVectorXd> x(input_.raw(), in_features());
  MatrixMap dw(weight_.grad.raw(), in_features(), out_features());
  dw.noalias() += x.transpose() * g;
  Eigen::Map<Eigen::RowVectorXd> db(bias_.grad.raw(), out_features());
  db += g;

  Tensor grad_input(input_.shape());
  ConstMatrixMap w(weight_.value.raw(), in_features(), out_features());
  Eigen::Map<Eigen::RowVectorXd> dx(grad_input.raw(), in_features());
  dx.noalias() = g * w.transpose();
  return grad_input;
}

// ----------------------------------------------------------------- Dropout

Dropout::Dropout(double rate, std::uint64_t seed) : rate_(rate), seed_(seed) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw InvalidArgumentError("dropout rate must be in [0, 1), got " +
                               std::to_string(rate));
  }
}

Tensor Dropout::forward(const Tensor& input, Mode mode) {
  Tensor out = input;
  if (mode == Mode::kEval || rate_ == 0.0) {
    scale_.assign(input.size(), 1.0);
  } else {
    const double keep_scale = 1.0 / (1.0 - rate_);
    const std::uint64_t stream = hash_combine(seed_, step_);
    scale_.resize(input.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      const bool drop = unit_interval(hash_combine(stream, i)) < rate_;
      scale_[i] = drop ? 0.0 : keep_scale;
      out[i] *= scale_[i];
    }
  }
  has_forward_ = true;
  return out;
}

Tensor Dropout::backward(const Tensor& grad_output) {
  require_forward(has_forward_, kind());
  if (grad_output.size() != scale_.size()) {
    throw InvalidShapeError("dropout: gradient shape mismatch");
  }
  Tensor g = grad_output;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= scale_[i];
  return g;
}

// -------------------------------------------------------------- functional

Tensor conv2d(const Tensor& input, const ConvSpec& spec, const Tensor& weights,
              const Tensor& bias) {
  Conv2d layer(spec, weights, bias);
  return layer.forward(input, Mode::kEval);
}

Tensor maxpool2d(const Tensor& input, const PoolSpec& spec) {
  MaxPool2d layer(spec);
  return layer.forward(input, Mode::kEval);
}

Tensor relu(const Tensor& input) {
  Relu layer;
  return layer.forward(input, Mode::kEval);
}

Tensor fully_connected(const Tensor& input, const Tensor& weights,
                       const Tensor& bias) {
  FullyConnected layer(weights, bias);
  return layer.forward(input, Mode::kEval);
}

Tensor dropout(const Tensor& input, double rate, Mode mode, std::uint64_t seed) {
  Dropout layer(rate, seed);
  return layer.forward(input, mode);
}

}  // namespace sscnn
