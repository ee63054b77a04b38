#include "sscnn/network.hpp"

#include <algorithm>
#include <json.hpp>

#include "sscnn/error.hpp"
#include "sscnn/losses.hpp"
#include "sscnn/random.hpp"

namespace sscnn {

namespace {

using nlohmann::json;

std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t layer_seed(std::uint64_t seed, const std::string& name) {
  return hash_combine(seed, name_hash(name));
}

/// Trunk fully-connected layers inside the shared prefix become 1x1 convs.
LayerSpec cast_to_conv(const LayerSpec& spec) {
  LayerSpec c = spec;
  c.kind = LayerKind::kConv;
  c.kernel = {1, 1};
  c.stride = {1, 1};
  c.padding = {0, 0};
  c.relu = true;
  c.pool.reset();
  c.dropout = 0.0;
  return c;
}

struct Builder {
  std::uint64_t seed;
  Shape shape;

  void append(Sequential& seq, const LayerSpec& spec, const std::string& prefix) {
    const std::string base = prefix + "." + spec.name;
    LayerPtr layer;
    if (spec.kind == LayerKind::kConv) {
      if (shape.size() != 3) {
        throw InvalidConfigError("layer '" + spec.name +
                                 "' is a convolution but its input is flat");
      }
      ConvSpec cs{shape[2], spec.out, spec.kernel, spec.stride, spec.padding};
      layer = std::make_unique<Conv2d>(cs, layer_seed(seed, base));
    } else {
      layer = std::make_unique<FullyConnected>(shape_volume(shape), spec.out,
                                               layer_seed(seed, base));
    }
    for (Parameter* p : layer->parameters()) p->name = base + "." + p->name;
    push(seq, std::move(layer), base);
    if (spec.relu) push(seq, std::make_unique<Relu>(), base + ".relu");
    if (spec.pool) push(seq, std::make_unique<MaxPool2d>(*spec.pool), base + ".pool");
    if (spec.dropout > 0.0) {
      push(seq, std::make_unique<Dropout>(spec.dropout,
                                          layer_seed(seed, base + ".dropout")),
           base + ".dropout");
    }
  }

  void push(Sequential& seq, LayerPtr layer, const std::string& name) {
    try {
      shape = layer->output_shape(shape);
    } catch (const InvalidShapeError& e) {
      throw InvalidConfigError("layer '" + name + "': " + e.what());
    }
    layer->set_name(name);
    seq.add(std::move(layer));
  }
};

std::size_t stride_product(const LayerSpec& s) {
  std::size_t v = s.stride.h;
  if (s.pool) v *= s.pool->stride.h;
  return v;
}

/// Which layers make up each branch for a given config.
struct BranchPlan {
  std::vector<LayerSpec> shared;
  std::vector<LayerSpec> scene;
  /// Fully convolutional copies of the unshared trunk layers.
  std::vector<LayerSpec> seg;
  std::size_t shared_stride = 1;
  std::size_t seg_stride = 1;
};

/// A trailing linear trunk layer with M_s outputs is the scene classifier.
bool is_scene_classifier(const NetworkConfig& c, std::size_t i) {
  const LayerSpec& s = c.trunk[i];
  return i + 1 == c.trunk.size() && s.kind == LayerKind::kFullyConnected &&
         !s.relu && s.out == c.num_scenes;
}

BranchPlan plan_branches(const NetworkConfig& c) {
  BranchPlan plan;
  for (std::size_t i = 0; i < c.trunk.size(); ++i) {
    if (i < c.branch_point) {
      const LayerSpec s = c.trunk[i].kind == LayerKind::kFullyConnected
                              ? cast_to_conv(c.trunk[i])
                              : c.trunk[i];
      plan.shared_stride *= stride_product(s);
      plan.shared.push_back(s);
    } else {
      plan.scene.push_back(c.trunk[i]);
      if (!is_scene_classifier(c, i)) {
        const LayerSpec s = c.trunk[i].kind == LayerKind::kFullyConnected
                                ? cast_to_conv(c.trunk[i])
                                : c.trunk[i];
        plan.seg_stride *= stride_product(s);
        plan.seg.push_back(s);
      }
    }
  }
  plan.seg_stride *= plan.shared_stride;
  plan.scene.insert(plan.scene.end(), c.scene_head.begin(), c.scene_head.end());
  if (c.branch_point == c.trunk.size()) {
    plan.scene.insert(plan.scene.end(), c.scene_extra.begin(), c.scene_extra.end());
  }
  return plan;
}

/// Max-pool window that brings the shared output down to the head stride.
std::optional<PoolSpec> seg_adapter(const NetworkConfig& c, std::size_t stride) {
  if (stride >= c.seg_output_stride) return std::nullopt;
  if (c.seg_output_stride % stride != 0) {
    throw InvalidConfigError("segmentation stride " +
                             std::to_string(c.seg_output_stride) +
                             " is not a multiple of the branch stride " +
                             std::to_string(stride));
  }
  const std::size_t r = c.seg_output_stride / stride;
  return PoolSpec{{r, r}, {r, r}, {0, 0}};
}

json extent_json(const Extent2& e) { return json::array({e.h, e.w}); }

Extent2 extent_from(const json& j) {
  return {j.at(0).get<std::size_t>(), j.at(1).get<std::size_t>()};
}

json spec_json(const LayerSpec& s) {
  json j;
  j["name"] = s.name;
  j["kind"] = s.kind == LayerKind::kConv ? "conv" : "fc";
  j["out"] = s.out;
  j["kernel"] = extent_json(s.kernel);
  j["stride"] = extent_json(s.stride);
  j["padding"] = extent_json(s.padding);
  j["relu"] = s.relu;
  j["dropout"] = s.dropout;
  if (s.pool) {
    j["pool"] = {{"window", extent_json(s.pool->window)},
                 {"stride", extent_json(s.pool->stride)},
                 {"padding", extent_json(s.pool->padding)}};
  } else {
    j["pool"] = nullptr;
  }
  return j;
}

LayerSpec spec_from(const json& j) {
  LayerSpec s;
  s.name = j.at("name").get<std::string>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "conv") {
    s.kind = LayerKind::kConv;
  } else if (kind == "fc") {
    s.kind = LayerKind::kFullyConnected;
  } else {
    throw InvalidConfigError("unknown layer kind '" + kind + "'");
  }
  s.out = j.at("out").get<std::size_t>();
  s.kernel = extent_from(j.at("kernel"));
  s.stride = extent_from(j.at("stride"));
  s.padding = extent_from(j.at("padding"));
  s.relu = j.at("relu").get<bool>();
  s.dropout = j.at("dropout").get<double>();
  if (!j.at("pool").is_null()) {
    const auto& p = j.at("pool");
    s.pool = PoolSpec{extent_from(p.at("window")), extent_from(p.at("stride")),
                      extent_from(p.at("padding"))};
  }
  return s;
}

json specs_json(const std::vector<LayerSpec>& v) {
  json a = json::array();
  for (const auto& s : v) a.push_back(spec_json(s));
  return a;
}

std::vector<LayerSpec> specs_from(const json& a) {
  std::vector<LayerSpec> v;
  for (const auto& j : a) v.push_back(spec_from(j));
  return v;
}

LayerSpec conv(std::string name, std::size_t out, std::size_t k,
               std::size_t stride = 1, std::size_t pad = 0) {
  LayerSpec s;
  s.name = std::move(name);
  s.kind = LayerKind::kConv;
  s.out = out;
  s.kernel = {k, k};
  s.stride = {stride, stride};
  s.padding = {pad, pad};
  return s;
}

LayerSpec fc(std::string name, std::size_t out, bool relu, double dropout) {
  LayerSpec s;
  s.name = std::move(name);
  s.kind = LayerKind::kFullyConnected;
  s.out = out;
  s.relu = relu;
  s.dropout = dropout;
  return s;
}

PoolSpec pool(std::size_t window, std::size_t stride) {
  return PoolSpec{{window, window}, {stride, stride}, {0, 0}};
}

}  // namespace

void validate_config(const NetworkConfig& c) {
  if (c.input_height == 0 || c.input_width == 0 || c.input_channels == 0) {
    throw InvalidConfigError("input geometry must be positive");
  }
  if (c.num_scenes < 2 || c.num_objects < 2) {
    throw InvalidConfigError("need at least 2 scene and 2 object classes");
  }
  if (c.branch_point > c.layer_count()) {
    throw InvalidConfigError("branch point n=" + std::to_string(c.branch_point) +
                             " exceeds trunk depth N_l=" +
                             std::to_string(c.layer_count()));
  }
  if (!(c.alpha >= 0.0)) {
    throw InvalidConfigError("alpha must be non-negative");
  }
  if (c.seg_output_stride == 0) {
    throw InvalidConfigError("segmentation output stride must be >= 1");
  }
  bool seen_fc = false;
  for (const auto& s : c.trunk) {
    if (s.kind == LayerKind::kConv && seen_fc) {
      throw InvalidConfigError("trunk layer '" + s.name +
                               "' is a convolution after a fully connected layer");
    }
    seen_fc |= s.kind == LayerKind::kFullyConnected;
  }
  const BranchPlan plan = plan_branches(c);
  if (plan.scene.empty()) {
    throw InvalidConfigError("scene branch is empty for n=" +
                             std::to_string(c.branch_point));
  }
  const LayerSpec& last_scene = plan.scene.back();
  if (last_scene.kind != LayerKind::kFullyConnected ||
      last_scene.out != c.num_scenes || last_scene.relu) {
    throw InvalidConfigError(
        "scene branch must end in a linear fully connected layer with M_s=" +
        std::to_string(c.num_scenes) + " outputs");
  }
  if (c.seg_head.empty()) {
    throw InvalidConfigError("segmentation head is empty");
  }
  for (const auto& s : c.seg_head) {
    if (s.kind != LayerKind::kConv) {
      throw InvalidConfigError("segmentation head layer '" + s.name +
                               "' must be convolutional");
    }
  }
  if (c.seg_head.back().out != c.num_objects) {
    throw InvalidConfigError("segmentation head outputs " +
                             std::to_string(c.seg_head.back().out) +
                             " channels, expected M_o=" +
                             std::to_string(c.num_objects));
  }
  if (c.seg_head.back().relu) {
    throw InvalidConfigError("segmentation head must end without a ReLU");
  }
  for (const auto* group : {&c.trunk, &c.scene_head, &c.scene_extra, &c.seg_head}) {
    for (const auto& s : *group) {
      if (s.out == 0) throw InvalidConfigError("layer '" + s.name + "' has zero width");
      if (!(s.dropout >= 0.0 && s.dropout < 1.0)) {
        throw InvalidConfigError("layer '" + s.name + "' dropout outside [0, 1)");
      }
    }
  }
}

std::string config_to_json(const NetworkConfig& c) {
  json j;
  j["preset"] = c.preset;
  j["input"] = {{"height", c.input_height},
                {"width", c.input_width},
                {"channels", c.input_channels},
                {"offset", c.input_offset},
                {"scale", c.input_scale}};
  j["trunk"] = specs_json(c.trunk);
  j["scene_head"] = specs_json(c.scene_head);
  j["scene_extra"] = specs_json(c.scene_extra);
  j["seg_head"] = specs_json(c.seg_head);
  j["seg_output_stride"] = c.seg_output_stride;
  j["branch_point"] = c.branch_point;
  j["alpha"] = c.alpha;
  j["num_scenes"] = c.num_scenes;
  j["num_objects"] = c.num_objects;
  return j.dump(2);
}

NetworkConfig config_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    NetworkConfig c;
    c.preset = j.at("preset").get<std::string>();
    const auto& in = j.at("input");
    c.input_height = in.at("height").get<std::size_t>();
    c.input_width = in.at("width").get<std::size_t>();
    c.input_channels = in.at("channels").get<std::size_t>();
    c.input_offset = in.at("offset").get<double>();
    c.input_scale = in.at("scale").get<double>();
    c.trunk = specs_from(j.at("trunk"));
    c.scene_head = specs_from(j.at("scene_head"));
    c.scene_extra = specs_from(j.at("scene_extra"));
    c.seg_head = specs_from(j.at("seg_head"));
    c.seg_output_stride = j.at("seg_output_stride").get<std::size_t>();
    c.branch_point = j.at("branch_point").get<std::size_t>();
    c.alpha = j.at("alpha").get<double>();
    c.num_scenes = j.at("num_scenes").get<std::size_t>();
    c.num_objects = j.at("num_objects").get<std::size_t>();
    return c;
  } catch (const json::exception& e) {
    throw InvalidConfigError(std::string("malformed network config: ") + e.what());
  }
}

NetworkConfig tiny_preset(const PresetOptions& o) {
  NetworkConfig c;
  c.preset = "tiny";
  c.input_height = c.input_width = o.input_size;
  c.input_channels = o.input_channels;
  c.num_scenes = o.num_scenes;
  c.num_objects = o.num_objects;
  c.branch_point = o.branch_point;
  c.alpha = o.alpha;

  LayerSpec c1 = conv("conv1", 8, 3, 1, 1);
  c1.pool = pool(2, 2);
  LayerSpec c2 = conv("conv2", 16, 3, 1, 1);
  c2.pool = pool(2, 2);
  c.trunk = {c1, c2, conv("conv3", 16, 3, 1, 1), conv("conv4", 32, 3, 1, 1)};
  c.scene_head = {fc("fc5", 64, true, 0.5), fc("fc6", o.num_scenes, false, 0.0)};
  LayerSpec head = conv("score", o.num_objects, 1);
  head.relu = false;
  c.seg_head = {head};
  c.seg_output_stride = 4;
  validate_config(c);
  return c;
}

NetworkConfig alexnet_preset(const PresetOptions& o) {
  NetworkConfig c;
  c.preset = "alexnet";
  c.input_height = 158;
  c.input_width = 210;
  c.input_channels = o.input_channels;
  c.num_scenes = o.num_scenes;
  c.num_objects = o.num_objects;
  c.branch_point = o.branch_point;
  c.alpha = o.alpha;

  // Receptive field 9 -> 17 -> 49 -> 65 -> 81 with stride 4 -> 8 -> 16.
  LayerSpec c1 = conv("conv1", 48, 9, 4, 4);
  c1.pool = pool(3, 2);
  LayerSpec c3 = conv("conv3", 192, 3, 1, 1);
  c3.pool = pool(3, 2);
  c.trunk = {c1,
             conv("conv2", 128, 5, 1, 2),
             c3,
             conv("conv4", 192, 1),
             conv("conv5", 128, 1),
             fc("fc6", 512, true, 0.5),
             fc("fc7", 512, true, 0.5),
             fc("fc8", o.num_scenes, false, 0.0)};
  c.scene_extra = {fc("fc9", 512, true, 0.5), fc("fc10", o.num_scenes, false, 0.0)};
  LayerSpec head = conv("score", o.num_objects, 1);
  head.relu = false;
  c.seg_head = {head};
  c.seg_output_stride = 16;
  validate_config(c);
  return c;
}

SegmentationGeometry segmentation_geometry(const NetworkConfig& c) {
  validate_config(c);
  const BranchPlan plan = plan_branches(c);
  Extent2 rf{1, 1}, jump{1, 1};
  Extent2 size{c.input_height, c.input_width};
  auto apply = [&](Extent2 k, Extent2 s, Extent2 p) {
    rf.h += (k.h - 1) * jump.h;
    rf.w += (k.w - 1) * jump.w;
    jump.h *= s.h;
    jump.w *= s.w;
    size = ConvSpec{1, 1, k, s, p}.output_size(size);
  };
  auto apply_spec = [&](const LayerSpec& s) {
    apply(s.kernel, s.stride, s.padding);
    if (s.pool) apply(s.pool->window, s.pool->stride, s.pool->padding);
  };
  for (const auto& s : plan.shared) apply_spec(s);
  for (const auto& s : plan.seg) apply_spec(s);
  if (auto adapter = seg_adapter(c, plan.seg_stride)) {
    apply(adapter->window, adapter->stride, adapter->padding);
  }
  for (const auto& s : c.seg_head) apply_spec(s);

  SegmentationGeometry g;
  g.output_stride = jump.h;
  g.receptive_field = rf.h;
  g.receptive_field_2d = rf;
  g.output_size = size;
  return g;
}

// ------------------------------------------------------------- SSCNNModel

SSCNNModel SSCNNModel::build(const NetworkConfig& config, std::uint64_t seed) {
  validate_config(config);
  SSCNNModel m;
  m.config_ = config;
  const BranchPlan plan = plan_branches(config);

  Builder b{seed, {config.input_height, config.input_width, config.input_channels}};
  for (const auto& s : plan.shared) b.append(m.shared_, s, "trunk");
  const Shape branch_shape = b.shape;

  b.shape = branch_shape;
  for (std::size_t i = 0; i < plan.scene.size(); ++i) {
    const bool from_trunk = i + config.branch_point < config.layer_count();
    b.append(m.scene_, plan.scene[i], from_trunk ? "trunk" : "scene");
  }

  b.shape = branch_shape;
  for (const auto& s : plan.seg) b.append(m.seg_, s, "seg");
  if (auto adapter = seg_adapter(config, plan.seg_stride)) {
    b.push(m.seg_, std::make_unique<MaxPool2d>(*adapter), "seg.adapter");
  }
  for (const auto& s : config.seg_head) b.append(m.seg_, s, "seg");
  if (b.shape.size() != 3) {
    throw InvalidConfigError("segmentation head must produce an H x W x M_o map");
  }
  m.seg_size_ = {b.shape[0], b.shape[1]};

  for (Parameter* p : m.shared_.parameters()) p->owner = Branch::kShared;
  for (Parameter* p : m.scene_.parameters()) p->owner = Branch::kScene;
  for (Parameter* p : m.seg_.parameters()) p->owner = Branch::kSeg;
  return m;
}

Shape SSCNNModel::input_shape() const {
  return {config_.input_height, config_.input_width, config_.input_channels};
}

Tensor SSCNNModel::normalize(const Tensor& x) const {
  if (x.shape() != input_shape()) {
    throw InvalidShapeError("input " + shape_to_string(x.shape()) +
                            " does not match network input " +
                            shape_to_string(input_shape()));
  }
  Tensor out = x;
  for (double& v : out.data()) v = (v - config_.input_offset) * config_.input_scale;
  return out;
}

ForwardResult SSCNNModel::forward(const SampleRecord& sample, Mode mode) {
  return forward(sample.x, sample.scene, sample.labels, sample.mask, mode);
}

ForwardResult SSCNNModel::forward(const Tensor& x, std::size_t scene_label,
                                  const LabelMap& labels, const IgnoreMask& mask,
                                  Mode mode) {
  if (labels.height != seg_size_.h || labels.width != seg_size_.w) {
    throw InvalidShapeError(
        "label map " + std::to_string(labels.height) + "x" +
        std::to_string(labels.width) + " does not match segmentation output " +
        std::to_string(seg_size_.h) + "x" + std::to_string(seg_size_.w) +
        " (resize labels to the head geometry first)");
  }
  has_train_forward_ = false;
  const Tensor h = shared_.forward(normalize(x), mode);
  const Tensor logits = scene_.forward(h, mode);
  const Tensor scores = seg_.forward(h, mode);

  ForwardResult r;
  r.alpha = config_.alpha;
  r.p_s = softmax(logits);
  r.p_o = pixel_softmax(scores);
  LossValue scene = scene_loss(r.p_s, scene_label);
  LossValue object = segmentation_loss(r.p_o, labels, mask);
  r.l_scene = scene.loss;
  r.l_object = object.loss;
  r.l_ss = compose_ss_loss(r.l_scene, r.l_object, r.alpha);
  r.scene_logit_grad = std::move(scene.grad);
  r.seg_score_grad = std::move(object.grad);
  r.floor_hits = scene.floor_hits + object.floor_hits;
  r.all_pixels_ignored = object.all_ignored;
  has_train_forward_ = mode == Mode::kTrain;
  return r;
}

Prediction SSCNNModel::predict(const Tensor& x) {
  has_train_forward_ = false;
  const Tensor h = shared_.forward(normalize(x), Mode::kEval);
  return {softmax(scene_.forward(h, Mode::kEval)),
          pixel_softmax(seg_.forward(h, Mode::kEval))};
}

void SSCNNModel::backward(const ForwardResult& result) {
  backward(result, LossWeights{1.0, config_.alpha});
}

void SSCNNModel::backward(const ForwardResult& result, const LossWeights& weights) {
  backward_to_input(result, weights);
}

Tensor SSCNNModel::backward_to_input(const ForwardResult& result,
                                     const LossWeights& weights) {
  if (!has_train_forward_) {
    throw ContractViolationError(
        "backward requires a preceding train-mode forward on this model");
  }
  Tensor g_scene = result.scene_logit_grad;
  for (double& v : g_scene.data()) v *= weights.scene;
  Tensor g_seg = result.seg_score_grad;
  for (double& v : g_seg.data()) v *= weights.object;

  Tensor g = scene_.backward(g_scene);
  const Tensor g_from_seg = seg_.backward(g_seg);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += g_from_seg[i];
  Tensor gx = shared_.backward(g);
  for (double& v : gx.data()) v *= config_.input_scale;
  return gx;
}

std::vector<Parameter*> SSCNNModel::parameters() {
  std::vector<Parameter*> out = shared_.parameters();
  for (Parameter* p : scene_.parameters()) out.push_back(p);
  for (Parameter* p : seg_.parameters()) out.push_back(p);
  return out;
}

std::vector<Parameter*> SSCNNModel::parameters(Branch owner) {
  switch (owner) {
    case Branch::kShared: return shared_.parameters();
    case Branch::kScene: return scene_.parameters();
    case Branch::kSeg: return seg_.parameters();
  }
  return {};
}

void SSCNNModel::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

void SSCNNModel::set_stochastic_step(std::uint64_t step) {
  shared_.set_stochastic_step(step);
  scene_.set_stochastic_step(step);
  seg_.set_stochastic_step(step);
}

std::uint64_t SSCNNModel::region_signature() const {
  return hash_combine(hash_combine(shared_.region_signature(),
                                   scene_.region_signature()),
                      seg_.region_signature());
}

std::vector<std::pair<std::string, Layer*>> SSCNNModel::layers() {
  std::vector<std::pair<std::string, Layer*>> out;
  for (Sequential* s : {&shared_, &scene_, &seg_}) {
    for (std::size_t i = 0; i < s->size(); ++i) {
      out.emplace_back((*s)[i].name(), &(*s)[i]);
    }
  }
  return out;
}

std::vector<Shape> SSCNNModel::layer_input_shapes() const {
  std::vector<Shape> out;
  auto walk = [&](const Sequential& s, Shape shape) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      out.push_back(shape);
      shape = s[i].output_shape(shape);
    }
    return shape;
  };
  const Shape branch = walk(shared_, input_shape());
  walk(scene_, branch);
  walk(seg_, branch);
  return out;
}

}  // namespace sscnn
