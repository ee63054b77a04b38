#include "sscnn/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "sscnn/error.hpp"
#include "sscnn/metrics.hpp"
#include "sscnn/random.hpp"

namespace sscnn {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << text;
}

}  // namespace

TrainConfig desk_train_config() { return TrainConfig{}; }

TrainConfig paper_train_config() {
  TrainConfig c;
  c.learning_rate = 1e-4;
  c.momentum = 0.9;
  c.weight_decay = 5e-4;
  c.batch_size = 20;
  c.bias_lr_multiplier = 2.0;
  return c;
}

void validate_train_config(const TrainConfig& c) {
  if (!(c.learning_rate > 0.0)) {
    throw InvalidConfigError("learning_rate must be > 0");
  }
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) {
    throw InvalidConfigError("momentum must be in [0, 1)");
  }
  if (!(c.weight_decay >= 0.0)) {
    throw InvalidConfigError("weight_decay must be >= 0");
  }
  if (c.batch_size < 1) throw InvalidConfigError("batch_size must be >= 1");
  if (!(c.bias_lr_multiplier > 0.0)) {
    throw InvalidConfigError("bias_lr_multiplier must be > 0");
  }
  if (!(c.divergence_threshold > 0.0)) {
    throw InvalidConfigError("divergence_threshold must be > 0");
  }
}

std::string train_config_to_json(const TrainConfig& c) {
  json j;
  j["learning_rate"] = c.learning_rate;
  j["momentum"] = c.momentum;
  j["weight_decay"] = c.weight_decay;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["bias_lr_multiplier"] = c.bias_lr_multiplier;
  j["divergence_threshold"] = c.divergence_threshold;
  return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    TrainConfig c;
    c.learning_rate = j.at("learning_rate").get<double>();
    c.momentum = j.at("momentum").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.bias_lr_multiplier = j.at("bias_lr_multiplier").get<double>();
    c.divergence_threshold = j.value("divergence_threshold", 1e6);
    validate_train_config(c);
    return c;
  } catch (const json::exception& e) {
    throw InvalidConfigError(std::string("malformed train config: ") + e.what());
  }
}

void sgd_momentum_step(Parameter& p, const TrainConfig& c) {
  for (double g : p.grad.data()) {
    if (!std::isfinite(g)) {
      throw NumericDivergenceError("non-finite gradient in parameter '" + p.name +
                                   "'");
    }
  }
  const double step = c.learning_rate * p.lr_multiplier;
  double* v = p.velocity.raw();
  double* w = p.value.raw();
  const double* g = p.grad.raw();
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    v[i] = c.momentum * v[i] - step * (g[i] + c.weight_decay * w[i]);
    w[i] += v[i];
  }
  p.zero_grad();
}

TrainingLog train(SSCNNModel& model, std::span<const SampleRecord> dataset,
                  const TrainConfig& config, const TrainHooks& hooks) {
  validate_train_config(config);
  if (dataset.empty()) throw DataError("training set is empty");
  const NetworkConfig& net = model.config();

  std::vector<Parameter*> params = model.parameters();
  for (Parameter* p : params) {
    p->lr_multiplier = p->is_bias ? config.bias_lr_multiplier : 1.0;
  }
  model.zero_grad();

  TrainingLog log;
  std::vector<std::size_t> order(dataset.size());
  std::uint64_t stochastic_step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(hash_combine(config.seed, epoch));
    shuffle_rng.shuffle(order);

    EpochLog e;
    e.epoch = epoch;
    ConfusionMatrix scene_cm(net.num_scenes);
    ConfusionMatrix pixel_cm(net.num_objects);

    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(end - begin);
      for (std::size_t k = begin; k < end; ++k) {
        const SampleRecord& s = dataset[order[k]];
        model.set_stochastic_step(hash_combine(config.seed, stochastic_step++));
        const ForwardResult r = model.forward(s, Mode::kTrain);
        if (!std::isfinite(r.l_ss) || r.l_ss > config.divergence_threshold) {
          std::ostringstream msg;
          msg << "loss diverged at epoch " << epoch << ", sample '" << s.id
              << "': L_scene=" << r.l_scene << " L_object=" << r.l_object
              << " L_ss=" << r.l_ss;
          throw NumericDivergenceError(msg.str());
        }
        model.backward(r, LossWeights{inv_batch, net.alpha * inv_batch});
        e.l_scene += r.l_scene;
        e.l_object += r.l_object;
        e.l_ss += r.l_ss;
        scene_cm.add(s.scene, argmax(r.p_s.data()));
        accumulate_pixels(pixel_cm, argmax_labels(r.p_o), s.labels, s.mask);
      }
      for (Parameter* p : params) sgd_momentum_step(*p, config);
      ++log.optimizer_steps;
    }

    const double n = static_cast<double>(dataset.size());
    e.l_scene /= n;
    e.l_object /= n;
    e.l_ss /= n;
    e.scene_acc = mean_class_accuracy(scene_cm).mean;
    e.pixel_acc = pixel_cm.total() ? mean_class_accuracy(pixel_cm).mean : 0.0;
    e.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - start)
                    .count();
    log.epochs.push_back(e);
    if (hooks.on_epoch) hooks.on_epoch(e);
    if (hooks.on_checkpoint &&
        ((hooks.checkpoint_every && epoch % hooks.checkpoint_every == 0) ||
         epoch == config.epochs)) {
      hooks.on_checkpoint(epoch);
    }
  }
  return log;
}

std::string format_epoch_csv(const EpochLog& e) {
  std::ostringstream os;
  os << std::setprecision(17) << e.epoch << ',' << e.l_scene << ',' << e.l_object
     << ',' << e.l_ss << ',' << e.scene_acc << ',' << e.pixel_acc << ','
     << std::setprecision(6) << e.wall_ms;
  return os.str();
}

void save_checkpoint(SSCNNModel& model, const fs::path& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "sscnn-checkpoint";
  manifest["version"] = kCheckpointFormatVersion;
  manifest["config"] = json::parse(config_to_json(model.config()));
  json params = json::array();
  for (Parameter* p : model.parameters()) {
    const std::string file = p->name + ".sstn";
    save_tensor(dir / file, p->value);
    json entry;
    entry["name"] = p->name;
    entry["file"] = file;
    entry["shape"] = p->value.shape();
    entry["owner"] = branch_name(p->owner);
    params.push_back(entry);
  }
  manifest["parameters"] = params;
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

SSCNNModel load_checkpoint(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) {
    throw DataError("checkpoint manifest missing: " + manifest_path.string());
  }
  json manifest;
  try {
    manifest = json::parse(read_text(manifest_path));
  } catch (const json::exception& e) {
    throw DataError("corrupt checkpoint manifest " + manifest_path.string() + ": " +
                    e.what());
  }
  if (manifest.value("format", "") != "sscnn-checkpoint") {
    throw DataError("not a checkpoint manifest: " + manifest_path.string());
  }
  const int version = manifest.value("version", -1);
  if (version != kCheckpointFormatVersion) {
    throw DataError("checkpoint version mismatch: file has " +
                    std::to_string(version) + ", expected " +
                    std::to_string(kCheckpointFormatVersion));
  }
  const NetworkConfig config = config_from_json(manifest.at("config").dump());
  SSCNNModel model = SSCNNModel::build(config, 0);

  std::map<std::string, std::string> files;
  for (const auto& entry : manifest.at("parameters")) {
    files[entry.at("name").get<std::string>()] = entry.at("file").get<std::string>();
  }
  for (Parameter* p : model.parameters()) {
    const auto it = files.find(p->name);
    if (it == files.end()) {
      throw DataError("checkpoint is missing parameter '" + p->name + "'");
    }
    const fs::path file = dir / it->second;
    if (!fs::exists(file)) {
      throw DataError("missing tensor file for parameter '" + p->name +
                      "': " + file.string());
    }
    Tensor value = load_tensor(file);
    if (value.shape() != p->value.shape()) {
      throw DataError("parameter '" + p->name + "' has shape " +
                      shape_to_string(value.shape()) + ", expected " +
                      shape_to_string(p->value.shape()));
    }
    p->value = std::move(value);
  }
  return model;
}

}  // namespace sscnn
