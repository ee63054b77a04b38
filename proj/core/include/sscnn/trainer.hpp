#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sscnn/network.hpp"
#include "sscnn/sample.hpp"

namespace sscnn {

struct TrainConfig {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::size_t batch_size = 8;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;
  double bias_lr_multiplier = 2.0;
  /// Abort when a per-image L_ss exceeds this.
  double divergence_threshold = 1e6;
};

/// Desk-scale defaults for the tiny preset.
TrainConfig desk_train_config();
/// lr 1e-4, momentum 0.9, weight decay 5e-4, batch 20, doubled bias lr.
TrainConfig paper_train_config();

void validate_train_config(const TrainConfig& config);
std::string train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const std::string& text);

/// v <- momentum v - lr * lr_multiplier * (grad + weight_decay * value);
/// value <- value + v; grad <- 0.
void sgd_momentum_step(Parameter& param, const TrainConfig& config);

struct EpochLog {
  std::size_t epoch = 0;
  double l_scene = 0.0;   // mean per image
  double l_object = 0.0;  // mean per image
  double l_ss = 0.0;      // mean per image
  double scene_acc = 0.0;  // mean class accuracy of train-mode predictions
  double pixel_acc = 0.0;
  double wall_ms = 0.0;
};

struct TrainingLog {
  std::vector<EpochLog> epochs;
  std::size_t optimizer_steps = 0;
};

struct TrainHooks {
  std::function<void(const EpochLog&)> on_epoch;
  /// Called after epochs that are multiples of `checkpoint_every` and after
  /// the final epoch.
  std::function<void(std::size_t epoch)> on_checkpoint;
  std::size_t checkpoint_every = 0;
};

/// Mini-batch SGD with momentum. Per batch, gradients are the batch mean of
/// the per-image dL_ss. Deterministic in config.seed.
TrainingLog train(SSCNNModel& model, std::span<const SampleRecord> dataset,
                  const TrainConfig& config, const TrainHooks& hooks = {});

inline constexpr const char* kTrainLogHeader =
    "epoch,L_scene,L_object,L_ss,scene_acc,pixel_acc,wall_ms";
/// One log row. wall_ms is the only field that varies between identical runs.
std::string format_epoch_csv(const EpochLog& e);

inline constexpr int kCheckpointFormatVersion = 1;

/// Writes `manifest.json` plus one SSTN file per parameter into `dir`.
void save_checkpoint(SSCNNModel& model, const std::filesystem::path& dir);
SSCNNModel load_checkpoint(const std::filesystem::path& dir);

}  // namespace sscnn
