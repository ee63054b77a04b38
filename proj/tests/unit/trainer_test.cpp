#include <gtest/gtest.h>

#include <filesystem>

#include "sscnn/dataset.hpp"
#include "sscnn/error.hpp"
#include "sscnn/random.hpp"
#include "sscnn/trainer.hpp"
#include "test_support.hpp"

namespace sscnn {
namespace {

NetworkConfig tiny(std::size_t n) {
  PresetOptions o;
  o.branch_point = n;
  return tiny_preset(o);
}

std::vector<SampleRecord> random_set(const SSCNNModel& m, std::size_t count) {
  std::vector<SampleRecord> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(testing::random_sample(m, 100 + i, 7));
  return out;
}

TEST(Sgd, ScalarRecurrence) {
  Parameter p("w", Tensor({1}, 1.0), false);
  TrainConfig c;
  c.learning_rate = 0.1;
  c.momentum = 0.9;
  c.weight_decay = 0.0;
  p.grad[0] = 1.0;
  sgd_momentum_step(p, c);
  EXPECT_DOUBLE_EQ(p.velocity[0], -0.1);
  EXPECT_DOUBLE_EQ(p.value[0], 0.9);
  EXPECT_EQ(p.grad[0], 0.0);
  p.grad[0] = 1.0;
  sgd_momentum_step(p, c);
  EXPECT_DOUBLE_EQ(p.velocity[0], -0.19);
}

TEST(Sgd, DecayOnlyStep) {
  Parameter p("w", Tensor({1}, 2.0), false);
  TrainConfig c;
  c.learning_rate = 0.1;
  c.momentum = 0.0;
  c.weight_decay = 0.5;
  sgd_momentum_step(p, c);
  EXPECT_DOUBLE_EQ(p.value[0], 1.9);
}

TEST(Sgd, BiasTakesDoubleStep) {
  Parameter w("w", Tensor({1}, 0.0), false);
  Parameter b("b", Tensor({1}, 0.0), true);
  TrainConfig c;
  c.learning_rate = 0.01;
  c.weight_decay = 0.0;
  w.grad[0] = b.grad[0] = 1.0;
  sgd_momentum_step(w, c);
  sgd_momentum_step(b, c);
  EXPECT_DOUBLE_EQ(b.value[0], 2.0 * w.value[0]);
}

TEST(Sgd, MatchesScalarOracleOnRandomSequences) {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    TrainConfig c;
    c.learning_rate = rng.uniform(1e-4, 0.1);
    c.momentum = rng.uniform(0.0, 0.99);
    c.weight_decay = rng.uniform(0.0, 1e-2);
    const bool bias = trial % 2 == 1;
    Parameter p("p", Tensor({1}, rng.uniform(-1, 1)), bias);
    double w = p.value[0], v = 0.0;
    const double lr = c.learning_rate * (bias ? 2.0 : 1.0);
    for (int t = 0; t < 50; ++t) {
      const double g = rng.uniform(-2, 2);
      p.grad[0] = g;
      sgd_momentum_step(p, c);
      v = c.momentum * v - lr * (g + c.weight_decay * w);
      w = w + v;
      ASSERT_NEAR(p.value[0], w, 1e-12);
    }
  }
}

TEST(Sgd, NonFiniteGradient) {
  Parameter p("w", Tensor({2}, 0.0), false);
  p.grad[1] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(sgd_momentum_step(p, TrainConfig{}), NumericDivergenceError);
}

TEST(Trainer, ConfigValidationAndJson) {
  TrainConfig c = desk_train_config();
  EXPECT_NO_THROW(validate_train_config(c));
  const TrainConfig back = train_config_from_json(train_config_to_json(c));
  EXPECT_EQ(train_config_to_json(back), train_config_to_json(c));
  c.momentum = 1.0;
  EXPECT_THROW(validate_train_config(c), InvalidConfigError);
  const TrainConfig paper = paper_train_config();
  EXPECT_EQ(paper.learning_rate, 1e-4);
  EXPECT_EQ(paper.batch_size, 20u);
}

TEST(Trainer, SingleSampleTakesOneStep) {
  auto m = SSCNNModel::build(tiny(2), 1);
  const auto data = random_set(m, 1);
  TrainConfig c = desk_train_config();
  c.epochs = 1;
  EXPECT_EQ(train(m, data, c).optimizer_steps, 1u);
}

TEST(Trainer, EmptySet) {
  auto m = SSCNNModel::build(tiny(2), 1);
  EXPECT_THROW(train(m, std::span<const SampleRecord>{}, desk_train_config()), DataError);
}

TEST(Trainer, DivergenceAborts) {
  auto m = SSCNNModel::build(tiny(2), 1);
  const auto data = random_set(m, 4);
  TrainConfig c = desk_train_config();
  c.divergence_threshold = 1e-6;
  try {
    train(m, data, c);
    FAIL() << "expected divergence";
  } catch (const NumericDivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos);
  }
}

TEST(Trainer, Deterministic) {
  auto a = SSCNNModel::build(tiny(2), 3);
  const auto data = random_set(a, 6);
  TrainConfig c = desk_train_config();
  c.epochs = 2;
  c.batch_size = 4;
  const auto la = train(a, data, c);
  // Shift heap addresses between runs; results must not depend on alignment.
  std::vector<std::vector<double>> padding;
  for (std::size_t k = 1; k <= 3; ++k) {
    padding.emplace_back(k, 0.0);
    auto b = SSCNNModel::build(tiny(2), 3);
    const auto lb = train(b, data, c);
    for (std::size_t e = 0; e < la.epochs.size(); ++e) {
      EXPECT_EQ(la.epochs[e].l_ss, lb.epochs[e].l_ss);
    }
    auto pa = a.parameters(), pb = b.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) {
      EXPECT_TRUE(pa[i]->value == pb[i]->value) << pa[i]->name;
    }
  }
}

TEST(Trainer, LossDecreasesOnSyntheticScenes) {
  testing::TempDir dir("trainer");
  generate_synthetic_dataset(default_synthetic_spec(0), 32, 0, dir.path());
  DatasetReader reader(dir / "manifest.json", LoadOptions{});
  const auto data = reader.load_split("train");
  auto m = SSCNNModel::build(tiny(2), 0);
  TrainConfig c = desk_train_config();
  c.epochs = 5;
  const auto log = train(m, data, c);
  ASSERT_EQ(log.epochs.size(), 5u);
  EXPECT_LT(log.epochs.back().l_ss, log.epochs.front().l_ss);
}

TEST(Trainer, CheckpointHooks) {
  auto m = SSCNNModel::build(tiny(1), 3);
  const auto data = random_set(m, 2);
  TrainConfig c = desk_train_config();
  c.epochs = 5;
  std::vector<std::size_t> saved;
  std::size_t logged = 0;
  TrainHooks hooks;
  hooks.checkpoint_every = 2;
  hooks.on_checkpoint = [&](std::size_t e) { saved.push_back(e); };
  hooks.on_epoch = [&](const EpochLog&) { ++logged; };
  train(m, data, c, hooks);
  EXPECT_EQ(saved, (std::vector<std::size_t>{2, 4, 5}));
  EXPECT_EQ(logged, 5u);
}

TEST(Trainer, EpochCsvHasHeaderColumns) {
  EpochLog e;
  e.epoch = 3;
  const std::string row = format_epoch_csv(e);
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), 6);
  EXPECT_EQ(row.rfind("3,", 0), 0u);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  testing::TempDir dir("ckpt");
  auto m = SSCNNModel::build(tiny(3), 5);
  for (auto* p : m.parameters()) p->value[0] += 0.125;
  save_checkpoint(m, dir / "ck");
  auto back = load_checkpoint(dir / "ck");
  EXPECT_EQ(config_to_json(back.config()), config_to_json(m.config()));
  auto pa = m.parameters(), pb = back.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->value, pb[i]->value);
}

TEST(Checkpoint, MissingParameterFile) {
  testing::TempDir dir("ckpt_missing");
  auto m = SSCNNModel::build(tiny(3), 5);
  save_checkpoint(m, dir / "ck");
  std::size_t removed = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "ck")) {
    if (e.path().extension() == ".sstn" && removed == 0) {
      std::filesystem::remove(e.path());
      ++removed;
    }
  }
  ASSERT_EQ(removed, 1u);
  EXPECT_THROW(load_checkpoint(dir / "ck"), DataError);
  EXPECT_THROW(load_checkpoint(dir / "nowhere"), DataError);
}

}  // namespace
}  // namespace sscnn
