#include <benchmark/benchmark.h>

#include <cmath>

#include "sscnn/depth.hpp"
#include "sscnn/layers.hpp"
#include "sscnn/network.hpp"
#include "sscnn/random.hpp"
#include "sscnn/refinement.hpp"
#include "sscnn/trainer.hpp"

namespace {

using namespace sscnn;

void BM_ConvForward(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  Conv2d conv({16, 32, {3, 3}, {1, 1}, {1, 1}}, 1);
  const Tensor x({size, size, 16}, RandomFill{1.0, 2});
  for (auto _ : state) benchmark::DoNotOptimize(conv.forward(x, Mode::kEval));
}
BENCHMARK(BM_ConvForward)->Arg(16)->Arg(32)->Arg(64);

void BM_ConvBackward(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  Conv2d conv({16, 32, {3, 3}, {1, 1}, {1, 1}}, 1);
  const Tensor x({size, size, 16}, RandomFill{1.0, 2});
  const Tensor g({size, size, 32}, RandomFill{1.0, 3});
  conv.forward(x, Mode::kTrain);
  for (auto _ : state) benchmark::DoNotOptimize(conv.backward(g));
}
BENCHMARK(BM_ConvBackward)->Arg(16)->Arg(32)->Arg(64);

SampleRecord bench_sample(const SSCNNModel& model) {
  Rng rng(7);
  SampleRecord s;
  s.x = Tensor(model.input_shape());
  for (double& v : s.x.data()) v = std::floor(rng.uniform(0.0, 256.0));
  s.scene = 0;
  const Extent2 out = model.seg_output_size();
  s.labels = LabelMap(out.h, out.w);
  for (std::size_t i = 0; i < s.labels.size(); ++i) {
    s.labels.labels[i] = static_cast<std::uint16_t>(rng.index(model.config().num_objects));
  }
  s.mask = ignore_mask_from_labels(s.labels);
  return s;
}

void BM_TrainStep(benchmark::State& state) {
  PresetOptions po;
  po.branch_point = static_cast<std::size_t>(state.range(0));
  SSCNNModel model = SSCNNModel::build(tiny_preset(po), 1);
  const SampleRecord s = bench_sample(model);
  const TrainConfig tc = desk_train_config();
  for (auto _ : state) {
    model.zero_grad();
    const auto r = model.forward(s, Mode::kTrain);
    model.backward(r);
    for (Parameter* p : model.parameters()) sgd_momentum_step(*p, tc);
  }
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(2)->Arg(4);

void BM_Bilateral(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  Rng rng(5);
  DepthImage d(size, size);
  for (double& v : d.values) v = rng.uniform(0.5, 4.0);
  const BilateralParams p;
  for (auto _ : state) benchmark::DoNotOptimize(bilateral_filter(d, p));
}
BENCHMARK(BM_Bilateral)->Arg(64)->Arg(240);

void BM_Normals(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  DepthImage d(size, size);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) d.at(y, x) = 2.0 + 0.01 * static_cast<double>(x);
  }
  const Intrinsics k{100.0, 100.0, size / 2.0, size / 2.0};
  const PointCloud cloud = depth_to_pointcloud(d, k);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_normals(cloud, 5));
}
BENCHMARK(BM_Normals)->Arg(64)->Arg(240);

void BM_Refinement(benchmark::State& state) {
  const std::size_t ms = 13, mo = 23, pixels = static_cast<std::size_t>(state.range(0));
  Rng rng(9);
  CooccurrenceCounts counts(ms, mo);
  for (auto& f : counts.f) f = rng.index(50);
  const Tensor w = build_refinement_matrix(counts).w;
  const Tensor p_s({ms}, 1.0 / static_cast<double>(ms));
  Tensor p_o({pixels, 1, mo});
  for (double& v : p_o.data()) v = rng.uniform(0.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(apply_refinement(p_s, w, p_o));
}
BENCHMARK(BM_Refinement)->Arg(108)->Arg(4096);

}  // namespace

BENCHMARK_MAIN();
