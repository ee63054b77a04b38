#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "sscnn/dataset.hpp"
#include "sscnn/error.hpp"
#include "test_support.hpp"

namespace sscnn {
namespace {

namespace fs = std::filesystem;

TEST(Synthetic, DefaultSpecIsValid) {
  const SyntheticSceneSpec s = default_synthetic_spec(0);
  EXPECT_NO_THROW(s.validate());
  EXPECT_EQ(s.num_scenes(), 4u);
  EXPECT_EQ(s.num_objects(), 8u);
  const auto back = synthetic_spec_from_json(synthetic_spec_to_json(s));
  EXPECT_EQ(synthetic_spec_to_json(back), synthetic_spec_to_json(s));
}

TEST(Synthetic, InvalidSpec) {
  SyntheticSceneSpec s = default_synthetic_spec(0);
  s.occurrence[0][1] = 1.5;
  EXPECT_THROW(s.validate(), InvalidConfigError);
}

TEST(Synthetic, SampleShapesAndFrame) {
  const SyntheticSceneSpec spec = default_synthetic_spec(3);
  const RawSample s = generate_sample(spec, 5, "train");
  EXPECT_EQ(s.rgb.shape(), (Shape{32, 32, 3}));
  EXPECT_EQ(s.depth.size(), 32u * 32u);
  for (std::size_t x = 0; x < 32; ++x) {
    EXPECT_EQ(s.labels.at(0, x), kIgnoreLabel);
    EXPECT_EQ(s.labels.at(31, x), kIgnoreLabel);
  }
  for (double v : s.rgb.data()) {
    EXPECT_EQ(v, std::floor(v));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 255.0);
  }
}

TEST(Synthetic, OccurrenceFrequenciesMatchSpec) {
  const SyntheticSceneSpec spec = default_synthetic_spec(1);
  const std::size_t ms = spec.num_scenes(), mo = spec.num_objects();
  std::vector<std::size_t> per_scene(ms, 0);
  std::vector<std::size_t> present(ms * mo, 0);
  for (std::size_t i = 0; i < 4000; ++i) {
    const RawSample s = generate_sample(spec, i, "train");
    ++per_scene[s.scene];
    std::vector<bool> seen(mo, false);
    for (auto l : s.labels.labels) {
      if (l != kIgnoreLabel) seen[l] = true;
    }
    for (std::size_t j = 0; j < mo; ++j) present[s.scene * mo + j] += seen[j];
  }
  for (std::size_t i = 0; i < ms; ++i) {
    ASSERT_GE(per_scene[i], 800u);
    for (std::size_t j = 1; j < mo; ++j) {
      const double freq =
          static_cast<double>(present[i * mo + j]) / static_cast<double>(per_scene[i]);
      const double p = spec.occurrence[i][j];
      if (p == 0.0) {
        EXPECT_EQ(present[i * mo + j], 0u) << spec.object_names[j];
      } else {
        EXPECT_NEAR(freq, p, 0.05) << spec.scene_names[i] << "/" << spec.object_names[j];
      }
    }
  }
}

TEST(Synthetic, GenerationIsByteIdentical) {
  testing::TempDir a("ds_a"), b("ds_b");
  const SyntheticSceneSpec spec = default_synthetic_spec(7);
  generate_synthetic_dataset(spec, 6, 4, a.path());
  generate_synthetic_dataset(spec, 6, 4, b.path());
  EXPECT_TRUE(testing::trees_identical(a.path(), b.path()));
  testing::TempDir c("ds_c");
  generate_synthetic_dataset(default_synthetic_spec(8), 6, 4, c.path());
  EXPECT_FALSE(testing::trees_identical(a.path(), c.path()));
}

TEST(Synthetic, RoundTripIsByteIdentical) {
  for (ImageFormat f : {ImageFormat::kSstn, ImageFormat::kPng}) {
    testing::TempDir a("rt_a"), b("rt_b");
    generate_synthetic_dataset(default_synthetic_spec(2), 5, 3, a.path(), f);
    write_dataset(a / "manifest.json", b.path());
    EXPECT_TRUE(testing::trees_identical(a.path(), b.path()));
  }
}

TEST(Synthetic, SplitsAreDisjoint) {
  testing::TempDir dir("splits");
  const DatasetManifest m =
      generate_synthetic_dataset(default_synthetic_spec(4), 10, 10, dir.path());
  EXPECT_EQ(m.count("train"), 10u);
  EXPECT_EQ(m.count("test"), 10u);
  std::set<std::string> paths;
  std::set<std::vector<std::uint8_t>> contents;
  for (const auto& e : m.samples) {
    EXPECT_TRUE(paths.insert(e.rgb).second);
    EXPECT_TRUE(contents.insert(testing::read_bytes(dir / e.rgb)).second);
  }
}

TEST(Resize, SameSizeIsIdentity) {
  const Tensor img({5, 7, 3}, RandomFill{100.0, 1});
  const Tensor r = resize_image(img, {5, 7});
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(r[i], img[i], 1e-12);
  LabelMap l(5, 7, 2);
  l.at(0, 0) = kIgnoreLabel;
  EXPECT_EQ(resize_labels(l, {5, 7}), l);
}

TEST(Resize, ConstantStaysConstant) {
  EXPECT_EQ(resize_labels(LabelMap(8, 8, 4), {4, 4}), LabelMap(4, 4, 4));
  const Tensor r = resize_image(Tensor({8, 6, 2}, 3.5), {3, 5});
  for (double v : r.data()) EXPECT_NEAR(v, 3.5, 1e-12);
}

TEST(Resize, NearestNeverInventsClasses) {
  LabelMap l(6, 6, 1);
  l.at(2, 3) = 4;
  l.at(5, 5) = kIgnoreLabel;
  for (Extent2 t : {Extent2{3, 3}, Extent2{12, 9}, Extent2{1, 1}}) {
    for (auto v : resize_labels(l, t).labels) {
      EXPECT_TRUE(v == 1 || v == 4 || v == kIgnoreLabel);
    }
  }
  EXPECT_THROW(resize_image(Tensor({2, 2, 1}), {0, 2}), InvalidArgumentError);
}

TEST(Png, RoundTrip) {
  testing::TempDir dir("png");
  Tensor rgb({4, 5, 3});
  for (std::size_t i = 0; i < rgb.size(); ++i) rgb[i] = static_cast<double>((i * 37) % 256);
  write_png_rgb8(dir / "a.png", rgb);
  EXPECT_EQ(read_png_rgb8(dir / "a.png"), rgb);

  DepthImage d(3, 3, 1.234);
  d.at(1, 1) = 0.0;
  write_png_depth16(dir / "d.png", d);
  const DepthImage back = read_png_depth16(dir / "d.png");
  EXPECT_EQ(back.at(1, 1), 0.0);
  EXPECT_NEAR(back.at(0, 0), 1.234, 5e-4);
}

TEST(Reader, ChannelsPerMode) {
  testing::TempDir dir("reader");
  generate_synthetic_dataset(default_synthetic_spec(5), 3, 2, dir.path());
  LoadOptions rgb;
  DatasetReader a(dir / "manifest.json", rgb);
  const SampleRecord s = a.load(0);
  EXPECT_EQ(s.x.shape(), (Shape{32, 32, 3}));
  EXPECT_EQ(s.labels.height, 8u);
  EXPECT_EQ(a.load_split("test").size(), 2u);

  LoadOptions rgbd;
  rgbd.mode = InputMode::kRgbd;
  DatasetReader b(dir / "manifest.json", rgbd);
  EXPECT_EQ(b.load(0).x.shape(), (Shape{32, 32, 7}));
}

TEST(Reader, EmptyTestSplitLoads) {
  testing::TempDir dir("reader_empty");
  generate_synthetic_dataset(default_synthetic_spec(5), 3, 0, dir.path());
  DatasetReader r(dir / "manifest.json", LoadOptions{});
  EXPECT_TRUE(r.load_split("test").empty());
}

TEST(Reader, CorruptedFileNamesPath) {
  testing::TempDir dir("reader_bad");
  const DatasetManifest m =
      generate_synthetic_dataset(default_synthetic_spec(5), 2, 0, dir.path());
  const fs::path victim = dir / m.samples[0].labels;
  fs::resize_file(victim, fs::file_size(victim) / 2);
  DatasetReader r(dir / "manifest.json", LoadOptions{});
  try {
    r.load(0);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(victim.filename().string()), std::string::npos)
        << e.what();
  }
  EXPECT_THROW(DatasetReader(dir / "missing.json", LoadOptions{}), DataError);
}

}  // namespace
}  // namespace sscnn
