#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sscnn/depth.hpp"
#include "sscnn/labels.hpp"
#include "sscnn/layers.hpp"
#include "sscnn/sample.hpp"
#include "sscnn/tensor.hpp"

namespace sscnn {

enum class ObjectShape { kRectangle, kEllipse };
enum class ObjectTexture { kSolid, kStriped };

struct ObjectStyle {
  ObjectShape shape = ObjectShape::kRectangle;
  std::array<double, 3> color{128.0, 128.0, 128.0};
  /// How far in front of the background plane the object sits, meters.
  double depth_offset = 0.5;
  ObjectTexture texture = ObjectTexture::kSolid;
  /// Side length range in pixels; 0 falls back to the spec-wide range.
  std::size_t min_size = 0;
  std::size_t max_size = 0;
};

/// Generator parameters. Object 0 is the background class and is never
/// placed; its occurrence column is ignored.
struct SyntheticSceneSpec {
  std::vector<std::string> scene_names;
  std::vector<std::string> object_names;
  /// M_s x M_o probability that a scene contains an object.
  std::vector<std::vector<double>> occurrence;
  std::vector<ObjectStyle> palette;  // M_o entries

  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t min_object_size = 8;
  std::size_t max_object_size = 13;
  /// Every placed object keeps at least this share of its pixels visible.
  double min_visible_fraction = 0.4;
  std::size_t max_placement_attempts = 200;

  std::array<double, 3> background_color{110.0, 110.0, 110.0};
  double background_color_jitter = 30.0;
  double background_depth = 3.0;   // meters at the top row
  double background_tilt = 1.0;    // extra depth at the bottom row
  double color_noise = 18.0;       // per-pixel std
  double object_color_jitter = 20.0;  // per-instance uniform half-width
  double depth_noise = 0.005;      // meters, per-pixel std
  /// Striped objects alternate +/- this around their color every
  /// `stripe_width` columns.
  double stripe_amplitude = 50.0;
  std::size_t stripe_width = 2;
  /// Up to this many unlabeled blobs in object colors, drawn behind the
  /// objects and labeled background.
  std::size_t clutter_max_count = 0;
  std::size_t clutter_min_size = 3;
  std::size_t clutter_max_size = 6;
  double clutter_depth_offset = 0.1;
  double missing_depth_rate = 0.01;

  Intrinsics intrinsics{40.0, 40.0, 15.5, 15.5};
  std::uint64_t seed = 0;

  std::size_t num_scenes() const { return scene_names.size(); }
  std::size_t num_objects() const { return object_names.size(); }
  void validate() const;
};

/// Four scenes, eight objects (background plus seven). Each scene has one
/// large signature object (bed, sofa, desk, table) present with probability
/// 0.9; the signatures come in two same-colored pairs that differ only in
/// shape and texture. Three small distractors (chair, lamp, shelf) appear in
/// every scene with probability 0.5.
SyntheticSceneSpec default_synthetic_spec(std::uint64_t seed);

/// Default palette with every scene containing its own object set with
/// certainty (`overlapping` gives scenes 0 and 1 the same set).
SyntheticSceneSpec signature_spec(std::uint64_t seed, bool overlapping);

std::string synthetic_spec_to_json(const SyntheticSceneSpec& spec);
SyntheticSceneSpec synthetic_spec_from_json(const std::string& text);

/// Full-resolution sample as stored on disk.
struct RawSample {
  std::string id;
  std::string split;  // "train" | "test"
  std::size_t scene = 0;
  Tensor rgb;  // H x W x 3, integers in [0, 255]
  DepthImage depth;
  LabelMap labels;  // kIgnoreLabel on the 1-pixel frame
};

/// Deterministic in (spec, index, split).
RawSample generate_sample(const SyntheticSceneSpec& spec, std::size_t index,
                          const std::string& split);

enum class ImageFormat { kSstn, kPng };

struct SampleEntry {
  std::string id;
  std::string split;
  std::size_t scene = 0;
  std::string rgb;  // paths relative to the manifest directory
  std::string depth;
  std::string labels;
};

inline constexpr int kDatasetFormatVersion = 1;

struct DatasetManifest {
  int version = kDatasetFormatVersion;
  ImageFormat image_format = ImageFormat::kSstn;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::string> scene_names;
  std::vector<std::string> object_names;
  Intrinsics intrinsics;
  std::vector<SampleEntry> samples;
  /// Generator parameters echoed verbatim when present.
  std::string generator_json;

  std::size_t count(const std::string& split) const;
};

std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const std::string& text);
DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);

/// Writes `manifest.json` and the sample files under `dir`.
DatasetManifest generate_synthetic_dataset(const SyntheticSceneSpec& spec,
                                           std::size_t count_train,
                                           std::size_t count_test,
                                           const std::filesystem::path& dir,
                                           ImageFormat format = ImageFormat::kSstn);

RawSample read_raw_sample(const std::filesystem::path& root, const DatasetManifest& m,
                          const SampleEntry& entry);
/// Stores a sample under the entry's paths.
void write_raw_sample(const std::filesystem::path& root, const SampleEntry& entry,
                      ImageFormat format, const RawSample& sample);

/// Re-serializes manifest and samples into `dir`.
void write_dataset(const std::filesystem::path& source_manifest,
                   const std::filesystem::path& dir);

/// Bilinear with half-pixel centers and edge clamping; H x W x C.
Tensor resize_image(const Tensor& image, Extent2 target);
/// Nearest neighbor at pixel centers.
LabelMap resize_labels(const LabelMap& labels, Extent2 target);

enum class InputMode { kRgb, kRgbd };

struct LoadOptions {
  InputMode mode = InputMode::kRgb;
  /// Network input size; the source is resized when it differs.
  Extent2 input_size{32, 32};
  /// Segmentation head output size the label maps are resized to.
  Extent2 label_size{8, 8};
  DepthPipelineParams depth;
};

/// Reads samples on demand.
class DatasetReader {
 public:
  DatasetReader(std::filesystem::path manifest_path, LoadOptions options);

  const DatasetManifest& manifest() const { return manifest_; }
  const LoadOptions& options() const { return options_; }
  std::size_t size() const { return manifest_.samples.size(); }
  SampleRecord load(std::size_t index) const;
  std::vector<SampleRecord> load_split(const std::string& split) const;

 private:
  std::filesystem::path root_;
  DatasetManifest manifest_;
  LoadOptions options_;
};

/// Input stack for a raw sample in the requested mode, at the raw size.
Tensor assemble_sample_input(const RawSample& raw, const Intrinsics& k,
                             InputMode mode, const DepthPipelineParams& params);

void write_png_rgb8(const std::filesystem::path& path, const Tensor& rgb);
Tensor read_png_rgb8(const std::filesystem::path& path);
/// Depth in meters stored as 16-bit millimeters; 0 = missing.
void write_png_depth16(const std::filesystem::path& path, const DepthImage& depth);
DepthImage read_png_depth16(const std::filesystem::path& path);

}  // namespace sscnn
