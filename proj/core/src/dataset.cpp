#include "sscnn/dataset.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <memory>
#include <sstream>

#include "sscnn/error.hpp"
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

const char* texture_name(ObjectTexture t) {
  return t == ObjectTexture::kSolid ? "solid" : "striped";
}

ObjectTexture texture_from_name(const std::string& s) {
  if (s == "solid") return ObjectTexture::kSolid;
  if (s == "striped") return ObjectTexture::kStriped;
  throw InvalidConfigError("unknown object texture '" + s + "'");
}

const char* shape_name(ObjectShape s) {
  return s == ObjectShape::kRectangle ? "rectangle" : "ellipse";
}

ObjectShape shape_from_name(const std::string& s) {
  if (s == "rectangle") return ObjectShape::kRectangle;
  if (s == "ellipse") return ObjectShape::kEllipse;
  throw InvalidConfigError("unknown object shape '" + s + "'");
}

std::uint64_t split_tag(const std::string& split) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : split) h = (h ^ c) * 1099511628211ULL;
  return h;
}

struct Placement {
  std::size_t object = 0;
  std::size_t y0 = 0, x0 = 0, h = 0, w = 0;
  ObjectShape shape = ObjectShape::kRectangle;

  bool covers(std::size_t y, std::size_t x) const {
    if (y < y0 || y >= y0 + h || x < x0 || x >= x0 + w) return false;
    if (shape == ObjectShape::kRectangle) return true;
    const double ry = 0.5 * static_cast<double>(h), rx = 0.5 * static_cast<double>(w);
    const double dy = (static_cast<double>(y - y0) + 0.5 - ry) / ry;
    const double dx = (static_cast<double>(x - x0) + 0.5 - rx) / rx;
    return dy * dy + dx * dx <= 1.0;
  }
};

/// Owner index per pixel (-1 = background) for the placements in order.
std::vector<int> paint(const std::vector<Placement>& placements, std::size_t height,
                       std::size_t width) {
  std::vector<int> owner(height * width, -1);
  for (std::size_t k = 0; k < placements.size(); ++k) {
    const Placement& p = placements[k];
    for (std::size_t y = p.y0; y < p.y0 + p.h; ++y) {
      for (std::size_t x = p.x0; x < p.x0 + p.w; ++x) {
        if (p.covers(y, x)) owner[y * width + x] = static_cast<int>(k);
      }
    }
  }
  return owner;
}

std::size_t footprint(const Placement& p) {
  std::size_t n = 0;
  for (std::size_t y = p.y0; y < p.y0 + p.h; ++y) {
    for (std::size_t x = p.x0; x < p.x0 + p.w; ++x) n += p.covers(y, x);
  }
  return n;
}

double clamp_byte(double v) { return std::clamp(std::round(v), 0.0, 255.0); }

struct PngWriteGuard {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriteGuard() { png_destroy_write_struct(&png, &info); }
};

struct PngReadGuard {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReadGuard() { png_destroy_read_struct(&png, &info, nullptr); }
};

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void png_error_fn(png_structp png, png_const_charp msg) {
  *static_cast<std::string*>(png_get_error_ptr(png)) = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

void write_png(const fs::path& path, std::size_t height, std::size_t width,
               int bit_depth, int color_type, std::vector<png_byte>& bytes,
               std::size_t row_bytes) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw DataError("cannot open for writing: " + path.string());
  std::string err;
  PngWriteGuard g;
  g.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn,
                                  png_warning_fn);
  g.info = png_create_info_struct(g.png);
  std::vector<png_bytep> rows(height);
  for (std::size_t y = 0; y < height; ++y) rows[y] = bytes.data() + y * row_bytes;
  if (setjmp(png_jmpbuf(g.png))) {
    throw DataError("png write failed for " + path.string() + ": " + err);
  }
  png_init_io(g.png, f.get());
  png_set_IHDR(g.png, g.info, static_cast<png_uint_32>(width),
               static_cast<png_uint_32>(height), bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(g.png, g.info);
  png_write_image(g.png, rows.data());
  png_write_end(g.png, nullptr);
}

std::vector<png_byte> read_png(const fs::path& path, int want_depth, int want_color,
                               std::size_t& height, std::size_t& width) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw DataError("cannot open " + path.string());
  std::string err;
  PngReadGuard g;
  g.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn,
                                 png_warning_fn);
  g.info = png_create_info_struct(g.png);
  std::vector<png_byte> bytes;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(g.png))) {
    throw DataError("png decode failed for " + path.string() + ": " + err);
  }
  png_init_io(g.png, f.get());
  png_read_info(g.png, g.info);
  const int depth = png_get_bit_depth(g.png, g.info);
  const int color = png_get_color_type(g.png, g.info);
  if (depth != want_depth || color != want_color) {
    err = "unexpected bit depth or color type";
    png_longjmp(g.png, 1);
  }
  width = png_get_image_width(g.png, g.info);
  height = png_get_image_height(g.png, g.info);
  const std::size_t row_bytes = png_get_rowbytes(g.png, g.info);
  bytes.resize(row_bytes * height);
  rows.resize(height);
  for (std::size_t y = 0; y < height; ++y) rows[y] = bytes.data() + y * row_bytes;
  png_read_image(g.png, rows.data());
  png_read_end(g.png, nullptr);
  return bytes;
}

json intrinsics_json(const Intrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}};
}

Intrinsics intrinsics_from(const json& j) {
  Intrinsics k{j.at("fx").get<double>(), j.at("fy").get<double>(),
               j.at("cx").get<double>(), j.at("cy").get<double>()};
  return k;
}

json array3(const std::array<double, 3>& a) { return json::array({a[0], a[1], a[2]}); }

std::array<double, 3> array3_from(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

}  // namespace

void SyntheticSceneSpec::validate() const {
  const std::size_t ms = num_scenes(), mo = num_objects();
  if (ms < 1) throw InvalidConfigError("synthetic spec needs at least one scene");
  if (mo < 2) throw InvalidConfigError("synthetic spec needs background plus objects");
  if (mo >= kIgnoreLabel) throw InvalidConfigError("too many object classes");
  if (occurrence.size() != ms) {
    throw InvalidConfigError("occurrence table needs one row per scene");
  }
  if (palette.size() != mo) {
    throw InvalidConfigError("palette needs one style per object");
  }
  for (std::size_t i = 0; i < ms; ++i) {
    if (occurrence[i].size() != mo) {
      throw InvalidConfigError("occurrence row " + std::to_string(i) +
                               " has the wrong length");
    }
    bool any = false;
    for (std::size_t j = 0; j < mo; ++j) {
      const double p = occurrence[i][j];
      if (!(p >= 0.0 && p <= 1.0)) {
        throw InvalidConfigError("occurrence probabilities must lie in [0, 1]");
      }
      if (j > 0 && p > 0.0) any = true;
    }
    if (!any) {
      throw InvalidConfigError("scene '" + scene_names[i] +
                               "' has no object with positive probability");
    }
  }
  if (height < 4 || width < 4) throw InvalidConfigError("image too small");
  if (min_object_size < 1 || min_object_size > max_object_size ||
      max_object_size + 2 > std::min(height, width)) {
    throw InvalidConfigError("object size range does not fit the image");
  }
  if (clutter_max_count > 0 &&
      (clutter_min_size < 1 || clutter_min_size > clutter_max_size ||
       clutter_max_size + 2 > std::min(height, width))) {
    throw InvalidConfigError("clutter size range does not fit the image");
  }
  if (!(clutter_depth_offset < background_depth)) {
    throw InvalidConfigError("clutter depth offset puts it behind the camera");
  }
  if (stripe_width < 1) throw InvalidConfigError("stripe_width must be >= 1");
  if (!(min_visible_fraction > 0.0 && min_visible_fraction <= 1.0)) {
    throw InvalidConfigError("min_visible_fraction must be in (0, 1]");
  }
  if (!(background_depth > 0.0)) {
    throw InvalidConfigError("background depth must be positive");
  }
  for (const auto& s : palette) {
    const std::size_t lo = s.min_size ? s.min_size : min_object_size;
    const std::size_t hi = s.max_size ? s.max_size : max_object_size;
    if (lo < 1 || lo > hi || hi + 2 > std::min(height, width)) {
      throw InvalidConfigError("object size range does not fit the image");
    }
    if (!(s.depth_offset < background_depth)) {
      throw InvalidConfigError("object depth offset puts it behind the camera");
    }
  }
  if (!(missing_depth_rate >= 0.0 && missing_depth_rate < 1.0)) {
    throw InvalidConfigError("missing_depth_rate must be in [0, 1)");
  }
  intrinsics.validate();
}

SyntheticSceneSpec default_synthetic_spec(std::uint64_t seed) {
  SyntheticSceneSpec s;
  s.scene_names = {"bedroom", "living_room", "office", "dining_room"};
  s.object_names = {"background", "bed", "sofa", "desk", "table",
                    "chair", "lamp", "shelf"};
  using R = ObjectShape;
  using T = ObjectTexture;
  const std::array<double, 3> red{185.0, 60.0, 60.0}, blue{60.0, 80.0, 190.0};
  const std::size_t sig_lo = 10, sig_hi = 15, other_lo = 5, other_hi = 8;
  s.palette = {
      {R::kRectangle, {110.0, 110.0, 110.0}, 0.0, T::kSolid, 0, 0},
      {R::kRectangle, red, 0.6, T::kSolid, sig_lo, sig_hi},    // bed
      {R::kEllipse, red, 0.6, T::kStriped, sig_lo, sig_hi},    // sofa
      {R::kRectangle, blue, 0.4, T::kSolid, sig_lo, sig_hi},   // desk
      {R::kEllipse, blue, 0.4, T::kStriped, sig_lo, sig_hi},   // table
      {R::kRectangle, {60.0, 165.0, 70.0}, 0.8, T::kSolid, other_lo, other_hi},    // chair
      {R::kEllipse, {200.0, 190.0, 60.0}, 1.0, T::kStriped, other_lo, other_hi},   // lamp
      {R::kRectangle, {150.0, 70.0, 170.0}, 0.2, T::kSolid, other_lo, other_hi},   // shelf
  };
  const double d = 0.5;
  //            bg   bed  sofa desk table chair lamp shelf
  s.occurrence = {
      {0.0, 0.9, 0.0, 0.0, 0.0, d, d, d},  // bedroom
      {0.0, 0.0, 0.9, 0.0, 0.0, d, d, d},  // living room
      {0.0, 0.0, 0.0, 0.9, 0.0, d, d, d},  // office
      {0.0, 0.0, 0.0, 0.0, 0.9, d, d, d},  // dining room
  };
  s.seed = seed;
  return s;
}

SyntheticSceneSpec signature_spec(std::uint64_t seed, bool overlapping) {
  SyntheticSceneSpec s = default_synthetic_spec(seed);
  for (auto& row : s.occurrence) {
    for (double& p : row) p = p > 0.5 ? 1.0 : 0.0;
  }
  if (overlapping) s.occurrence[1] = s.occurrence[0];
  return s;
}

std::string synthetic_spec_to_json(const SyntheticSceneSpec& s) {
  json j;
  j["scene_names"] = s.scene_names;
  j["object_names"] = s.object_names;
  j["occurrence"] = s.occurrence;
  json palette = json::array();
  for (const auto& p : s.palette) {
    palette.push_back({{"shape", shape_name(p.shape)},
                       {"color", array3(p.color)},
                       {"depth_offset", p.depth_offset},
                       {"texture", texture_name(p.texture)},
                       {"min_size", p.min_size},
                       {"max_size", p.max_size}});
  }
  j["palette"] = palette;
  j["height"] = s.height;
  j["width"] = s.width;
  j["min_object_size"] = s.min_object_size;
  j["max_object_size"] = s.max_object_size;
  j["min_visible_fraction"] = s.min_visible_fraction;
  j["max_placement_attempts"] = s.max_placement_attempts;
  j["background_color"] = array3(s.background_color);
  j["background_color_jitter"] = s.background_color_jitter;
  j["background_depth"] = s.background_depth;
  j["background_tilt"] = s.background_tilt;
  j["color_noise"] = s.color_noise;
  j["object_color_jitter"] = s.object_color_jitter;
  j["depth_noise"] = s.depth_noise;
  j["stripe_amplitude"] = s.stripe_amplitude;
  j["stripe_width"] = s.stripe_width;
  j["clutter_max_count"] = s.clutter_max_count;
  j["clutter_min_size"] = s.clutter_min_size;
  j["clutter_max_size"] = s.clutter_max_size;
  j["clutter_depth_offset"] = s.clutter_depth_offset;
  j["missing_depth_rate"] = s.missing_depth_rate;
  j["intrinsics"] = intrinsics_json(s.intrinsics);
  j["seed"] = s.seed;
  return j.dump(2);
}

SyntheticSceneSpec synthetic_spec_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    SyntheticSceneSpec s;
    s.scene_names = j.at("scene_names").get<std::vector<std::string>>();
    s.object_names = j.at("object_names").get<std::vector<std::string>>();
    s.occurrence = j.at("occurrence").get<std::vector<std::vector<double>>>();
    for (const auto& p : j.at("palette")) {
      s.palette.push_back({shape_from_name(p.at("shape").get<std::string>()),
                           array3_from(p.at("color")),
                           p.at("depth_offset").get<double>(),
                           texture_from_name(p.at("texture").get<std::string>()),
                           p.at("min_size").get<std::size_t>(),
                           p.at("max_size").get<std::size_t>()});
    }
    s.height = j.at("height").get<std::size_t>();
    s.width = j.at("width").get<std::size_t>();
    s.min_object_size = j.at("min_object_size").get<std::size_t>();
    s.max_object_size = j.at("max_object_size").get<std::size_t>();
    s.min_visible_fraction = j.at("min_visible_fraction").get<double>();
    s.max_placement_attempts = j.at("max_placement_attempts").get<std::size_t>();
    s.background_color = array3_from(j.at("background_color"));
    s.background_color_jitter = j.at("background_color_jitter").get<double>();
    s.background_depth = j.at("background_depth").get<double>();
    s.background_tilt = j.at("background_tilt").get<double>();
    s.color_noise = j.at("color_noise").get<double>();
    s.object_color_jitter = j.at("object_color_jitter").get<double>();
    s.depth_noise = j.at("depth_noise").get<double>();
    s.stripe_amplitude = j.at("stripe_amplitude").get<double>();
    s.stripe_width = j.at("stripe_width").get<std::size_t>();
    s.clutter_max_count = j.at("clutter_max_count").get<std::size_t>();
    s.clutter_min_size = j.at("clutter_min_size").get<std::size_t>();
    s.clutter_max_size = j.at("clutter_max_size").get<std::size_t>();
    s.clutter_depth_offset = j.at("clutter_depth_offset").get<double>();
    s.missing_depth_rate = j.at("missing_depth_rate").get<double>();
    s.intrinsics = intrinsics_from(j.at("intrinsics"));
    s.seed = j.at("seed").get<std::uint64_t>();
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw InvalidConfigError(std::string("malformed synthetic spec: ") + e.what());
  }
}

RawSample generate_sample(const SyntheticSceneSpec& spec, std::size_t index,
                          const std::string& split) {
  spec.validate();
  const std::size_t h = spec.height, w = spec.width;
  Rng rng(hash_combine(hash_combine(spec.seed, split_tag(split)), index));

  RawSample out;
  out.split = split;
  char id[64];
  std::snprintf(id, sizeof id, "%s_%05zu", split.c_str(), index);
  out.id = id;
  out.scene = rng.index(spec.num_scenes());

  std::vector<std::size_t> objects;
  for (std::size_t j = 1; j < spec.num_objects(); ++j) {
    if (rng.bernoulli(spec.occurrence[out.scene][j])) objects.push_back(j);
  }
  rng.shuffle(objects);

  std::vector<Placement> placed;
  std::vector<std::size_t> areas;
  for (std::size_t obj : objects) {
    bool ok = false;
    for (std::size_t attempt = 0; attempt < spec.max_placement_attempts && !ok;
         ++attempt) {
      Placement p;
      p.object = obj;
      p.shape = spec.palette[obj].shape;
      const ObjectStyle& style = spec.palette[obj];
      const std::size_t lo = style.min_size ? style.min_size : spec.min_object_size;
      const std::size_t hi = style.max_size ? style.max_size : spec.max_object_size;
      p.h = lo + rng.index(hi - lo + 1);
      p.w = lo + rng.index(hi - lo + 1);
      p.y0 = 1 + rng.index(h - 1 - p.h);
      p.x0 = 1 + rng.index(w - 1 - p.w);
      std::vector<Placement> trial = placed;
      trial.push_back(p);
      std::vector<std::size_t> trial_areas = areas;
      trial_areas.push_back(footprint(p));
      const std::vector<int> owner = paint(trial, h, w);
      std::vector<std::size_t> visible(trial.size(), 0);
      for (int o : owner) {
        if (o >= 0) ++visible[static_cast<std::size_t>(o)];
      }
      ok = true;
      for (std::size_t k = 0; k < trial.size(); ++k) {
        if (static_cast<double>(visible[k]) <
            spec.min_visible_fraction * static_cast<double>(trial_areas[k])) {
          ok = false;
        }
      }
      if (ok) {
        placed = std::move(trial);
        areas = std::move(trial_areas);
      }
    }
    if (!ok) {
      throw DataError("cannot place object '" + spec.object_names[obj] + "' in " +
                      out.id + " (seed " + std::to_string(spec.seed) + ") after " +
                      std::to_string(spec.max_placement_attempts) + " attempts");
    }
  }

  const std::vector<int> owner = paint(placed, h, w);

  // Unlabeled clutter sits behind the objects and counts as background.
  std::vector<Placement> clutter(rng.index(spec.clutter_max_count + 1));
  std::vector<std::array<double, 3>> clutter_colors(clutter.size());
  std::vector<ObjectTexture> clutter_textures(clutter.size());
  for (std::size_t k = 0; k < clutter.size(); ++k) {
    Placement& p = clutter[k];
    const std::size_t span = spec.clutter_max_size - spec.clutter_min_size + 1;
    p.h = spec.clutter_min_size + rng.index(span);
    p.w = spec.clutter_min_size + rng.index(span);
    p.y0 = 1 + rng.index(h - 1 - p.h);
    p.x0 = 1 + rng.index(w - 1 - p.w);
    const std::size_t like = 1 + rng.index(spec.num_objects() - 1);
    for (std::size_t c = 0; c < 3; ++c) {
      clutter_colors[k][c] = spec.palette[like].color[c] +
                             rng.uniform(-spec.object_color_jitter, spec.object_color_jitter);
    }
    clutter_textures[k] = rng.bernoulli(0.5) ? ObjectTexture::kStriped : ObjectTexture::kSolid;
  }
  const std::vector<int> clutter_owner = paint(clutter, h, w);

  std::array<double, 3> bg_color;
  for (std::size_t c = 0; c < 3; ++c) {
    bg_color[c] = spec.background_color[c] +
                  rng.uniform(-spec.background_color_jitter, spec.background_color_jitter);
  }

  std::vector<std::array<double, 3>> colors(placed.size());
  for (std::size_t k = 0; k < placed.size(); ++k) {
    for (std::size_t c = 0; c < 3; ++c) {
      colors[k][c] = spec.palette[placed[k].object].color[c] +
                     rng.uniform(-spec.object_color_jitter, spec.object_color_jitter);
    }
  }

  out.rgb = Tensor({h, w, 3});
  out.depth = DepthImage(h, w);
  out.labels = LabelMap(h, w, 0);
  const double rows = static_cast<double>(std::max<std::size_t>(h - 1, 1));
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t i = y * w + x;
      const int o = owner[i];
      double z = spec.background_depth + spec.background_tilt * static_cast<double>(y) / rows;
      const std::array<double, 3>* color = &bg_color;
      double stripe = 0.0;
      if (o < 0 && clutter_owner[i] >= 0) {
        const auto k = static_cast<std::size_t>(clutter_owner[i]);
        z -= spec.clutter_depth_offset;
        color = &clutter_colors[k];
        if (clutter_textures[k] == ObjectTexture::kStriped) {
          stripe = ((x - clutter[k].x0) / spec.stripe_width) % 2 == 0
                       ? spec.stripe_amplitude
                       : -spec.stripe_amplitude;
        }
      }
      if (o >= 0) {
        const Placement& p = placed[static_cast<std::size_t>(o)];
        const double base = spec.background_depth +
                            spec.background_tilt *
                                static_cast<double>(p.y0 + p.h - 1) / rows;
        z = base - spec.palette[p.object].depth_offset;
        color = &colors[static_cast<std::size_t>(o)];
        if (spec.palette[p.object].texture == ObjectTexture::kStriped) {
          stripe = ((x - p.x0) / spec.stripe_width) % 2 == 0 ? spec.stripe_amplitude
                                                             : -spec.stripe_amplitude;
        }
        out.labels.labels[i] = static_cast<std::uint16_t>(p.object);
      }
      for (std::size_t c = 0; c < 3; ++c) {
        out.rgb[i * 3 + c] = clamp_byte((*color)[c] + stripe + spec.color_noise * rng.normal());
      }
      z += spec.depth_noise * rng.normal();
      // Millimeter precision keeps SSTN and PNG storage equivalent.
      z = std::round(z * 1000.0) / 1000.0;
      out.depth.values[i] = rng.bernoulli(spec.missing_depth_rate) ? 0.0 : z;
      if (y == 0 || x == 0 || y + 1 == h || x + 1 == w) {
        out.labels.labels[i] = kIgnoreLabel;
      }
    }
  }
  return out;
}

std::size_t DatasetManifest::count(const std::string& split) const {
  return static_cast<std::size_t>(std::count_if(
      samples.begin(), samples.end(),
      [&](const SampleEntry& e) { return e.split == split; }));
}

std::string manifest_to_json(const DatasetManifest& m) {
  json j;
  j["format"] = "sscnn-dataset";
  j["version"] = m.version;
  j["image_format"] = m.image_format == ImageFormat::kPng ? "png" : "sstn";
  j["height"] = m.height;
  j["width"] = m.width;
  j["scenes"] = m.scene_names;
  j["objects"] = m.object_names;
  j["ignore_label"] = kIgnoreLabel;
  j["intrinsics"] = intrinsics_json(m.intrinsics);
  if (!m.generator_json.empty()) j["generator"] = json::parse(m.generator_json);
  json samples = json::array();
  for (const auto& e : m.samples) {
    samples.push_back({{"id", e.id},
                       {"split", e.split},
                       {"scene", e.scene},
                       {"rgb", e.rgb},
                       {"depth", e.depth},
                       {"labels", e.labels}});
  }
  j["samples"] = samples;
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text) {
  DatasetManifest m;
  try {
    const json j = json::parse(text);
    if (j.value("format", "") != "sscnn-dataset") {
      throw DataError("not a dataset manifest");
    }
    m.version = j.at("version").get<int>();
    if (m.version != kDatasetFormatVersion) {
      throw DataError("dataset manifest version " + std::to_string(m.version) +
                      " is not supported (expected " +
                      std::to_string(kDatasetFormatVersion) + ")");
    }
    const std::string fmt = j.at("image_format").get<std::string>();
    if (fmt != "png" && fmt != "sstn") {
      throw DataError("unknown image format '" + fmt + "'");
    }
    m.image_format = fmt == "png" ? ImageFormat::kPng : ImageFormat::kSstn;
    m.height = j.at("height").get<std::size_t>();
    m.width = j.at("width").get<std::size_t>();
    m.scene_names = j.at("scenes").get<std::vector<std::string>>();
    m.object_names = j.at("objects").get<std::vector<std::string>>();
    m.intrinsics = intrinsics_from(j.at("intrinsics"));
    if (j.contains("generator")) m.generator_json = j.at("generator").dump(2);
    for (const auto& s : j.at("samples")) {
      SampleEntry e;
      e.id = s.at("id").get<std::string>();
      e.split = s.at("split").get<std::string>();
      e.scene = s.at("scene").get<std::size_t>();
      e.rgb = s.at("rgb").get<std::string>();
      e.depth = s.at("depth").get<std::string>();
      e.labels = s.at("labels").get<std::string>();
      if (e.split != "train" && e.split != "test") {
        throw DataError("sample '" + e.id + "' has unknown split '" + e.split + "'");
      }
      if (e.scene >= m.scene_names.size()) {
        throw DataError("sample '" + e.id + "' has scene index " +
                        std::to_string(e.scene) + " >= " +
                        std::to_string(m.scene_names.size()));
      }
      m.samples.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed dataset manifest: ") + e.what());
  }
  return m;
}

DatasetManifest read_manifest(const fs::path& path) {
  try {
    return manifest_from_json(read_text(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_manifest(const fs::path& path, const DatasetManifest& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << manifest_to_json(m);
}

void write_raw_sample(const fs::path& root, const SampleEntry& e, ImageFormat format,
                      const RawSample& s) {
  fs::create_directories((root / e.rgb).parent_path());
  if (format == ImageFormat::kPng) {
    write_png_rgb8(root / e.rgb, s.rgb);
    write_png_depth16(root / e.depth, s.depth);
  } else {
    save_tensor(root / e.rgb, s.rgb);
    save_tensor(root / e.depth, depth_to_tensor(s.depth));
  }
  save_tensor(root / e.labels, labels_to_tensor(s.labels));
}

RawSample read_raw_sample(const fs::path& root, const DatasetManifest& m,
                          const SampleEntry& e) {
  RawSample s;
  s.id = e.id;
  s.split = e.split;
  s.scene = e.scene;
  if (m.image_format == ImageFormat::kPng) {
    s.rgb = read_png_rgb8(root / e.rgb);
    s.depth = read_png_depth16(root / e.depth);
  } else {
    s.rgb = load_tensor(root / e.rgb);
    s.depth = depth_from_tensor(load_tensor(root / e.depth));
  }
  s.labels = labels_from_tensor(load_tensor(root / e.labels));
  const std::string where = " in sample '" + e.id + "'";
  if (s.rgb.rank() != 3 || s.rgb.dim(2) != 3 || s.rgb.dim(0) != m.height ||
      s.rgb.dim(1) != m.width) {
    throw DataError("rgb has shape " + shape_to_string(s.rgb.shape()) + where);
  }
  if (s.depth.height != m.height || s.depth.width != m.width ||
      s.labels.height != m.height || s.labels.width != m.width) {
    throw DataError("depth or label size differs from the manifest" + where);
  }
  for (std::uint16_t l : s.labels.labels) {
    if (l != kIgnoreLabel && l >= m.object_names.size()) {
      throw DataError("object label " + std::to_string(l) + " >= " +
                      std::to_string(m.object_names.size()) + where);
    }
  }
  return s;
}

DatasetManifest generate_synthetic_dataset(const SyntheticSceneSpec& spec,
                                           std::size_t count_train,
                                           std::size_t count_test, const fs::path& dir,
                                           ImageFormat format) {
  spec.validate();
  fs::create_directories(dir / "samples");
  DatasetManifest m;
  m.image_format = format;
  m.height = spec.height;
  m.width = spec.width;
  m.scene_names = spec.scene_names;
  m.object_names = spec.object_names;
  m.intrinsics = spec.intrinsics;
  m.generator_json = synthetic_spec_to_json(spec);
  const char* ext = format == ImageFormat::kPng ? ".png" : ".sstn";
  for (const std::string split : {"train", "test"}) {
    const std::size_t n = split == "train" ? count_train : count_test;
    for (std::size_t i = 0; i < n; ++i) {
      const RawSample s = generate_sample(spec, i, split);
      SampleEntry e;
      e.id = s.id;
      e.split = split;
      e.scene = s.scene;
      e.rgb = "samples/" + s.id + "_rgb" + ext;
      e.depth = "samples/" + s.id + "_depth" + ext;
      e.labels = "samples/" + s.id + "_labels.sstn";
      write_raw_sample(dir, e, format, s);
      m.samples.push_back(std::move(e));
    }
  }
  write_manifest(dir / "manifest.json", m);
  return m;
}

void write_dataset(const fs::path& source_manifest, const fs::path& dir) {
  const DatasetManifest m = read_manifest(source_manifest);
  const fs::path root = source_manifest.parent_path();
  fs::create_directories(dir);
  for (const auto& e : m.samples) {
    write_raw_sample(dir, e, m.image_format, read_raw_sample(root, m, e));
  }
  write_manifest(dir / "manifest.json", m);
}

Tensor resize_image(const Tensor& image, Extent2 target) {
  if (image.rank() != 3) {
    throw InvalidShapeError("resize_image expects H x W x C, got " +
                            shape_to_string(image.shape()));
  }
  if (target.h < 1 || target.w < 1) {
    throw InvalidArgumentError("resize target must be at least 1 x 1");
  }
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  if (target.h == h && target.w == w) return image;
  Tensor out({target.h, target.w, c});
  const double sy = static_cast<double>(h) / static_cast<double>(target.h);
  const double sx = static_cast<double>(w) / static_cast<double>(target.w);
  for (std::size_t y = 0; y < target.h; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0,
                                 static_cast<double>(h - 1));
    const std::size_t y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double ay = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < target.w; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0,
                                   static_cast<double>(w - 1));
      const std::size_t x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double ax = fx - static_cast<double>(x0);
      for (std::size_t k = 0; k < c; ++k) {
        const double v00 = image[(y0 * w + x0) * c + k];
        const double v01 = image[(y0 * w + x1) * c + k];
        const double v10 = image[(y1 * w + x0) * c + k];
        const double v11 = image[(y1 * w + x1) * c + k];
        out[(y * target.w + x) * c + k] =
            (1 - ay) * ((1 - ax) * v00 + ax * v01) + ay * ((1 - ax) * v10 + ax * v11);
      }
    }
  }
  return out;
}

LabelMap resize_labels(const LabelMap& labels, Extent2 target) {
  if (target.h < 1 || target.w < 1) {
    throw InvalidArgumentError("resize target must be at least 1 x 1");
  }
  LabelMap out(target.h, target.w);
  for (std::size_t y = 0; y < target.h; ++y) {
    const std::size_t sy = std::min(labels.height - 1, (2 * y + 1) * labels.height /
                                                           (2 * target.h));
    for (std::size_t x = 0; x < target.w; ++x) {
      const std::size_t sx =
          std::min(labels.width - 1, (2 * x + 1) * labels.width / (2 * target.w));
      out.at(y, x) = labels.at(sy, sx);
    }
  }
  return out;
}

Tensor assemble_sample_input(const RawSample& raw, const Intrinsics& k, InputMode mode,
                             const DepthPipelineParams& params) {
  if (mode == InputMode::kRgb) return raw.rgb;
  return assemble_input(raw.rgb, raw.depth, k, params);
}

DatasetReader::DatasetReader(fs::path manifest_path, LoadOptions options)
    : root_(manifest_path.parent_path()),
      manifest_(read_manifest(manifest_path)),
      options_(options) {}

SampleRecord DatasetReader::load(std::size_t index) const {
  if (index >= manifest_.samples.size()) {
    throw InvalidArgumentError("sample index out of range");
  }
  const RawSample raw = read_raw_sample(root_, manifest_, manifest_.samples[index]);
  SampleRecord r;
  r.id = raw.id;
  r.scene = raw.scene;
  r.x = resize_image(
      assemble_sample_input(raw, manifest_.intrinsics, options_.mode, options_.depth),
      options_.input_size);
  r.labels = resize_labels(raw.labels, options_.label_size);
  r.mask = ignore_mask_from_labels(r.labels);
  return r;
}

std::vector<SampleRecord> DatasetReader::load_split(const std::string& split) const {
  std::vector<SampleRecord> out;
  for (std::size_t i = 0; i < manifest_.samples.size(); ++i) {
    if (manifest_.samples[i].split == split) out.push_back(load(i));
  }
  return out;
}

void write_png_rgb8(const fs::path& path, const Tensor& rgb) {
  if (rgb.rank() != 3 || rgb.dim(2) != 3) {
    throw InvalidShapeError("png rgb expects H x W x 3");
  }
  std::vector<png_byte> bytes(rgb.size());
  for (std::size_t i = 0; i < rgb.size(); ++i) {
    bytes[i] = static_cast<png_byte>(clamp_byte(rgb[i]));
  }
  write_png(path, rgb.dim(0), rgb.dim(1), 8, PNG_COLOR_TYPE_RGB, bytes, rgb.dim(1) * 3);
}

Tensor read_png_rgb8(const fs::path& path) {
  std::size_t h = 0, w = 0;
  const auto bytes = read_png(path, 8, PNG_COLOR_TYPE_RGB, h, w);
  Tensor out({h, w, 3});
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = bytes[i];
  return out;
}

void write_png_depth16(const fs::path& path, const DepthImage& depth) {
  std::vector<png_byte> bytes(depth.size() * 2);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const double mm = depth.missing(i) ? 0.0 : std::round(depth.values[i] * 1000.0);
    const auto v = static_cast<std::uint16_t>(std::clamp(mm, 0.0, 65535.0));
    bytes[2 * i] = static_cast<png_byte>(v >> 8);
    bytes[2 * i + 1] = static_cast<png_byte>(v & 0xff);
  }
  write_png(path, depth.height, depth.width, 16, PNG_COLOR_TYPE_GRAY, bytes,
            depth.width * 2);
}

DepthImage read_png_depth16(const fs::path& path) {
  std::size_t h = 0, w = 0;
  const auto bytes = read_png(path, 16, PNG_COLOR_TYPE_GRAY, h, w);
  DepthImage out(h, w);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const unsigned v = (static_cast<unsigned>(bytes[2 * i]) << 8) | bytes[2 * i + 1];
    out.values[i] = static_cast<double>(v) / 1000.0;
  }
  return out;
}

}  // namespace sscnn
