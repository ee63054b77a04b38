#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "sscnn/tensor.hpp"

namespace sscnn {

/// Depth in meters; 0 or NaN marks a missing measurement.
struct DepthImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  DepthImage() = default;
  DepthImage(std::size_t h, std::size_t w, double fill = 0.0)
      : height(h), width(w), values(h * w, fill) {}

  double& at(std::size_t y, std::size_t x) { return values[y * width + x]; }
  double at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
  bool missing(std::size_t i) const { return !(values[i] > 0.0); }
  std::size_t size() const { return values.size(); }
};

DepthImage depth_from_tensor(const Tensor& t);
Tensor depth_to_tensor(const DepthImage& d);

/// Pinhole intrinsics in pixels.
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  void validate() const;
};

using Vec3 = std::array<double, 3>;

struct PointCloud {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Vec3> points;
  std::vector<std::uint8_t> valid;
};

/// Unit normals; invalid entries hold (0, 0, 0).
struct NormalMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Vec3> normals;
  std::vector<std::uint8_t> valid;
};

struct BilateralParams {
  double sigma_spatial = 2.0;  // pixels
  double sigma_range = 0.1;    // meters
  std::size_t radius = 2;
};

struct DepthPipelineParams {
  BilateralParams bilateral;
  std::size_t normal_window = 5;
};

/// Per-image linear map of valid depths onto [0, 255]; missing pixels and
/// constant-depth images map to 0. Throws DataError if every pixel is
/// missing.
Tensor rescale_depth(const DepthImage& depth);

/// Bilateral smoothing over the valid neighbors of each valid pixel inside
/// a (2 radius + 1)^2 window, weights renormalized per pixel.
DepthImage bilateral_filter(const DepthImage& depth, const BilateralParams& params);

/// X = (u - cx) z / fx, Y = (v - cy) z / fy, Z = z.
PointCloud depth_to_pointcloud(const DepthImage& depth, const Intrinsics& k);

/// Pixel coordinates (u, v) of a camera-frame point.
std::array<double, 2> project_point(const Vec3& p, const Intrinsics& k);

/// Least-squares plane normal (smallest-eigenvalue eigenvector of the
/// neighborhood covariance) over the valid points of an odd window. Normals
/// face the camera (nz <= 0). Fewer than three valid neighbors, or an
/// invalid center, leaves the normal missing.
NormalMap estimate_normals(const PointCloud& cloud, std::size_t window);

/// H x W x 7 stack [R, G, B, depth, nx, ny, nz], all in [0, 255]. Normals map
/// through (n + 1) * 127.5.
Tensor assemble_input(const Tensor& rgb, const DepthImage& depth,
                      const Intrinsics& k, const DepthPipelineParams& params);

}  // namespace sscnn
