#include "sscnn/depth.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

#include "sscnn/error.hpp"

namespace sscnn {

DepthImage depth_from_tensor(const Tensor& t) {
  if (t.rank() != 2 && !(t.rank() == 3 && t.dim(2) == 1)) {
    throw DataError("depth tensor must be H x W, got " + shape_to_string(t.shape()));
  }
  DepthImage d(t.dim(0), t.dim(1));
  std::copy(t.data().begin(), t.data().end(), d.values.begin());
  return d;
}

Tensor depth_to_tensor(const DepthImage& d) {
  return Tensor({d.height, d.width}, d.values);
}

void Intrinsics::validate() const {
  if (!(fx > 0.0 && fy > 0.0)) {
    throw InvalidArgumentError("intrinsics require fx > 0 and fy > 0");
  }
}

Tensor rescale_depth(const DepthImage& depth) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (depth.missing(i)) continue;
    lo = std::min(lo, depth.values[i]);
    hi = std::max(hi, depth.values[i]);
  }
  if (hi < lo) throw DataError("depth image has no valid pixels");
  Tensor out({depth.height, depth.width});
  if (hi == lo) return out;
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (depth.missing(i)) continue;
    out[i] = (depth.values[i] - lo) / (hi - lo) * 255.0;
  }
  return out;
}

DepthImage bilateral_filter(const DepthImage& depth, const BilateralParams& p) {
  if (!(p.sigma_spatial > 0.0 && p.sigma_range > 0.0)) {
    throw InvalidArgumentError("bilateral sigmas must be positive");
  }
  const long r = static_cast<long>(p.radius);
  const std::size_t side = 2 * p.radius + 1;
  std::vector<double> spatial(side * side);
  for (long dy = -r; dy <= r; ++dy) {
    for (long dx = -r; dx <= r; ++dx) {
      spatial[(dy + r) * side + (dx + r)] =
          std::exp(-static_cast<double>(dx * dx + dy * dy) /
                   (2.0 * p.sigma_spatial * p.sigma_spatial));
    }
  }
  const double range_coeff = -1.0 / (2.0 * p.sigma_range * p.sigma_range);

  DepthImage out(depth.height, depth.width);
  const long h = static_cast<long>(depth.height), w = static_cast<long>(depth.width);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      const std::size_t c = static_cast<std::size_t>(y * w + x);
      if (depth.missing(c)) {
        out.values[c] = depth.values[c];
        continue;
      }
      const double zc = depth.values[c];
      double num = 0.0, den = 0.0;
      for (long dy = -r; dy <= r; ++dy) {
        const long yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        for (long dx = -r; dx <= r; ++dx) {
          const long xx = x + dx;
          if (xx < 0 || xx >= w) continue;
          const std::size_t q = static_cast<std::size_t>(yy * w + xx);
          if (depth.missing(q)) continue;
          const double dz = depth.values[q] - zc;
          const double wgt =
              spatial[(dy + r) * side + (dx + r)] * std::exp(range_coeff * dz * dz);
          num += wgt * depth.values[q];
          den += wgt;
        }
      }
      out.values[c] = num / den;
    }
  }
  return out;
}

PointCloud depth_to_pointcloud(const DepthImage& depth, const Intrinsics& k) {
  k.validate();
  PointCloud pc;
  pc.height = depth.height;
  pc.width = depth.width;
  pc.points.assign(depth.size(), Vec3{0.0, 0.0, 0.0});
  pc.valid.assign(depth.size(), 0);
  for (std::size_t v = 0; v < depth.height; ++v) {
    for (std::size_t u = 0; u < depth.width; ++u) {
      const std::size_t i = v * depth.width + u;
      if (depth.missing(i)) continue;
      const double z = depth.values[i];
      pc.points[i] = {(static_cast<double>(u) - k.cx) * z / k.fx,
                      (static_cast<double>(v) - k.cy) * z / k.fy, z};
      pc.valid[i] = 1;
    }
  }
  return pc;
}

std::array<double, 2> project_point(const Vec3& p, const Intrinsics& k) {
  return {k.fx * p[0] / p[2] + k.cx, k.fy * p[1] / p[2] + k.cy};
}

NormalMap estimate_normals(const PointCloud& cloud, std::size_t window) {
  if (window < 3 || window % 2 == 0) {
    throw InvalidArgumentError("normal window must be odd and >= 3");
  }
  const long half = static_cast<long>(window / 2);
  const long h = static_cast<long>(cloud.height), w = static_cast<long>(cloud.width);
  NormalMap out;
  out.height = cloud.height;
  out.width = cloud.width;
  out.normals.assign(cloud.points.size(), Vec3{0.0, 0.0, 0.0});
  out.valid.assign(cloud.points.size(), 0);

  std::vector<Eigen::Vector3d> neighbors;
  neighbors.reserve(window * window);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver;
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      const std::size_t c = static_cast<std::size_t>(y * w + x);
      if (!cloud.valid[c]) continue;
      neighbors.clear();
      for (long yy = std::max(0L, y - half); yy <= std::min(h - 1, y + half); ++yy) {
        for (long xx = std::max(0L, x - half); xx <= std::min(w - 1, x + half); ++xx) {
          const std::size_t q = static_cast<std::size_t>(yy * w + xx);
          if (!cloud.valid[q]) continue;
          const Vec3& p = cloud.points[q];
          neighbors.emplace_back(p[0], p[1], p[2]);
        }
      }
      if (neighbors.size() < 3) continue;

      Eigen::Vector3d mean = Eigen::Vector3d::Zero();
      for (const auto& p : neighbors) mean += p;
      mean /= static_cast<double>(neighbors.size());
      Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
      for (const auto& p : neighbors) {
        const Eigen::Vector3d d = p - mean;
        cov += d * d.transpose();
      }
      solver.compute(cov);
      // Eigenvalues come back in increasing order.
      Eigen::Vector3d n = solver.eigenvectors().col(0).normalized();
      const Vec3& pc = cloud.points[c];
      const double facing = n.z() != 0.0 ? n.z()
                                         : n.x() * pc[0] + n.y() * pc[1] + n.z() * pc[2];
      if (facing > 0.0) n = -n;
      out.normals[c] = {n.x(), n.y(), n.z()};
      out.valid[c] = 1;
    }
  }
  return out;
}

Tensor assemble_input(const Tensor& rgb, const DepthImage& depth,
                      const Intrinsics& k, const DepthPipelineParams& params) {
  if (rgb.rank() != 3 || rgb.dim(2) != 3 || rgb.dim(0) != depth.height ||
      rgb.dim(1) != depth.width) {
    throw InvalidShapeError("rgb " + shape_to_string(rgb.shape()) +
                            " does not match depth " + std::to_string(depth.height) +
                            "x" + std::to_string(depth.width));
  }
  const Tensor depth_channel = rescale_depth(depth);
  const NormalMap normals = estimate_normals(
      depth_to_pointcloud(bilateral_filter(depth, params.bilateral), k),
      params.normal_window);

  Tensor out({depth.height, depth.width, 7});
  for (std::size_t i = 0; i < depth.size(); ++i) {
    double* px = out.raw() + i * 7;
    px[0] = rgb[i * 3 + 0];
    px[1] = rgb[i * 3 + 1];
    px[2] = rgb[i * 3 + 2];
    px[3] = depth_channel[i];
    for (std::size_t a = 0; a < 3; ++a) px[4 + a] = (normals.normals[i][a] + 1.0) * 127.5;
  }
  return out;
}

}  // namespace sscnn
