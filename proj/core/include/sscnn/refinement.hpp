#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sscnn/labels.hpp"
#include "sscnn/sample.hpp"
#include "sscnn/tensor.hpp"

namespace sscnn {

/// Entries of W_so that evaluate to zero are replaced by this value.
inline constexpr double kRefinementFloor = 1e-2;

/// M_s x M_o image-level presence counts.
struct CooccurrenceCounts {
  std::size_t scenes = 0;
  std::size_t objects = 0;
  std::vector<std::uint64_t> f;

  CooccurrenceCounts() = default;
  CooccurrenceCounts(std::size_t ms, std::size_t mo) : scenes(ms), objects(mo), f(ms * mo, 0) {}
  std::uint64_t& at(std::size_t i, std::size_t j) { return f[i * objects + j]; }
  std::uint64_t at(std::size_t i, std::size_t j) const { return f[i * objects + j]; }
};

struct RefinementMatrix {
  Tensor tf;   // M_s x M_o
  Tensor idf;  // M_o
  Tensor w;    // M_s x M_o, W_so
};

/// f_ij = number of images of scene i with at least one non-ignored pixel of
/// object j. Throws DataError on an empty set.
CooccurrenceCounts count_cooccurrence(std::span<const SampleRecord> samples,
                                      std::size_t num_scenes, std::size_t num_objects);
void add_cooccurrence(CooccurrenceCounts& counts, std::size_t scene,
                      const LabelMap& labels, const IgnoreMask& mask);

/// tf = ln(1 + f), idf_j = M_s / sum_i tf_ij (0 for an all-zero column),
/// w = ln(1 + tf idf), zeros floored to kRefinementFloor.
RefinementMatrix build_refinement_matrix(const CooccurrenceCounts& counts);

/// p_so = p_s W_so.
Tensor scene_prior(const Tensor& p_s, const Tensor& w_so);

/// p_o[i, j, k] * p_so[k], unnormalized.
Tensor apply_refinement(const Tensor& p_s, const Tensor& w_so, const Tensor& p_o);

/// Rescales every pixel's scores to sum to 1.
Tensor normalize_pixels(const Tensor& scores);

/// W_so as SSTN at `path` plus `<path>.classes.txt` naming rows and columns.
void save_refinement(const std::filesystem::path& path, const Tensor& w_so,
                     std::span<const std::string> scene_names,
                     std::span<const std::string> object_names);
Tensor load_refinement(const std::filesystem::path& path);

}  // namespace sscnn
