#include "sscnn/refinement.hpp"

#include <cmath>
#include <fstream>

#include "sscnn/error.hpp"

namespace sscnn {

void add_cooccurrence(CooccurrenceCounts& counts, std::size_t scene,
                      const LabelMap& labels, const IgnoreMask& mask) {
  if (scene >= counts.scenes) {
    throw InvalidArgumentError("scene label " + std::to_string(scene) +
                               " out of range");
  }
  std::vector<bool> present(counts.objects, false);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (mask[i]) continue;
    const std::uint16_t l = labels.labels[i];
    if (l >= counts.objects) {
      throw InvalidArgumentError("object label " + std::to_string(l) + " out of range");
    }
    present[l] = true;
  }
  for (std::size_t j = 0; j < counts.objects; ++j) counts.at(scene, j) += present[j];
}

CooccurrenceCounts count_cooccurrence(std::span<const SampleRecord> samples,
                                      std::size_t num_scenes, std::size_t num_objects) {
  if (samples.empty()) throw DataError("cannot count co-occurrences of an empty set");
  CooccurrenceCounts c(num_scenes, num_objects);
  for (const auto& s : samples) add_cooccurrence(c, s.scene, s.labels, s.mask);
  return c;
}

RefinementMatrix build_refinement_matrix(const CooccurrenceCounts& c) {
  const std::size_t ms = c.scenes, mo = c.objects;
  RefinementMatrix r{Tensor({ms, mo}), Tensor({mo}), Tensor({ms, mo})};
  for (std::size_t i = 0; i < ms; ++i) {
    for (std::size_t j = 0; j < mo; ++j) {
      r.tf[i * mo + j] = std::log1p(static_cast<double>(c.at(i, j)));
    }
  }
  std::vector<double> column(mo, 0.0);
  for (std::size_t j = 0; j < mo; ++j) {
    for (std::size_t i = 0; i < ms; ++i) column[j] += r.tf[i * mo + j];
    r.idf[j] = column[j] > 0.0 ? static_cast<double>(ms) / column[j] : 0.0;
  }
  for (std::size_t i = 0; i < ms; ++i) {
    for (std::size_t j = 0; j < mo; ++j) {
      // tf * idf as (M_s tf) / sum, so a lone scene gives exactly 1.
      const double tf_idf =
          column[j] > 0.0 ? static_cast<double>(ms) * r.tf[i * mo + j] / column[j] : 0.0;
      const double w = std::log1p(tf_idf);
      r.w[i * mo + j] = w == 0.0 ? kRefinementFloor : w;
    }
  }
  return r;
}

Tensor scene_prior(const Tensor& p_s, const Tensor& w) {
  if (w.rank() != 2 || p_s.size() != w.dim(0)) {
    throw InvalidShapeError("p_s " + shape_to_string(p_s.shape()) +
                            " does not match W_so " + shape_to_string(w.shape()));
  }
  const std::size_t ms = w.dim(0), mo = w.dim(1);
  Tensor out({mo});
  for (std::size_t i = 0; i < ms; ++i) {
    for (std::size_t k = 0; k < mo; ++k) out[k] += p_s[i] * w[i * mo + k];
  }
  return out;
}

Tensor apply_refinement(const Tensor& p_s, const Tensor& w, const Tensor& p_o) {
  const Tensor prior = scene_prior(p_s, w);
  if (p_o.rank() != 3 || p_o.dim(2) != prior.size()) {
    throw InvalidShapeError("p_o " + shape_to_string(p_o.shape()) +
                            " does not match W_so " + shape_to_string(w.shape()));
  }
  const std::size_t mo = prior.size();
  Tensor out = p_o;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= prior[i % mo];
  return out;
}

Tensor normalize_pixels(const Tensor& scores) {
  if (scores.rank() != 3) throw InvalidShapeError("expected H x W x M scores");
  const std::size_t m = scores.dim(2);
  Tensor out = scores;
  for (std::size_t p = 0; p < out.size(); p += m) {
    double sum = 0.0;
    for (std::size_t k = 0; k < m; ++k) sum += out[p + k];
    if (sum > 0.0) {
      for (std::size_t k = 0; k < m; ++k) out[p + k] /= sum;
    }
  }
  return out;
}

void save_refinement(const std::filesystem::path& path, const Tensor& w,
                     std::span<const std::string> scenes,
                     std::span<const std::string> objects) {
  if (w.rank() != 2 || w.dim(0) != scenes.size() || w.dim(1) != objects.size()) {
    throw InvalidShapeError("class names do not match W_so " +
                            shape_to_string(w.shape()));
  }
  save_tensor(path, w);
  std::ofstream out(path.string() + ".classes.txt", std::ios::trunc);
  if (!out) throw DataError("cannot write class sidecar for " + path.string());
  out << "# rows: scenes\n";
  for (const auto& s : scenes) out << "scene " << s << '\n';
  out << "# columns: objects\n";
  for (const auto& o : objects) out << "object " << o << '\n';
}

Tensor load_refinement(const std::filesystem::path& path) {
  Tensor w = load_tensor(path);
  if (w.rank() != 2) throw DataError("W_so in " + path.string() + " is not a matrix");
  return w;
}

}  // namespace sscnn
