#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sscnn/metrics.hpp"

namespace sscnn {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::string render_csv(const Table& t);
/// Space-padded columns with a rule under the header.
std::string render_text(const Table& t);
std::string format_number(double v, int precision = 4);

/// Metrics of one trained model on one split, as written by `eval`.
struct RunMetrics {
  std::string name;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string input = "rgb";
  double scene_acc = 0.0;
  std::optional<double> pixel_acc;
  std::vector<std::optional<double>> scene_per_class;
  std::vector<std::optional<double>> pixel_per_class;
};

RunMetrics run_metrics_from(const std::string& name, std::size_t n, std::uint64_t seed,
                            const std::string& input, const ClassAccuracy& scene,
                            const std::optional<ClassAccuracy>& pixel);
std::string run_metrics_to_json(const RunMetrics& m);
RunMetrics run_metrics_from_json(const std::string& text);

struct SweepRow {
  std::size_t n = 0;
  std::size_t runs = 0;
  double scene_mean = 0.0;
  double scene_std = 0.0;  // population std over runs
  double scene_min = 0.0;
  double scene_max = 0.0;
  std::optional<double> pixel_mean;
};

/// One row per distinct n, ascending.
std::vector<SweepRow> aggregate_sweep(std::span<const RunMetrics> runs);

Table runs_table(std::span<const RunMetrics> runs);
Table sweep_table(std::span<const SweepRow> rows);
/// Per-class unrefined / refined / delta rows followed by the mean row.
Table refinement_table(const ClassAccuracy& unrefined, const ClassAccuracy& refined,
                       std::span<const std::string> class_names);

struct RefinementMetrics {
  std::string name;
  std::vector<std::string> class_names;
  std::vector<std::optional<double>> unrefined;
  std::vector<std::optional<double>> refined;
  double unrefined_mean = 0.0;
  double refined_mean = 0.0;
};

RefinementMetrics refinement_metrics_from(const std::string& name,
                                          const ClassAccuracy& unrefined,
                                          const ClassAccuracy& refined,
                                          std::span<const std::string> class_names);
std::string refinement_metrics_to_json(const RefinementMetrics& m);
RefinementMetrics refinement_metrics_from_json(const std::string& text);
Table refinement_table(const RefinementMetrics& m);

/// Collects `metrics.json` and `refinement.json` from each run directory and
/// writes report.csv, report.txt and sweep.csv (chart data) into `out_dir`.
/// Throws DataError for a directory without either file.
void emit_report(std::span<const std::filesystem::path> run_dirs,
                 const std::filesystem::path& out_dir);

}  // namespace sscnn
