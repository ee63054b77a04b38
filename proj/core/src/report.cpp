#include "sscnn/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "sscnn/error.hpp"

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

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << text;
}

json optional_list(const std::vector<std::optional<double>>& v) {
  json j = json::array();
  for (const auto& x : v) j.push_back(x ? json(*x) : json(nullptr));
  return j;
}

std::vector<std::optional<double>> optional_list_from(const json& j) {
  std::vector<std::optional<double>> v;
  for (const auto& x : j) {
    v.push_back(x.is_null() ? std::nullopt : std::optional<double>(x.get<double>()));
  }
  return v;
}

std::string cell(const std::optional<double>& v) {
  return v ? format_number(*v) : std::string("-");
}

std::string delta_cell(const std::optional<double>& a, const std::optional<double>& b) {
  if (!a || !b) return "-";
  const double d = *b - *a;
  return (d >= 0 ? "+" : "") + format_number(d);
}

}  // namespace

std::string format_number(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::string render_csv(const Table& t) {
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    os << '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
  return os.str();
}

std::string render_text(const Table& t) {
  std::vector<std::size_t> width(t.header.size(), 0);
  auto widen = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size() && i < width.size(); ++i) {
      width[i] = std::max(width[i], cells[i].size());
    }
  };
  widen(t.header);
  for (const auto& r : t.rows) widen(r);
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os << "  ";
      os << cells[i] << std::string(width[i] - cells[i].size(), ' ');
    }
    os << '\n';
  };
  line(t.header);
  std::size_t total = 0;
  for (std::size_t w : width) total += w;
  os << std::string(total + 2 * (width.empty() ? 0 : width.size() - 1), '-') << '\n';
  for (const auto& r : t.rows) line(r);
  return os.str();
}

RunMetrics run_metrics_from(const std::string& name, std::size_t n, std::uint64_t seed,
                            const std::string& input, const ClassAccuracy& scene,
                            const std::optional<ClassAccuracy>& pixel) {
  RunMetrics m;
  m.name = name;
  m.n = n;
  m.seed = seed;
  m.input = input;
  m.scene_acc = scene.mean;
  m.scene_per_class = scene.per_class;
  if (pixel) {
    m.pixel_acc = pixel->mean;
    m.pixel_per_class = pixel->per_class;
  }
  return m;
}

std::string run_metrics_to_json(const RunMetrics& m) {
  json j;
  j["kind"] = "eval";
  j["name"] = m.name;
  j["n"] = m.n;
  j["seed"] = m.seed;
  j["input"] = m.input;
  j["scene_acc"] = m.scene_acc;
  j["pixel_acc"] = m.pixel_acc ? json(*m.pixel_acc) : json(nullptr);
  j["scene_per_class"] = optional_list(m.scene_per_class);
  j["pixel_per_class"] = optional_list(m.pixel_per_class);
  return j.dump(2) + "\n";
}

RunMetrics run_metrics_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.value("kind", "") != "eval") throw DataError("not an eval metrics file");
    RunMetrics m;
    m.name = j.at("name").get<std::string>();
    m.n = j.at("n").get<std::size_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.input = j.at("input").get<std::string>();
    m.scene_acc = j.at("scene_acc").get<double>();
    if (!j.at("pixel_acc").is_null()) m.pixel_acc = j.at("pixel_acc").get<double>();
    m.scene_per_class = optional_list_from(j.at("scene_per_class"));
    m.pixel_per_class = optional_list_from(j.at("pixel_per_class"));
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed eval metrics: ") + e.what());
  }
}

std::vector<SweepRow> aggregate_sweep(std::span<const RunMetrics> runs) {
  std::map<std::size_t, std::vector<const RunMetrics*>> by_n;
  for (const auto& r : runs) by_n[r.n].push_back(&r);
  std::vector<SweepRow> rows;
  for (const auto& [n, group] : by_n) {
    SweepRow row;
    row.n = n;
    row.runs = group.size();
    row.scene_min = group.front()->scene_acc;
    row.scene_max = group.front()->scene_acc;
    double sum = 0.0, pixel_sum = 0.0;
    std::size_t pixel_runs = 0;
    for (const RunMetrics* r : group) {
      sum += r->scene_acc;
      row.scene_min = std::min(row.scene_min, r->scene_acc);
      row.scene_max = std::max(row.scene_max, r->scene_acc);
      if (r->pixel_acc) {
        pixel_sum += *r->pixel_acc;
        ++pixel_runs;
      }
    }
    row.scene_mean = sum / static_cast<double>(group.size());
    double var = 0.0;
    for (const RunMetrics* r : group) {
      var += (r->scene_acc - row.scene_mean) * (r->scene_acc - row.scene_mean);
    }
    row.scene_std = std::sqrt(var / static_cast<double>(group.size()));
    if (pixel_runs) row.pixel_mean = pixel_sum / static_cast<double>(pixel_runs);
    rows.push_back(row);
  }
  return rows;
}

Table runs_table(std::span<const RunMetrics> runs) {
  Table t{{"run", "n", "seed", "input", "scene_acc", "pixel_acc"}, {}};
  for (const auto& r : runs) {
    t.rows.push_back({r.name, std::to_string(r.n), std::to_string(r.seed), r.input,
                      format_number(r.scene_acc), cell(r.pixel_acc)});
  }
  return t;
}

Table sweep_table(std::span<const SweepRow> rows) {
  Table t{{"n", "runs", "scene_acc_mean", "scene_acc_std", "scene_acc_min",
           "scene_acc_max", "pixel_acc_mean"},
          {}};
  for (const auto& r : rows) {
    t.rows.push_back({std::to_string(r.n), std::to_string(r.runs),
                      format_number(r.scene_mean), format_number(r.scene_std),
                      format_number(r.scene_min), format_number(r.scene_max),
                      cell(r.pixel_mean)});
  }
  return t;
}

RefinementMetrics refinement_metrics_from(const std::string& name,
                                          const ClassAccuracy& unrefined,
                                          const ClassAccuracy& refined,
                                          std::span<const std::string> class_names) {
  if (class_names.size() != unrefined.per_class.size() ||
      class_names.size() != refined.per_class.size()) {
    throw InvalidArgumentError("class names do not match the accuracy vectors");
  }
  RefinementMetrics m;
  m.name = name;
  m.class_names.assign(class_names.begin(), class_names.end());
  m.unrefined = unrefined.per_class;
  m.refined = refined.per_class;
  m.unrefined_mean = unrefined.mean;
  m.refined_mean = refined.mean;
  return m;
}

std::string refinement_metrics_to_json(const RefinementMetrics& m) {
  json j;
  j["kind"] = "refine";
  j["name"] = m.name;
  j["classes"] = m.class_names;
  j["unrefined"] = optional_list(m.unrefined);
  j["refined"] = optional_list(m.refined);
  j["unrefined_mean"] = m.unrefined_mean;
  j["refined_mean"] = m.refined_mean;
  return j.dump(2) + "\n";
}

RefinementMetrics refinement_metrics_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.value("kind", "") != "refine") throw DataError("not a refinement metrics file");
    RefinementMetrics m;
    m.name = j.at("name").get<std::string>();
    m.class_names = j.at("classes").get<std::vector<std::string>>();
    m.unrefined = optional_list_from(j.at("unrefined"));
    m.refined = optional_list_from(j.at("refined"));
    m.unrefined_mean = j.at("unrefined_mean").get<double>();
    m.refined_mean = j.at("refined_mean").get<double>();
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed refinement metrics: ") + e.what());
  }
}

Table refinement_table(const RefinementMetrics& m) {
  Table t{{"class", "unrefined", "refined", "delta"}, {}};
  for (std::size_t c = 0; c < m.class_names.size(); ++c) {
    t.rows.push_back({m.class_names[c], cell(m.unrefined[c]), cell(m.refined[c]),
                      delta_cell(m.unrefined[c], m.refined[c])});
  }
  t.rows.push_back({"mean", format_number(m.unrefined_mean),
                    format_number(m.refined_mean),
                    delta_cell(m.unrefined_mean, m.refined_mean)});
  return t;
}

Table refinement_table(const ClassAccuracy& unrefined, const ClassAccuracy& refined,
                       std::span<const std::string> class_names) {
  return refinement_table(refinement_metrics_from("", unrefined, refined, class_names));
}

void emit_report(std::span<const fs::path> run_dirs, const fs::path& out_dir) {
  if (run_dirs.empty()) throw DataError("report needs at least one run directory");
  std::vector<RunMetrics> runs;
  std::vector<RefinementMetrics> refinements;
  for (const auto& dir : run_dirs) {
    const fs::path metrics = dir / "metrics.json";
    const fs::path refine = dir / "refinement.json";
    const bool has_metrics = fs::exists(metrics), has_refine = fs::exists(refine);
    if (!has_metrics && !has_refine) {
      throw DataError("missing run: no metrics.json or refinement.json in " +
                      dir.string());
    }
    if (has_metrics) runs.push_back(run_metrics_from_json(read_text(metrics)));
    if (has_refine) {
      refinements.push_back(refinement_metrics_from_json(read_text(refine)));
    }
  }

  fs::create_directories(out_dir);
  std::ostringstream csv, text;
  if (!runs.empty()) {
    const Table rt = runs_table(runs);
    const std::vector<SweepRow> sweep = aggregate_sweep(runs);
    const Table st = sweep_table(sweep);
    csv << "# runs\n" << render_csv(rt) << "\n# sweep by n\n" << render_csv(st);
    text << "Runs\n\n" << render_text(rt) << "\nScene accuracy by branch point n\n\n"
         << render_text(st);
    write_text(out_dir / "sweep.csv", render_csv(st));
  }
  for (const auto& r : refinements) {
    const Table t = refinement_table(r);
    if (csv.tellp() > 0) {
      csv << '\n';
      text << '\n';
    }
    csv << "# refinement " << r.name << '\n' << render_csv(t);
    text << "Pixel accuracy, unrefined vs refined (" << r.name << ")\n\n"
         << render_text(t);
  }
  write_text(out_dir / "report.csv", csv.str());
  write_text(out_dir / "report.txt", text.str());
}

}  // namespace sscnn
