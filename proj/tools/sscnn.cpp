#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sscnn/dataset.hpp"
#include "sscnn/error.hpp"
#include "sscnn/evaluation.hpp"
#include "sscnn/metrics.hpp"
#include "sscnn/model_gradcheck.hpp"
#include "sscnn/occurrence.hpp"
#include "sscnn/refinement.hpp"
#include "sscnn/report.hpp"
#include "sscnn/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sscnn;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Records the invocation and every file it produced.
void write_run_manifest(const fs::path& out, const std::string& command,
                        const std::vector<std::string>& args) {
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(out)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), out).generic_string();
    if (rel != "run.json") files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  json j;
  j["tool"] = "sscnn";
  j["version"] = SSCNN_VERSION;
  j["command"] = command;
  j["args"] = args;
  j["outputs"] = files;
  write_text(out / "run.json", j.dump(2) + "\n");
}

InputMode parse_input(const std::string& s) {
  if (s == "rgb") return InputMode::kRgb;
  if (s == "rgbd") return InputMode::kRgbd;
  throw InvalidArgumentError("--input must be rgb or rgbd, got '" + s + "'");
}

std::string input_name(std::size_t channels) { return channels == 7 ? "rgbd" : "rgb"; }

struct ModelOptions {
  std::string profile = "tiny";
  std::optional<std::size_t> n;
  std::optional<double> alpha;
  std::uint64_t seed = 0;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<std::size_t> batch;
  std::string input = "rgb";
  std::size_t checkpoint_every = 0;
};

void add_model_options(CLI::App* cmd, ModelOptions& o, bool with_n) {
  cmd->add_option("--profile", o.profile, "tiny (desk scale) or paper (210x158 alexnet)")
      ->check(CLI::IsMember({"tiny", "paper"}));
  if (with_n) cmd->add_option("--n", o.n, "branch point: shared trunk layers");
  cmd->add_option("--alpha", o.alpha, "segmentation loss weight");
  cmd->add_option("--seed", o.seed, "initialization and shuffling seed");
  cmd->add_option("--epochs", o.epochs, "training epochs");
  cmd->add_option("--lr", o.lr, "learning rate");
  cmd->add_option("--batch", o.batch, "mini-batch size");
  cmd->add_option("--input", o.input, "rgb (3 channels) or rgbd (7 channels)")
      ->check(CLI::IsMember({"rgb", "rgbd"}));
  cmd->add_option("--checkpoint-every", o.checkpoint_every,
                  "also keep a checkpoint every K epochs");
}

NetworkConfig network_for(const ModelOptions& o, std::size_t n, const DatasetManifest& m) {
  PresetOptions p;
  p.num_scenes = m.scene_names.size();
  p.num_objects = m.object_names.size();
  p.input_channels = parse_input(o.input) == InputMode::kRgbd ? 7 : 3;
  p.branch_point = n;
  if (o.profile == "paper") {
    p.alpha = 1e-3;
    if (o.alpha) p.alpha = *o.alpha;
    return alexnet_preset(p);
  }
  if (o.alpha) p.alpha = *o.alpha;
  return tiny_preset(p);
}

TrainConfig train_config_for(const ModelOptions& o) {
  TrainConfig c = o.profile == "paper" ? paper_train_config() : desk_train_config();
  c.seed = o.seed;
  if (o.epochs) c.epochs = *o.epochs;
  if (o.lr) c.learning_rate = *o.lr;
  if (o.batch) c.batch_size = *o.batch;
  validate_train_config(c);
  return c;
}

LoadOptions load_options_for(const NetworkConfig& c, const SSCNNModel& model) {
  LoadOptions lo;
  lo.mode = c.input_channels == 7 ? InputMode::kRgbd : InputMode::kRgb;
  lo.input_size = {c.input_height, c.input_width};
  lo.label_size = model.seg_output_size();
  return lo;
}

void train_into(const fs::path& data, const fs::path& out, const ModelOptions& o,
                std::size_t n) {
  const DatasetManifest manifest = read_manifest(data);
  const NetworkConfig net = network_for(o, n, manifest);
  const TrainConfig tc = train_config_for(o);
  SSCNNModel model = SSCNNModel::build(net, o.seed);
  DatasetReader reader(data, load_options_for(net, model));
  const std::vector<SampleRecord> train_set = reader.load_split("train");

  fs::create_directories(out);
  write_text(out / "network.json", config_to_json(net) + "\n");
  write_text(out / "train_config.json", train_config_to_json(tc) + "\n");
  std::ofstream log(out / "train_log.csv", std::ios::binary | std::ios::trunc);
  log << kTrainLogHeader << '\n';
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochLog& e) {
    log << format_epoch_csv(e) << '\n';
    std::cerr << "epoch " << e.epoch << "/" << tc.epochs << "  L_ss "
              << format_number(e.l_ss) << "  scene_acc " << format_number(e.scene_acc)
              << "  pixel_acc " << format_number(e.pixel_acc) << "  ("
              << format_number(e.wall_ms / 1000.0, 1) << " s)\n";
  };
  hooks.checkpoint_every = o.checkpoint_every;
  hooks.on_checkpoint = [&](std::size_t epoch) {
    if (epoch == tc.epochs) {
      save_checkpoint(model, out / "checkpoint");
    } else {
      save_checkpoint(model, out / ("checkpoint_epoch" + std::to_string(epoch)));
    }
  };
  train(model, train_set, tc, hooks);
}

fs::path checkpoint_dir(const fs::path& p) {
  if (fs::exists(p / "checkpoint" / "manifest.json")) return p / "checkpoint";
  return p;
}

/// Returns the scene accuracy.
double eval_into(const fs::path& data, const fs::path& model_dir, const fs::path& out,
                 const std::string& split, const std::string& name) {
  const fs::path ckpt = checkpoint_dir(model_dir);
  SSCNNModel model = load_checkpoint(ckpt);
  const NetworkConfig& net = model.config();
  std::uint64_t seed = 0;
  const fs::path tc_path = ckpt.parent_path() / "train_config.json";
  if (fs::exists(tc_path)) seed = train_config_from_json(read_text(tc_path)).seed;

  DatasetReader reader(data, load_options_for(net, model));
  if (reader.manifest().scene_names.size() != net.num_scenes ||
      reader.manifest().object_names.size() != net.num_objects) {
    throw DataError("dataset classes do not match the model");
  }
  const std::vector<SampleRecord> samples = reader.load_split(split);
  const EvalResult r = evaluate(model, samples, true);

  fs::create_directories(out / "predictions");
  json ids = json::array();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    save_tensor(out / "predictions" / (samples[i].id + ".ps.sstn"), r.predictions[i].p_s);
    save_tensor(out / "predictions" / (samples[i].id + ".po.sstn"), r.predictions[i].p_o);
    ids.push_back(samples[i].id);
  }
  json index;
  index["split"] = split;
  index["ids"] = ids;
  write_text(out / "predictions" / "index.json", index.dump(2) + "\n");

  const RunMetrics metrics = run_metrics_from(name, net.branch_point, seed,
                                              input_name(net.input_channels), r.scene,
                                              r.pixel);
  write_text(out / "metrics.json", run_metrics_to_json(metrics));
  write_text(out / "scene_confusion.csv",
             confusion_to_csv(r.scene.confusion, reader.manifest().scene_names));
  if (r.pixel) {
    write_text(out / "pixel_confusion.csv",
               confusion_to_csv(r.pixel->confusion, reader.manifest().object_names));
  }
  for (const auto& w : r.scene.warnings) std::cerr << "warning: scene: " << w << '\n';
  if (r.pixel) {
    for (const auto& w : r.pixel->warnings) std::cerr << "warning: pixel: " << w << '\n';
  }
  std::cout << name << ": n=" << net.branch_point
            << " scene mean class accuracy " << format_number(r.scene.mean);
  if (r.pixel) std::cout << ", pixel " << format_number(r.pixel->mean);
  std::cout << '\n';
  return r.scene.mean;
}

std::vector<SampleRecord> load_labels(const fs::path& data, const std::string& split,
                                      Extent2 label_size) {
  LoadOptions lo;
  const DatasetManifest m = read_manifest(data);
  lo.input_size = {m.height, m.width};
  lo.label_size = label_size;
  return DatasetReader(data, lo).load_split(split);
}

struct OccurrenceSet {
  std::vector<std::vector<double>> vectors;
  std::vector<std::size_t> labels;
};

OccurrenceSet occurrence_set(const fs::path& data, const std::string& split) {
  const DatasetManifest m = read_manifest(data);
  const fs::path root = data.parent_path();
  OccurrenceSet s;
  for (const auto& entry : m.samples) {
    if (entry.split != split) continue;
    const RawSample raw = read_raw_sample(root, m, entry);
    s.vectors.push_back(encode_occurrence(raw.labels, ignore_mask_from_labels(raw.labels),
                                          m.object_names.size()));
    s.labels.push_back(raw.scene);
  }
  if (s.vectors.empty()) throw EmptyEvaluationError("no '" + split + "' samples");
  return s;
}

ClassAccuracy svm_accuracy(const LinearSvm& svm, const OccurrenceSet& s) {
  std::vector<std::size_t> predicted;
  for (const auto& v : s.vectors) predicted.push_back(svm.predict(v));
  return scene_mean_class_accuracy(predicted, s.labels, svm.classes);
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kInvalidConfig:
      return kExitUsage;
    case ErrorKind::kInvalidShape:
    case ErrorKind::kData:
    case ErrorKind::kEmptyEvaluation:
      return kExitData;
    case ErrorKind::kGradientNan:
    case ErrorKind::kNumericDivergence:
      return kExitNumeric;
    case ErrorKind::kContractViolation:
      return 1;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scene classification regularized by semantic segmentation (SS-CNN)"};
  app.require_subcommand(1);
  app.set_version_flag("--version", SSCNN_VERSION);
  app.allow_extras(false);

  std::vector<std::string> args(argv + 1, argv + argc);
  fs::path out, data;
  int status = 0;

  // synth
  auto* synth = app.add_subcommand("synth", "generate the synthetic indoor-scene dataset");
  std::uint64_t synth_seed = 0;
  std::size_t synth_train = 120, synth_test = 300;
  std::string synth_format = "sstn", synth_kind = "default";
  fs::path synth_spec;
  synth->add_option("--out", out, "dataset directory")->required();
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--train", synth_train, "training images");
  synth->add_option("--test", synth_test, "test images");
  synth->add_option("--format", synth_format, "image files: sstn or png")
      ->check(CLI::IsMember({"sstn", "png"}));
  synth->add_option("--signature", synth_kind,
                    "default, distinct (each scene holds exactly its own objects) or "
                    "overlapping (scenes 0 and 1 share a signature)")
      ->check(CLI::IsMember({"default", "distinct", "overlapping"}));
  synth->add_option("--spec", synth_spec, "generator parameters as JSON (overrides --signature)")
      ->check(CLI::ExistingFile);
  synth->callback([&] {
    SyntheticSceneSpec spec;
    if (!synth_spec.empty()) {
      spec = synthetic_spec_from_json(read_text(synth_spec));
      spec.seed = synth_seed;
    } else if (synth_kind == "default") {
      spec = default_synthetic_spec(synth_seed);
    } else {
      spec = signature_spec(synth_seed, synth_kind == "overlapping");
    }
    const DatasetManifest m = generate_synthetic_dataset(
        spec, synth_train, synth_test, out,
        synth_format == "png" ? ImageFormat::kPng : ImageFormat::kSstn);
    std::cout << "wrote " << m.samples.size() << " samples to " << out.string() << '\n';
  });

  // train
  auto* train_cmd = app.add_subcommand("train", "train one SS-CNN-Rn model");
  ModelOptions train_opts;
  train_cmd->add_option("--data", data, "dataset manifest.json")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--out", out, "run directory")->required();
  add_model_options(train_cmd, train_opts, true);
  train_cmd->callback([&] {
    const std::size_t n = train_opts.n.value_or(train_opts.profile == "paper" ? 6 : 2);
    train_into(data, out, train_opts, n);
    std::cout << "checkpoint written to " << (out / "checkpoint").string() << '\n';
  });

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint and store predictions");
  fs::path model_dir;
  std::string split = "test", run_name;
  eval_cmd->add_option("--data", data, "dataset manifest.json")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--model", model_dir, "train run directory or checkpoint directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--out", out, "output directory")->required();
  eval_cmd->add_option("--split", split, "train or test")
      ->check(CLI::IsMember({"train", "test"}));
  eval_cmd->add_option("--name", run_name, "run name used in reports");
  eval_cmd->callback([&] {
    eval_into(data, model_dir, out, split,
              run_name.empty() ? out.filename().string() : run_name);
  });

  // sweep-n
  auto* sweep = app.add_subcommand(
      "sweep-n", "train and evaluate SS-CNN-Rn for several n plus the n=0 baseline");
  ModelOptions sweep_opts;
  std::vector<std::size_t> sweep_ns{2, 4};
  sweep->add_option("--data", data, "dataset manifest.json")
      ->required()
      ->check(CLI::ExistingFile);
  sweep->add_option("--out", out, "output directory")->required();
  sweep->add_option("--n", sweep_ns, "branch points, comma separated")->delimiter(',');
  add_model_options(sweep, sweep_opts, false);
  sweep->callback([&] {
    std::vector<std::size_t> ns = sweep_ns;
    ns.push_back(0);
    std::sort(ns.begin(), ns.end());
    ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
    std::vector<fs::path> dirs;
    for (std::size_t n : ns) {
      const fs::path dir = out / ("n" + std::to_string(n));
      std::cerr << "== n=" << n << '\n';
      train_into(data, dir, sweep_opts, n);
      eval_into(data, dir, dir, "test", "n" + std::to_string(n));
      dirs.push_back(dir);
    }
    emit_report(dirs, out);
    std::cout << '\n' << read_text(out / "report.txt");
  });

  // refine
  auto* refine = app.add_subcommand(
      "refine", "learn W_so on the train split and refine stored test predictions");
  fs::path predictions_dir;
  refine->add_option("--data", data, "dataset manifest.json")
      ->required()
      ->check(CLI::ExistingFile);
  refine->add_option("--predictions", predictions_dir, "directory written by eval")
      ->required()
      ->check(CLI::ExistingDirectory);
  refine->add_option("--out", out, "output directory")->required();
  refine->add_option("--name", run_name, "run name used in reports");
  refine->callback([&] {
    const fs::path index_path = predictions_dir / "predictions" / "index.json";
    json index;
    try {
      index = json::parse(read_text(index_path));
    } catch (const json::exception& e) {
      throw DataError("malformed " + index_path.string() + ": " + e.what());
    }
    const auto ids = index.at("ids").get<std::vector<std::string>>();
    std::vector<Prediction> preds;
    for (const auto& id : ids) {
      preds.push_back({load_tensor(predictions_dir / "predictions" / (id + ".ps.sstn")),
                       load_tensor(predictions_dir / "predictions" / (id + ".po.sstn"))});
    }
    if (preds.empty()) throw EmptyEvaluationError("no stored predictions");
    const Extent2 label_size{preds.front().p_o.dim(0), preds.front().p_o.dim(1)};
    const DatasetManifest manifest = read_manifest(data);
    const std::size_t ms = manifest.scene_names.size(), mo = manifest.object_names.size();

    const std::vector<SampleRecord> train_set = load_labels(data, "train", label_size);
    const RefinementMatrix w = build_refinement_matrix(count_cooccurrence(train_set, ms, mo));
    std::vector<SampleRecord> eval_set =
        load_labels(data, index.at("split").get<std::string>(), label_size);
    std::vector<SampleRecord> ordered;
    for (const auto& id : ids) {
      auto it = std::find_if(eval_set.begin(), eval_set.end(),
                             [&](const SampleRecord& s) { return s.id == id; });
      if (it == eval_set.end()) throw DataError("prediction for unknown sample " + id);
      ordered.push_back(std::move(*it));
    }
    const RefinementEval r = evaluate_refinement(preds, ordered, w.w, mo);

    fs::create_directories(out);
    save_refinement(out / "w_so.sstn", w.w, manifest.scene_names, manifest.object_names);
    const RefinementMetrics m = refinement_metrics_from(
        run_name.empty() ? out.filename().string() : run_name, r.unrefined, r.refined,
        manifest.object_names);
    write_text(out / "refinement.json", refinement_metrics_to_json(m));
    const Table t = refinement_table(m);
    write_text(out / "refinement.csv", render_csv(t));
    std::cout << render_text(t);
  });

  // occurrence-train
  auto* occ_train = app.add_subcommand(
      "occurrence-train", "fit the object-occurrence linear SVM on the train split");
  SvmConfig svm_config;
  occ_train->add_option("--data", data, "dataset manifest.json")
      ->required()
      ->check(CLI::ExistingFile);
  occ_train->add_option("--out", out, "output directory")->required();
  occ_train->add_option("--c", svm_config.c, "hinge loss weight");
  occ_train->add_option("--iterations", svm_config.iterations, "subgradient iterations");
  occ_train->add_option("--step", svm_config.step, "base step size");
  occ_train->callback([&] {
    const OccurrenceSet s = occurrence_set(data, "train");
    const DatasetManifest m = read_manifest(data);
    const LinearSvm svm = train_linear_svm(s.vectors, s.labels, m.scene_names.size(),
                                           svm_config);
    fs::create_directories(out);
    write_text(out / "svm.json", svm_to_json(svm) + "\n");
    std::cout << "train mean class accuracy " << format_number(svm_accuracy(svm, s).mean)
              << '\n';
  });

  // occurrence-eval
  auto* occ_eval = app.add_subcommand("occurrence-eval",
                                      "evaluate the occurrence SVM on ground-truth labels");
  fs::path svm_path;
  occ_eval->add_option("--data", data, "dataset manifest.json")
      ->required()
      ->check(CLI::ExistingFile);
  occ_eval->add_option("--model", svm_path, "svm.json or the directory holding it")
      ->required()
      ->check(CLI::ExistingPath);
  occ_eval->add_option("--out", out, "output directory")->required();
  occ_eval->add_option("--split", split, "train or test")
      ->check(CLI::IsMember({"train", "test"}));
  occ_eval->callback([&] {
    const fs::path file = fs::is_directory(svm_path) ? svm_path / "svm.json" : svm_path;
    const LinearSvm svm = svm_from_json(read_text(file));
    const OccurrenceSet s = occurrence_set(data, split);
    const DatasetManifest m = read_manifest(data);
    const ClassAccuracy acc = svm_accuracy(svm, s);
    fs::create_directories(out);
    json j;
    j["kind"] = "occurrence";
    j["split"] = split;
    j["scene_acc"] = acc.mean;
    j["overall"] = acc.overall;
    json per = json::array();
    for (const auto& v : acc.per_class) per.push_back(v ? json(*v) : json(nullptr));
    j["scene_per_class"] = per;
    write_text(out / "occurrence_metrics.json", j.dump(2) + "\n");
    write_text(out / "scene_confusion.csv", confusion_to_csv(acc.confusion, m.scene_names));
    for (const auto& w : acc.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << "occurrence + linear SVM, " << split << " mean class accuracy "
              << format_number(acc.mean) << '\n';
  });

  // gradcheck
  auto* gradcheck = app.add_subcommand(
      "gradcheck", "finite-difference check of every layer and of L_ss end to end");
  std::string gc_profile = "tiny";
  std::vector<std::size_t> gc_ns{0, 2, 4};
  std::size_t gc_size = 16;
  std::uint64_t gc_seed = 0;
  double gc_eps = 1e-4, gc_tol = 1e-4;
  gradcheck->add_option("--profile", gc_profile, "only tiny is practical")
      ->check(CLI::IsMember({"tiny", "paper"}));
  gradcheck->add_option("--n", gc_ns, "branch points, comma separated")->delimiter(',');
  gradcheck->add_option("--size", gc_size, "square input side");
  gradcheck->add_option("--seed", gc_seed, "parameter and data seed");
  gradcheck->add_option("--epsilon", gc_eps, "central difference step");
  gradcheck->add_option("--tolerance", gc_tol, "maximum relative error");
  gradcheck->add_option("--out", out, "optional directory for gradcheck.csv");
  gradcheck->callback([&] {
    if (gc_profile != "tiny") {
      throw InvalidArgumentError(
          "gradcheck on the paper profile would take days; use --profile tiny");
    }
    Table t{{"n", "layer", "checked", "skipped_kinks", "max_rel_error"}, {}};
    bool ok = true;
    for (std::size_t n : gc_ns) {
      PresetOptions p;
      p.branch_point = n;
      p.input_size = gc_size;
      const ModelGradCheck r = check_model_gradients(tiny_preset(p), gc_seed, gc_eps, gc_tol);
      auto row = [&](const std::string& name, const GradCheckReport& g) {
        t.rows.push_back({std::to_string(n), name, std::to_string(g.checked()),
                          std::to_string(g.skipped_kinks()),
                          format_number(g.max_relative_error, 10)});
      };
      for (const auto& l : r.layers) row(l.layer, l.report);
      row("L_ss", r.end_to_end);
      ok = ok && r.passed();
    }
    std::cout << render_text(t) << (ok ? "all below " : "FAILED: some at or above ")
              << gc_tol << '\n';
    if (!out.empty()) {
      fs::create_directories(out);
      write_text(out / "gradcheck.csv", render_csv(t));
    }
    if (!ok) status = kExitNumeric;
  });

  // report
  auto* report = app.add_subcommand("report", "tabulate eval and refine runs");
  std::vector<fs::path> run_dirs;
  report->add_option("--runs", run_dirs, "run directories")
      ->required()
      ->check(CLI::ExistingDirectory);
  report->add_option("--out", out, "output directory")->required();
  report->callback([&] {
    emit_report(run_dirs, out);
    std::cout << read_text(out / "report.txt");
  });

  try {
    app.parse(argc, argv);
    if (!out.empty() && fs::is_directory(out)) {
      write_run_manifest(out, app.get_subcommands().front()->get_name(), args);
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return status;
}
