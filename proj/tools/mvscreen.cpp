// mvscreen: data generation, training, evaluation, prediction, saliency and
// sweep experiments for the four-view screening classifier.

#include "mvscreen/checkpoint.hpp"
#include "mvscreen/config.hpp"
#include "mvscreen/manifest.hpp"
#include "mvscreen/report.hpp"
#include "mvscreen/saliency.hpp"
#include "mvscreen/sweep.hpp"
#include "mvscreen/synthetic.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace mvscreen;

namespace {

/// Flags that map one-to-one onto config keys. Only flags given on the
/// command line override the config file.
struct Overrides {
  std::map<std::string, std::string> values;
  std::vector<std::pair<CLI::Option*, std::string>> options;

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    options.emplace_back(app->add_option(flag, values[key], help), key);
  }
  void apply(RunConfig& config) const {
    for (const auto& [option, key] : options) {
      if (option->count() > 0) config.set(key, values.at(key));
    }
  }
};

void add_training_flags(CLI::App* app, Overrides& o) {
  o.add(app, "--seed", "seed", "Root seed");
  o.add(app, "--scale", "scale", "Model resolution: 1, 1/2, 1/4 or 1/8");
  o.add(app, "--lr", "learning_rate", "Adam learning rate");
  o.add(app, "--epochs", "max_epochs", "Maximum number of epochs");
  o.add(app, "--batch-size", "batch_size", "Exams per mini-batch");
  o.add(app, "--fraction", "data_fraction", "Share of training exams used");
  o.add(app, "--width-divisor", "width_divisor", "Divide every column's map count by this");
  o.add(app, "--hidden-units", "hidden_units", "Width of the fusion hidden layer");
  o.add(app, "--stop-at", "stop_at_val_macauc", "Stop once validation macAUC reaches this (0 = off)");
  o.add(app, "--validate-on", "validate_on", "Split used for checkpoint selection: validation or train");
}

RunConfig resolve_config(const std::string& config_path, const Overrides& overrides) {
  RunConfig config;
  if (!config_path.empty()) config = load_config(config_path);
  overrides.apply(config);
  config.validate();
  return config;
}

struct Dataset {
  std::vector<data::Exam> exams;
  data::DatasetInfo info;
};

Dataset load_dataset(const fs::path& dir) {
  if (dir.empty()) throw std::invalid_argument("no data directory given (--data-dir or data_dir=)");
  Dataset d;
  d.info = data::read_dataset_info(dir);
  d.exams = data::load_manifest(dir / "manifest.jsonl");
  return d;
}

const std::vector<data::Exam>& pick_split(const data::DatasetSplit& split, const std::string& name) {
  if (name == "train") return split.train;
  if (name == "validation") return split.validation;
  if (name == "test") return split.test;
  throw std::invalid_argument("unknown split '" + name + "' (expected train, validation or test)");
}

const data::Exam& find_exam(const std::vector<data::Exam>& exams, const std::string& id) {
  for (const auto& e : exams) {
    if (e.exam_id == id) return e;
  }
  throw std::invalid_argument("exam '" + id + "' is not in the manifest");
}

std::array<double, 3> parse_mix(const std::string& text) {
  std::array<double, 3> mix{};
  std::istringstream in(text);
  std::string item;
  std::size_t i = 0;
  while (std::getline(in, item, ',')) {
    if (i == 3) throw std::invalid_argument("--class-mix needs exactly three values");
    std::size_t used = 0;
    mix[i++] = std::stod(item, &used);
    if (used != item.size()) throw std::invalid_argument("--class-mix: bad number '" + item + "'");
  }
  if (i != 3) throw std::invalid_argument("--class-mix needs exactly three values");
  return mix;
}

void print_epoch(const train::EpochLog& e) {
  std::printf("epoch %3d  loss %.4f  val AUC %.3f %.3f %.3f  macAUC %.4f%s\n", e.epoch, e.train_loss,
              e.val_auc[0], e.val_auc[1], e.val_auc[2], e.val_mac_auc, e.checkpoint ? "  *" : "");
  std::fflush(stdout);
}

// ---------------------------------------------------------------- commands

struct GenDataArgs {
  std::string out;
  int n_exams = 100;
  std::uint64_t seed = 0;
  std::string scale = "1";
  std::string class_mix = "13,46,41";
  int margin = 0;
  double repeat_rate = 0.1;
  double extra_rate = 0.05;
};

int run_gen_data(const GenDataArgs& a) {
  if (a.n_exams < 30) {
    throw std::invalid_argument("--n-exams must be at least 30, got " + std::to_string(a.n_exams));
  }
  data::SyntheticDatasetSpec spec;
  spec.n_exams = a.n_exams;
  spec.seed = a.seed;
  spec.image.scale = data::Scale::parse(a.scale);
  spec.image.margin = a.margin;
  spec.class_mix = parse_mix(a.class_mix);
  spec.repeat_patient_rate = a.repeat_rate;
  spec.extra_image_rate = a.extra_rate;
  const auto exams = data::generate_synthetic_dataset(spec);
  data::write_dataset(exams, a.out);
  data::write_dataset_info({spec.image.scale, a.seed, a.n_exams}, a.out);
  const auto counts = data::class_counts(a.n_exams, spec.class_mix);
  const auto extent = data::synthetic_extent(spec.image);
  std::printf("wrote %d exams (%d/%d/%d) at x%s, %lldx%lld pixels, to %s\n", a.n_exams, counts[0],
              counts[1], counts[2], spec.image.scale.str().c_str(), static_cast<long long>(extent[0]),
              static_cast<long long>(extent[1]), a.out.c_str());
  return 0;
}

struct TrainArgs {
  std::string config;
  std::string data_dir;
  std::string out;
};

int run_train(const TrainArgs& a, const Overrides& o) {
  RunConfig config = resolve_config(a.config, o);
  if (!a.data_dir.empty()) config.data_dir = a.data_dir;
  if (!a.out.empty()) config.out_dir = a.out;
  if (config.out_dir.empty()) throw std::invalid_argument("no output directory given (--out or out_dir=)");
  const Dataset d = load_dataset(config.data_dir);
  const auto split = data::split_by_patient(d.exams, config.split);
  const auto& selection = config.validate_on == "train" ? split.train : split.validation;
  fs::create_directories(config.out_dir);
  save_config(config, config.out_dir / "config.txt");
  std::printf("train %zu / validation %zu / test %zu exams, data at x%s, model at x%s\n",
              split.train.size(), split.validation.size(), split.test.size(),
              d.info.scale.str().c_str(), config.train.scale.str().c_str());
  train::TrainOptions options;
  options.out_dir = config.out_dir;
  options.on_epoch = print_epoch;
  const auto result = train::train(split.train, selection, config.train, d.info.scale, options);
  std::printf("best epoch %d, validation macAUC %.6f, checkpoint %s\n", result.best_epoch,
              result.best_val_mac_auc, (config.out_dir / "best.mvdc").c_str());
  return 0;
}

struct EvaluateArgs {
  std::string config;
  std::string checkpoint;
  std::string data_dir;
  std::string split = "test";
  std::string out;
  bool centered = false;
};

int run_evaluate(const EvaluateArgs& a, const Overrides& o) {
  RunConfig config = resolve_config(a.config, o);
  if (!a.data_dir.empty()) config.data_dir = a.data_dir;
  const auto params = model::load_checkpoint(a.checkpoint);
  const Dataset d = load_dataset(config.data_dir);
  const auto split = data::split_by_patient(d.exams, config.split);
  const auto& selection = config.validate_on == "train" ? split.train : split.validation;
  const data::PipelineConfig pipeline{d.info.scale, params.config.scale};
  auto evaluation = config.evaluation();
  evaluation.centered = a.centered;
  const auto result = train::evaluate(params, selection, pick_split(split, a.split), pipeline, evaluation);

  const std::vector<report::ReportColumn> columns{{a.split, result.report}};
  std::cout << report::format_results_table("AUC", columns);
  if (const auto& hc = result.report.high_confidence) {
    std::printf("n=%d  kept %.3f %.3f %.3f  macAUC %.9f\n", result.report.n, hc->kept_fraction[0],
                hc->kept_fraction[1], hc->kept_fraction[2], result.report.overall.mac_auc);
  } else {
    std::printf("n=%d  HC-macAUC unavailable (%s)  macAUC %.9f\n", result.report.n,
                result.hc_unavailable.c_str(), result.report.overall.mac_auc);
  }
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    report::write_results_csv(fs::path(a.out) / "metrics.csv", "split", columns);
    std::vector<report::PredictionRow> rows;
    for (std::size_t i = 0; i < result.exams.size(); ++i) {
      rows.push_back({result.exams[i].exam_id, result.predictions[i], result.exams[i].label});
    }
    report::write_predictions(fs::path(a.out) / "predictions.csv", rows);
  }
  return 0;
}

struct PredictArgs {
  std::string checkpoint;
  std::string data_dir;
  std::string manifest;
  std::vector<std::string> exam_ids;
  int tta_crops = 10;
  std::uint64_t seed = 0;
  std::string out;
};

int run_predict(const PredictArgs& a) {
  if (a.tta_crops < 1) throw std::invalid_argument("--tta-crops must be >= 1");
  const auto params = model::load_checkpoint(a.checkpoint);
  std::vector<data::Exam> exams;
  data::Scale native;
  if (!a.manifest.empty()) {
    exams = data::load_manifest(a.manifest);
    native = data::read_dataset_info(fs::path(a.manifest).parent_path()).scale;
  } else {
    const Dataset d = load_dataset(a.data_dir);
    native = d.info.scale;
    for (const auto& id : a.exam_ids) exams.push_back(find_exam(d.exams, id));
  }
  const data::PipelineConfig pipeline{native, params.config.scale};
  const auto predictions = train::predict_tta_set(exams, params, pipeline, a.tta_crops, a.seed);
  std::vector<report::PredictionRow> rows;
  for (std::size_t i = 0; i < exams.size(); ++i) rows.push_back({exams[i].exam_id, predictions[i], exams[i].label});
  if (a.out.empty()) {
    report::write_predictions(std::cout, rows);
  } else {
    report::write_predictions(a.out, rows);
  }
  return 0;
}

struct SaliencyArgs {
  std::string checkpoint;
  std::string data_dir;
  std::string exam_id;
  std::string out_dir;
  double percentile = 99.0;
};

int run_saliency(const SaliencyArgs& a) {
  const auto params = model::load_checkpoint(a.checkpoint);
  const Dataset d = load_dataset(a.data_dir);
  const data::Exam& exam = find_exam(d.exams, a.exam_id);
  const data::PipelineConfig pipeline{d.info.scale, params.config.scale};
  const auto result = saliency::exam_saliency(exam, params, pipeline);
  // The validation-mode crop uses the earliest image of each view.
  Rng unused(0);
  const auto records = data::select_image_per_view(exam, data::Mode::validation, unused);
  for (std::size_t v = 0; v < 4; ++v) {
    fs::path target;
    if (!a.out_dir.empty()) {
      fs::create_directories(a.out_dir);
      target = fs::path(a.out_dir) / (exam.exam_id + "_" + std::string(data::view_name(data::kViews[v])) + ".saliency.pgm");
    } else {
      target = records[v].path + ".saliency.pgm";
    }
    write_pgm8(target, saliency::render_heatmap(result.maps[v], a.percentile));
    std::printf("%s\n", target.c_str());
  }
  std::printf("entropy %.6f nats\n", result.entropy);
  return 0;
}

struct SweepArgs {
  std::string mode;
  std::string config;
  std::string data_dir;
  std::string out;
};

int run_sweep(const SweepArgs& a, const Overrides& o) {
  RunConfig config = resolve_config(a.config, o);
  if (!a.data_dir.empty()) config.data_dir = a.data_dir;
  if (!a.out.empty()) config.out_dir = a.out;
  if (config.out_dir.empty()) throw std::invalid_argument("no output directory given (--out or out_dir=)");
  const Dataset d = load_dataset(config.data_dir);
  const auto split = data::split_by_patient(d.exams, config.split);
  fs::create_directories(config.out_dir);
  save_config(config, config.out_dir / "config.txt");
  std::vector<train::SweepRow> rows;
  std::string setting;
  const auto progress = [](const std::string& name, const train::EpochLog& e) {
    std::printf("[%s] ", name.c_str());
    print_epoch(e);
  };
  if (a.mode == "fraction") {
    setting = "fraction";
    rows = train::fraction_sweep(split, d.info.scale, config.sweep_fractions, config.train, config.evaluation(),
                                 progress);
  } else if (a.mode == "resolution") {
    setting = "scale";
    rows = train::resolution_sweep(split, d.info.scale, config.sweep_scales, config.train, config.evaluation(),
                                   progress);
  } else {
    throw std::invalid_argument("--mode must be fraction or resolution, got '" + a.mode + "'");
  }
  const fs::path csv = config.out_dir / ("sweep_" + a.mode + ".csv");
  train::write_sweep_csv(csv, setting, rows);
  std::vector<report::ReportColumn> columns;
  for (const auto& r : rows) columns.push_back({r.setting, r.report});
  std::cout << report::format_results_table(setting, columns);
  std::printf("%s\n", csv.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Four-view screening classifier: data, training, evaluation and analysis"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic dataset (images + manifest)");
  gen_cmd->add_option("--out", gen.out, "Target directory")->required();
  gen_cmd->add_option("--n-exams", gen.n_exams, "Number of exams (>= 30)");
  gen_cmd->add_option("--seed", gen.seed, "Root seed");
  gen_cmd->add_option("--scale", gen.scale, "Stored resolution: 1, 1/2, 1/4 or 1/8");
  gen_cmd->add_option("--class-mix", gen.class_mix, "Class shares for labels 0,1,2");
  gen_cmd->add_option("--margin", gen.margin, "Full-scale pixels added around the crop extent");
  gen_cmd->add_option("--repeat-rate", gen.repeat_rate, "Probability an exam reuses the previous patient");
  gen_cmd->add_option("--extra-rate", gen.extra_rate, "Probability a view carries a second image");

  TrainArgs tr;
  Overrides train_overrides;
  auto* train_cmd = app.add_subcommand("train", "Train a model and keep the best checkpoint");
  train_cmd->add_option("--config", tr.config, "key=value config file");
  train_cmd->add_option("--data-dir", tr.data_dir, "Dataset directory");
  train_cmd->add_option("--out", tr.out, "Output directory");
  add_training_flags(train_cmd, train_overrides);

  EvaluateArgs ev;
  Overrides eval_overrides;
  auto* eval_cmd = app.add_subcommand("evaluate", "macAUC and HC-macAUC of a checkpoint");
  eval_cmd->add_option("--config", ev.config, "key=value config file");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--data-dir", ev.data_dir, "Dataset directory");
  eval_cmd->add_option("--split", ev.split, "train, validation or test");
  eval_cmd->add_option("--out", ev.out, "Directory for metrics.csv and predictions.csv");
  eval_cmd->add_flag("--centered", ev.centered, "Single centered crop per exam instead of TTA");
  eval_overrides.add(eval_cmd, "--hc-percent", "hc_percent", "Confidence percentile k");
  eval_overrides.add(eval_cmd, "--hc-subset", "hc_subset", "union or per-class");
  eval_overrides.add(eval_cmd, "--tta-crops", "tta_crops", "Crops averaged per exam");
  eval_overrides.add(eval_cmd, "--seed", "seed", "Root seed");
  eval_overrides.add(eval_cmd, "--validate-on", "validate_on", "Split the thresholds come from");

  PredictArgs pr;
  auto* predict_cmd = app.add_subcommand("predict", "Prediction CSV for selected exams");
  predict_cmd->add_option("--checkpoint", pr.checkpoint, "Checkpoint file")->required();
  predict_cmd->add_option("--data-dir", pr.data_dir, "Dataset directory");
  auto* manifest_opt = predict_cmd->add_option("--manifest", pr.manifest, "Predict every exam of this manifest");
  auto* exam_opt = predict_cmd->add_option("--exam-id", pr.exam_ids, "Exam to predict (repeatable)");
  manifest_opt->excludes(exam_opt);
  exam_opt->needs(predict_cmd->get_option("--data-dir"));
  predict_cmd->add_option("--tta-crops", pr.tta_crops, "Crops averaged per exam");
  predict_cmd->add_option("--seed", pr.seed, "Root seed");
  predict_cmd->add_option("--out", pr.out, "CSV path (default stdout)");

  SaliencyArgs sa;
  auto* sal_cmd = app.add_subcommand("saliency", "Entropy-gradient heatmaps for one exam");
  sal_cmd->add_option("--checkpoint", sa.checkpoint, "Checkpoint file")->required();
  sal_cmd->add_option("--data-dir", sa.data_dir, "Dataset directory")->required();
  sal_cmd->add_option("--exam-id", sa.exam_id, "Exam id")->required();
  sal_cmd->add_option("--out-dir", sa.out_dir, "Write here instead of next to the inputs");
  sal_cmd->add_option("--percentile", sa.percentile, "Clipping percentile");

  SweepArgs sw;
  Overrides sweep_overrides;
  auto* sweep_cmd = app.add_subcommand("sweep", "Data-fraction or resolution sweep");
  sweep_cmd->add_option("--mode", sw.mode, "fraction or resolution")->required();
  sweep_cmd->add_option("--config", sw.config, "key=value config file");
  sweep_cmd->add_option("--data-dir", sw.data_dir, "Dataset directory");
  sweep_cmd->add_option("--out", sw.out, "Output directory");
  add_training_flags(sweep_cmd, sweep_overrides);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "mvscreen: error: " << e.what() << "\n\n";
    const CLI::App* failing = &app;
    for (auto* sub : app.get_subcommands()) failing = sub;
    std::cerr << failing->help();
    return 2;
  }

  try {
    if (*gen_cmd) return run_gen_data(gen);
    if (*train_cmd) return run_train(tr, train_overrides);
    if (*eval_cmd) return run_evaluate(ev, eval_overrides);
    if (*predict_cmd) {
      if (pr.manifest.empty() && pr.exam_ids.empty()) {
        throw std::invalid_argument("predict needs --exam-id or --manifest");
      }
      return run_predict(pr);
    }
    if (*sal_cmd) return run_saliency(sa);
    if (*sweep_cmd) return run_sweep(sw, sweep_overrides);
  } catch (const std::exception& e) {
    std::cerr << "mvscreen: error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
