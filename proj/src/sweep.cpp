#include "mvscreen/sweep.hpp"

#include "mvscreen/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <limits>

namespace mvscreen::train {

Evaluation evaluate(const model::ModelParams<float>& params, const std::vector<Exam>& validation,
                    const std::vector<Exam>& evaluated, const data::PipelineConfig& pipeline,
                    const EvaluationConfig& config) {
  if (config.tta_crops < 1) throw std::invalid_argument("tta_crops must be >= 1");
  model::require_checkpoint_scale(params, pipeline.target_scale);
  Evaluation out;
  const auto val_predictions = predict_validation_set(validation, params, pipeline);
  const auto thresholds =
      metrics::confidence_thresholds(val_predictions, labels_of(validation), config.hc_percent);

  if (config.centered) {
    out.exams = evaluated;
    out.predictions = predict_validation_set(out.exams, params, pipeline);
  } else {
    out.exams = data::latest_exam_per_patient(evaluated);
    out.predictions = predict_tta_set(out.exams, params, pipeline, config.tta_crops, config.seed);
  }
  const auto labels = labels_of(out.exams);
  out.report.overall = metrics::mac_auc(out.predictions, labels);
  try {
    out.report.high_confidence = metrics::hc_mac_auc(out.predictions, labels, thresholds, config.hc_subset);
  } catch (const metrics::MetricError& e) {
    out.hc_unavailable = e.what();
  }
  out.report.thresholds = thresholds;
  out.report.n = static_cast<int>(out.exams.size());
  return out;
}

namespace {

SweepRow run_setting(const std::string& setting, const data::DatasetSplit& split,
                     data::Scale native_scale, const TrainConfig& config,
                     const EvaluationConfig& evaluation, const SweepProgress& progress) {
  TrainOptions options;
  if (progress) options.on_epoch = [&](const EpochLog& e) { progress(setting, e); };
  const auto result = train(split.train, split.validation, config, native_scale, options);
  const data::PipelineConfig pipeline{native_scale, config.scale};
  SweepRow row;
  row.setting = setting;
  row.report = evaluate(result.best, split.validation, split.test, pipeline, evaluation).report;
  row.best_epoch = result.best_epoch;
  row.best_val_mac_auc = result.best_val_mac_auc;
  row.train_size = result.train_size;
  row.parameter_count = result.best.parameter_count();
  return row;
}

}  // namespace

std::vector<SweepRow> fraction_sweep(const data::DatasetSplit& split, data::Scale native_scale,
                                     const std::vector<double>& fractions, const TrainConfig& config,
                                     const EvaluationConfig& evaluation, const SweepProgress& progress) {
  if (fractions.empty()) throw std::invalid_argument("fraction sweep needs at least one fraction");
  for (double f : fractions) {
    if (!(f > 0) || f > 1) throw std::invalid_argument("sweep fractions must lie in (0, 1]");
  }
  std::vector<SweepRow> rows;
  for (double f : fractions) {
    TrainConfig c = config;
    c.data_fraction = f;
    char name[32];
    std::snprintf(name, sizeof name, "%g", f);
    rows.push_back(run_setting(name, split, native_scale, c, evaluation, progress));
  }
  return rows;
}

std::vector<SweepRow> resolution_sweep(const data::DatasetSplit& split, data::Scale native_scale,
                                       const std::vector<data::Scale>& scales,
                                       const TrainConfig& config, const EvaluationConfig& evaluation,
                                       const SweepProgress& progress) {
  if (scales.empty()) throw std::invalid_argument("resolution sweep needs at least one scale");
  for (auto s : scales) {
    if (s.factor() > native_scale.factor()) {
      throw std::invalid_argument("cannot sweep scale x" + s.str() + " on data stored at x" +
                                  native_scale.str());
    }
  }
  std::vector<SweepRow> rows;
  for (auto s : scales) {
    TrainConfig c = config;
    c.scale = s;
    rows.push_back(run_setting("x" + s.str(), split, native_scale, c, evaluation, progress));
  }
  return rows;
}

void write_sweep_csv(const std::filesystem::path& path, const std::string& setting_name,
                     const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << setting_name
      << ",auc0,auc1,auc2,macauc,hc_macauc,kept0,kept1,kept2,n,best_epoch,best_val_macauc,train_size,parameters\n";
  char buf[512];
  for (const auto& r : rows) {
    const auto& o = r.report.overall;
    // Missing HC results are written as NaN.
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const auto& hc = r.report.high_confidence;
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d,%.17g,%zu,%lld\n",
                  r.setting.c_str(), o.auc[0], o.auc[1], o.auc[2], o.mac_auc,
                  hc ? hc->metrics.mac_auc : nan, hc ? hc->kept_fraction[0] : nan,
                  hc ? hc->kept_fraction[1] : nan, hc ? hc->kept_fraction[2] : nan, r.report.n,
                  r.best_epoch, r.best_val_mac_auc, r.train_size,
                  static_cast<long long>(r.parameter_count));
    out << buf;
  }
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

}  // namespace mvscreen::train
