#pragma once

#include "mvscreen/metrics.hpp"
#include "mvscreen/trainer.hpp"

#include <functional>
#include <string>
#include <vector>

namespace mvscreen::train {

struct EvaluationConfig {
  int tta_crops = 10;
  double hc_percent = 30.0;
  metrics::HcSubset hc_subset = metrics::HcSubset::union_of_kept;
  std::uint64_t seed = 0;
  /// Score every exam of the split on its validation-mode crop instead of
  /// the latest exam per patient under test-time augmentation.
  bool centered = false;
};

struct Evaluation {
  metrics::MetricsReport report;
  std::vector<Exam> exams;  // the evaluated exams
  std::vector<PredictionDistribution> predictions;
  /// Why report.high_confidence is empty, e.g. a class kept no exams.
  std::string hc_unavailable;
};

/// Thresholds come from validation-mode predictions on the validation set.
/// The evaluated split is reduced to each patient's latest exam and scored
/// with test-time augmentation, unless config.centered is set.
Evaluation evaluate(const model::ModelParams<float>& params, const std::vector<Exam>& validation,
                    const std::vector<Exam>& evaluated, const data::PipelineConfig& pipeline,
                    const EvaluationConfig& config);

struct SweepRow {
  std::string setting;
  metrics::MetricsReport report;
  int best_epoch = 0;
  double best_val_mac_auc = 0.0;
  std::size_t train_size = 0;
  Index parameter_count = 0;
};

/// Progress hook: setting name and the epoch just finished.
using SweepProgress = std::function<void(const std::string&, const EpochLog&)>;

/// One model per fraction on a seeded subsample of split.train.
std::vector<SweepRow> fraction_sweep(const data::DatasetSplit& split, data::Scale native_scale,
                                     const std::vector<double>& fractions, const TrainConfig& config,
                                     const EvaluationConfig& evaluation,
                                     const SweepProgress& progress = {});

/// One model per scale, each with its own layer-skip plan.
std::vector<SweepRow> resolution_sweep(const data::DatasetSplit& split, data::Scale native_scale,
                                       const std::vector<data::Scale>& scales,
                                       const TrainConfig& config, const EvaluationConfig& evaluation,
                                       const SweepProgress& progress = {});

/// CSV: setting,auc0,auc1,auc2,macauc,hc_macauc,kept0,kept1,kept2,n,best_epoch,best_val_macauc,train_size,parameters
void write_sweep_csv(const std::filesystem::path& path, const std::string& setting_name,
                     const std::vector<SweepRow>& rows);

}  // namespace mvscreen::train
