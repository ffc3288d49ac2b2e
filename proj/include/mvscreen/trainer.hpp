#pragma once

#include "mvscreen/data.hpp"
#include "mvscreen/metrics.hpp"
#include "mvscreen/model.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

namespace mvscreen::train {

using data::Exam;
using data::Scale;

struct TrainConfig {
  double learning_rate = 1e-5;
  int batch_size = 4;
  int max_epochs = 200;
  double input_noise_std = 0.01;
  double dropout = 0.2;
  std::uint64_t seed = 0;
  Scale scale = Scale::from_denominator(8);
  /// Share of training exams kept, sampled without replacement.
  double data_fraction = 1.0;
  int width_divisor = 1;
  Index hidden_units = 1024;
  /// Stop once validation macAUC reaches this value; 0 disables.
  double stop_at_val_macauc = 0.0;

  void validate() const;
  model::ModelConfig model_config() const;
};

template <typename Scalar>
struct AdamState {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<Vector> first_moment;
  std::vector<Vector> second_moment;
};

/// Bias-corrected Adam update of every distinct tensor in params from its
/// accumulated gradient (zeros when none). Repeated handles to one storage
/// are updated once.
template <typename Scalar>
void adam_step(const std::vector<Tensor<Scalar>>& params, AdamState<Scalar>& state, double lr);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  std::array<double, 3> val_auc{};
  double val_mac_auc = 0.0;
  bool checkpoint = false;
};

struct TrainResult {
  model::ModelParams<float> best;
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_val_mac_auc = 0.0;
  double first_batch_loss = 0.0;
  std::size_t train_size = 0;
};

struct TrainOptions {
  /// When set, best.mvdc and epoch_log.csv are kept up to date here.
  std::optional<std::filesystem::path> out_dir;
  std::function<void(const EpochLog&)> on_epoch;
};

/// Exams kept for a data fraction: the full list at 1, otherwise a seeded
/// sample without replacement in original order. Fails if a class vanishes.
std::vector<Exam> subsample(const std::vector<Exam>& exams, double fraction, std::uint64_t seed);

/// Mini-batch Adam on mean batch cross-entropy with a seeded per-epoch
/// shuffle. After every epoch the validation macAUC (earliest image,
/// centered crop) decides whether the parameters become the new best.
TrainResult train(const std::vector<Exam>& train_set, const std::vector<Exam>& validation_set,
                  const TrainConfig& config, data::Scale native_scale,
                  const TrainOptions& options = {});

/// Validation-mode predictions for every exam, in input order.
std::vector<PredictionDistribution> predict_validation_set(const std::vector<Exam>& exams,
                                                           const model::ModelParams<float>& params,
                                                           const data::PipelineConfig& pipeline);

/// Test-time-augmented predictions for every exam, in input order.
std::vector<PredictionDistribution> predict_tta_set(const std::vector<Exam>& exams,
                                                    const model::ModelParams<float>& params,
                                                    const data::PipelineConfig& pipeline,
                                                    int n_crops, std::uint64_t seed);

std::vector<int> labels_of(const std::vector<Exam>& exams);

/// CSV: epoch,train_loss,val_auc0,val_auc1,val_auc2,val_macauc,checkpoint_flag
void write_epoch_log(const std::filesystem::path& path, const std::vector<EpochLog>& log);
std::vector<EpochLog> read_epoch_log(const std::filesystem::path& path);

}  // namespace mvscreen::train
