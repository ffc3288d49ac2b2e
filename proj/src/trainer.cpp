#include "mvscreen/trainer.hpp"

#include "mvscreen/checkpoint.hpp"
#include "mvscreen/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace mvscreen::train {

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("train config: " + m); };
  if (!(learning_rate > 0)) fail("learning_rate must be positive");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (max_epochs < 1) fail("max_epochs must be >= 1");
  if (input_noise_std < 0) fail("input_noise_std must be non-negative");
  if (dropout < 0 || dropout >= 1) fail("dropout must lie in [0, 1)");
  if (!(data_fraction > 0) || data_fraction > 1) fail("data_fraction must lie in (0, 1]");
  if (hidden_units < 1) fail("hidden_units must be >= 1");
}

model::ModelConfig TrainConfig::model_config() const {
  auto config = model::ModelConfig::for_scale(scale);
  config.width_divisor = width_divisor;
  config.hidden_units = hidden_units;
  return config;
}

template <typename Scalar>
void adam_step(const std::vector<Tensor<Scalar>>& params, AdamState<Scalar>& state, double lr) {
  std::vector<Tensor<Scalar>> unique;
  std::unordered_set<const void*> seen;
  for (const auto& p : params) {
    if (seen.insert(p.node_id()).second) unique.push_back(p);
  }
  if (state.first_moment.empty()) {
    for (const auto& p : unique) {
      state.first_moment.push_back(AdamState<Scalar>::Vector::Zero(p.size()));
      state.second_moment.push_back(AdamState<Scalar>::Vector::Zero(p.size()));
    }
  }
  if (state.first_moment.size() != unique.size()) {
    throw ShapeError("adam state tracks " + std::to_string(state.first_moment.size()) +
                     " tensors, got " + std::to_string(unique.size()));
  }
  for (std::size_t i = 0; i < unique.size(); ++i) {
    if (state.first_moment[i].size() != unique[i].size()) {
      throw ShapeError("adam state size mismatch for tensor " + std::to_string(i) + " of shape " +
                       to_string(unique[i].shape()));
    }
  }

  ++state.step;
  const auto b1 = static_cast<Scalar>(state.beta1);
  const auto b2 = static_cast<Scalar>(state.beta2);
  const auto correction1 = static_cast<Scalar>(1.0 - std::pow(state.beta1, static_cast<double>(state.step)));
  const auto correction2 = static_cast<Scalar>(1.0 - std::pow(state.beta2, static_cast<double>(state.step)));
  const auto rate = static_cast<Scalar>(lr);
  const auto eps = static_cast<Scalar>(state.epsilon);
  for (std::size_t i = 0; i < unique.size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    const auto g = unique[i].grad();
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
    auto values = unique[i];
    values.values_mut().array() -=
        rate * (m.array() / correction1) / ((v.array() / correction2).sqrt() + eps);
  }
}

template void adam_step<float>(const std::vector<TensorF>&, AdamState<float>&, double);
template void adam_step<double>(const std::vector<TensorD>&, AdamState<double>&, double);

std::vector<int> labels_of(const std::vector<Exam>& exams) {
  std::vector<int> labels;
  labels.reserve(exams.size());
  for (const auto& e : exams) labels.push_back(e.label);
  return labels;
}

namespace {

void require_all_classes(const std::vector<Exam>& exams, const std::string& what) {
  std::array<int, 3> counts{};
  for (const auto& e : exams) {
    e.validate();
    ++counts[static_cast<std::size_t>(e.label)];
  }
  for (int c = 0; c < 3; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) {
      throw std::invalid_argument(what + " has no exams of class " + std::to_string(c) +
                                  "; macAUC would be undefined");
    }
  }
}

}  // namespace

std::vector<Exam> subsample(const std::vector<Exam>& exams, double fraction, std::uint64_t seed) {
  if (!(fraction > 0) || fraction > 1) throw std::invalid_argument("fraction must lie in (0, 1]");
  if (fraction == 1.0) return exams;
  const std::size_t n = exams.size();
  const std::size_t keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
  std::vector<std::size_t> index(n);
  std::iota(index.begin(), index.end(), std::size_t{0});
  Rng rng = make_rng(seed, "fraction");
  for (std::size_t i = 0; i < keep; ++i) {
    const auto j = static_cast<std::size_t>(uniform_int(rng, static_cast<std::int64_t>(i), static_cast<std::int64_t>(n) - 1));
    std::swap(index[i], index[j]);
  }
  index.resize(keep);
  std::sort(index.begin(), index.end());
  std::vector<Exam> out;
  out.reserve(keep);
  for (std::size_t i : index) out.push_back(exams[i]);
  char buf[64];
  std::snprintf(buf, sizeof buf, "training subsample at fraction %g", fraction);
  require_all_classes(out, buf);
  return out;
}

std::vector<PredictionDistribution> predict_validation_set(const std::vector<Exam>& exams,
                                                           const model::ModelParams<float>& params,
                                                           const data::PipelineConfig& pipeline) {
  std::vector<PredictionDistribution> out(exams.size());
  parallel_for(exams.size(), [&](std::size_t i) {
    out[i] = model::predict_validation(exams[i], params, pipeline);
  });
  return out;
}

std::vector<PredictionDistribution> predict_tta_set(const std::vector<Exam>& exams,
                                                    const model::ModelParams<float>& params,
                                                    const data::PipelineConfig& pipeline,
                                                    int n_crops, std::uint64_t seed) {
  std::vector<PredictionDistribution> out(exams.size());
  parallel_for(exams.size(), [&](std::size_t i) {
    out[i] = model::predict_tta(exams[i], params, pipeline, n_crops, derive_seed(seed, "tta-exam", i));
  });
  return out;
}

TrainResult train(const std::vector<Exam>& train_set, const std::vector<Exam>& validation_set,
                  const TrainConfig& config, data::Scale native_scale, const TrainOptions& options) {
  config.validate();
  if (train_set.empty()) throw std::invalid_argument("training set is empty");
  if (validation_set.empty()) throw std::invalid_argument("validation set is empty");
  require_all_classes(validation_set, "validation set");
  const std::vector<Exam> exams = subsample(train_set, config.data_fraction, config.seed);

  const data::PipelineConfig pipeline{native_scale, config.scale};
  Rng init_rng = make_rng(config.seed, "init");
  model::ModelParams<float> params = model::build_model<float>(config.model_config(), init_rng);
  const auto tensors = params.tensors();
  AdamState<float> adam;
  const model::ForwardOptions forward_options{model::Phase::train, config.input_noise_std, config.dropout};
  const auto validation_labels = labels_of(validation_set);

  if (options.out_dir) std::filesystem::create_directories(*options.out_dir);

  TrainResult result;
  result.train_size = exams.size();
  result.best_val_mac_auc = -1.0;
  std::vector<std::size_t> order(exams.size());
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = make_rng(config.seed, "shuffle", static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(uniform_int(shuffle_rng, 0, static_cast<std::int64_t>(i) - 1))]);
    }

    double loss_total = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const auto batch = static_cast<float>(end - start);
      double batch_loss = 0.0;
      for (std::size_t pos = start; pos < end; ++pos) {
        const Exam& exam = exams[order[pos]];
        Rng data_rng = make_rng(config.seed, "data", static_cast<std::uint64_t>(epoch), pos);
        Rng noise_rng = make_rng(config.seed, "dropout", static_cast<std::uint64_t>(epoch), pos);
        const auto images = data::prepare_views(exam, pipeline, data::Mode::train, data_rng);
        std::array<TensorF, 4> inputs;
        for (std::size_t v = 0; v < 4; ++v) inputs[v] = model::image_tensor<float>(images[v]);
        const auto out = model::forward(inputs, params, forward_options, noise_rng);
        const TensorF loss = nn::cross_entropy(out.probabilities, exam.label);
        batch_loss += loss.item();
        nn::scale(loss, 1.0f / batch).backward();
      }
      batch_loss /= static_cast<double>(end - start);
      if (epoch == 1 && start == 0) result.first_batch_loss = batch_loss;
      loss_total += batch_loss;
      ++batches;
      adam_step(tensors, adam, config.learning_rate);
      params.zero_grad();
    }

    const auto predictions = predict_validation_set(validation_set, params, pipeline);
    const auto scores = metrics::mac_auc(predictions, validation_labels);
    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = loss_total / batches;
    entry.val_auc = scores.auc;
    entry.val_mac_auc = scores.mac_auc;
    entry.checkpoint = scores.mac_auc > result.best_val_mac_auc;
    if (entry.checkpoint) {
      result.best = params.clone();
      result.best_epoch = epoch;
      result.best_val_mac_auc = scores.mac_auc;
      if (options.out_dir) model::save_checkpoint(result.best, *options.out_dir / "best.mvdc");
    }
    result.log.push_back(entry);
    if (options.out_dir) write_epoch_log(*options.out_dir / "epoch_log.csv", result.log);
    if (options.on_epoch) options.on_epoch(entry);
    if (config.stop_at_val_macauc > 0 && scores.mac_auc >= config.stop_at_val_macauc) break;
  }
  return result;
}

void write_epoch_log(const std::filesystem::path& path, const std::vector<EpochLog>& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << "epoch,train_loss,val_auc0,val_auc1,val_auc2,val_macauc,checkpoint_flag\n";
  char buf[256];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", e.epoch, e.train_loss,
                  e.val_auc[0], e.val_auc[1], e.val_auc[2], e.val_mac_auc, e.checkpoint ? 1 : 0);
    out << buf;
  }
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

std::vector<EpochLog> read_epoch_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open epoch log");
  std::string line;
  std::getline(in, line);
  std::vector<EpochLog> log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    EpochLog e;
    int flag = 0;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf,%lf,%d", &e.epoch, &e.train_loss, &e.val_auc[0],
                    &e.val_auc[1], &e.val_auc[2], &e.val_mac_auc, &flag) != 7) {
      throw std::runtime_error(path.string() + ": malformed epoch log line '" + line + "'");
    }
    e.checkpoint = flag != 0;
    log.push_back(e);
  }
  return log;
}

}  // namespace mvscreen::train
