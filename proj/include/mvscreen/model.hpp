#pragma once

#include "mvscreen/data.hpp"
#include "mvscreen/distribution.hpp"
#include "mvscreen/ops.hpp"
#include "mvscreen/rng.hpp"
#include "mvscreen/tensor.hpp"

#include <array>
#include <string>
#include <vector>

namespace mvscreen::model {

using data::Scale;
using data::View;

enum class LayerKind { conv, maxpool };

struct LayerSpec {
  LayerKind kind = LayerKind::conv;
  Index kernel_h = 3;
  Index kernel_w = 3;
  Index stride_h = 1;
  Index stride_w = 1;
  /// Output maps. Pooling keeps the incoming count.
  Index maps = 1;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Layer list of one view column, bottom-up, excluding the final global
/// average pooling.
struct ColumnSpec {
  std::vector<LayerSpec> layers;

  /// The five-block column: conv 3x3/2 (32), pool 3x3/3, conv 3x3/2 (64),
  /// 2x conv 3x3 (64), pool 2x2/2, 3x conv (128), pool, 3x conv (128),
  /// pool, 3x conv (256). Map counts are divided by width_divisor.
  static ColumnSpec full(int width_divisor = 1);
};

/// A column truncated for a particular input extent.
struct ColumnPlan {
  std::vector<LayerSpec> layers;  // retained prefix
  /// Spatial extent before the first layer and after each retained layer.
  std::vector<std::array<Index, 2>> trace;
  Index embedding_size = 0;
  std::size_t full_depth = 0;

  bool truncated() const { return layers.size() < full_depth; }
};

/// Walks the shape trace and drops the first layer whose window exceeds the
/// current map, together with everything after it. Global average pooling
/// is always kept. Throws ShapeError if not even the first layer fits.
ColumnPlan layer_skip_plan(const ColumnSpec& spec, Index height, Index width);
ColumnPlan layer_skip_plan(Scale scale, int width_divisor = 1);

struct ModelConfig {
  Scale scale;
  Index input_height = 2600;
  Index input_width = 2000;
  int width_divisor = 1;
  Index hidden_units = 1024;

  /// Full-width model consuming the crop for the given scale.
  static ModelConfig for_scale(Scale scale);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <typename Scalar>
struct ColumnParams {
  std::vector<Tensor<Scalar>> weights;  // one per retained conv layer
  std::vector<Tensor<Scalar>> biases;
};

template <typename Scalar>
struct NamedTensor {
  std::string name;
  Tensor<Scalar> tensor;
};

/// All learnable weights. L-CC/R-CC run through cc and L-MLO/R-MLO through
/// mlo, so each pair shares storage.
template <typename Scalar>
struct ModelParams {
  ModelConfig config;
  ColumnPlan plan;
  ColumnParams<Scalar> cc;
  ColumnParams<Scalar> mlo;
  Tensor<Scalar> hidden_weights;  // [hidden, 4 * embedding]
  Tensor<Scalar> hidden_bias;
  Tensor<Scalar> head_weights;    // [3, hidden]
  Tensor<Scalar> head_bias;

  const ColumnParams<Scalar>& column_for(View view) const {
    return data::is_cc(view) ? cc : mlo;
  }

  /// Every distinct parameter tensor with a stable name.
  std::vector<NamedTensor<Scalar>> named() const;
  std::vector<Tensor<Scalar>> tensors() const;
  Index parameter_count() const;

  /// Deep copy with fresh storage.
  ModelParams clone() const;
  void zero_grad() const;
};

/// Glorot-uniform weights, zero biases. Conv fans are maps x kernel area.
template <typename Scalar>
ModelParams<Scalar> build_model(const ModelConfig& config, Rng& rng);

enum class Phase { train, eval };

struct ForwardOptions {
  Phase phase = Phase::eval;
  double input_noise_std = 0.01;
  double dropout_rate = 0.2;
};

/// [1,h,w] tensor view of a preprocessed image.
template <typename Scalar>
Tensor<Scalar> image_tensor(const Image& image, bool requires_grad = false);

/// Conv+rectifier / pool stack followed by global average pooling. In the
/// train phase Gaussian noise is added to the input first.
template <typename Scalar>
Tensor<Scalar> column_forward(const Tensor<Scalar>& image, const ColumnParams<Scalar>& column,
                              const ColumnPlan& plan, const ForwardOptions& options, Rng& rng);

template <typename Scalar>
struct ForwardResult {
  std::array<Tensor<Scalar>, 4> embeddings;  // L-CC, R-CC, L-MLO, R-MLO
  Tensor<Scalar> logits;
  Tensor<Scalar> probabilities;
};

/// Four columns, concatenation, hidden rectifier layer, dropout (train),
/// classifier head and softmax.
template <typename Scalar>
ForwardResult<Scalar> forward(const std::array<Tensor<Scalar>, 4>& views,
                              const ModelParams<Scalar>& params, const ForwardOptions& options,
                              Rng& rng);

PredictionDistribution to_distribution(const TensorF& probabilities);
PredictionDistribution to_distribution(const TensorD& probabilities);

/// Eval-phase prediction on already preprocessed views.
PredictionDistribution predict_views(const std::array<Image, 4>& views,
                                     const ModelParams<float>& params);

/// Mean of n_crops eval forwards, each on an independently sampled set of
/// test-mode crops. Summation runs in crop order.
PredictionDistribution predict_tta(const data::Exam& exam, const ModelParams<float>& params,
                                   const data::PipelineConfig& pipeline, int n_crops,
                                   std::uint64_t seed);

/// Single validation-mode (earliest image, centered crop) prediction.
PredictionDistribution predict_validation(const data::Exam& exam,
                                          const ModelParams<float>& params,
                                          const data::PipelineConfig& pipeline);

extern template struct ModelParams<float>;
extern template struct ModelParams<double>;

}  // namespace mvscreen::model
