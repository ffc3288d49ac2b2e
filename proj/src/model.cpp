#include "mvscreen/model.hpp"

#include <cmath>
#include <unordered_set>

namespace mvscreen::model {

namespace {

LayerSpec conv(Index stride, Index maps) { return {LayerKind::conv, 3, 3, stride, stride, maps}; }
LayerSpec pool(Index window, Index maps) {
  return {LayerKind::maxpool, window, window, window, window, maps};
}

}  // namespace

ColumnSpec ColumnSpec::full(int width_divisor) {
  if (width_divisor < 1 || 32 % width_divisor != 0) {
    throw std::invalid_argument("width divisor must divide 32, got " +
                                std::to_string(width_divisor));
  }
  const Index d = width_divisor;
  ColumnSpec spec;
  auto& l = spec.layers;
  l.push_back(conv(2, 32 / d));
  l.push_back(pool(3, 32 / d));
  l.push_back(conv(2, 64 / d));
  l.push_back(conv(1, 64 / d));
  l.push_back(conv(1, 64 / d));
  l.push_back(pool(2, 64 / d));
  for (int i = 0; i < 3; ++i) l.push_back(conv(1, 128 / d));
  l.push_back(pool(2, 128 / d));
  for (int i = 0; i < 3; ++i) l.push_back(conv(1, 128 / d));
  l.push_back(pool(2, 128 / d));
  for (int i = 0; i < 3; ++i) l.push_back(conv(1, 256 / d));
  return spec;
}

ColumnPlan layer_skip_plan(const ColumnSpec& spec, Index height, Index width) {
  ColumnPlan plan;
  plan.full_depth = spec.layers.size();
  plan.trace.push_back({height, width});
  Index maps = 1;
  for (const LayerSpec& layer : spec.layers) {
    if (layer.kernel_h > height || layer.kernel_w > width) break;
    height = nn::window_extent(height, layer.kernel_h, layer.stride_h);
    width = nn::window_extent(width, layer.kernel_w, layer.stride_w);
    maps = layer.kind == LayerKind::conv ? layer.maps : maps;
    plan.layers.push_back(layer);
    plan.trace.push_back({height, width});
  }
  if (plan.layers.empty()) {
    throw ShapeError("input " + std::to_string(plan.trace[0][0]) + "x" +
                     std::to_string(plan.trace[0][1]) + " is smaller than the first kernel");
  }
  plan.embedding_size = maps;
  return plan;
}

ColumnPlan layer_skip_plan(Scale scale, int width_divisor) {
  const auto config = ModelConfig::for_scale(scale);
  return layer_skip_plan(ColumnSpec::full(width_divisor), config.input_height, config.input_width);
}

ModelConfig ModelConfig::for_scale(Scale scale) {
  const auto rule = data::CropRule::at(scale);
  ModelConfig config;
  config.scale = scale;
  config.input_height = rule.crop_height;
  config.input_width = rule.crop_width;
  return config;
}

template <typename Scalar>
std::vector<NamedTensor<Scalar>> ModelParams<Scalar>::named() const {
  std::vector<NamedTensor<Scalar>> out;
  for (const auto& [prefix, column] : {std::pair{"cc", &cc}, std::pair{"mlo", &mlo}}) {
    for (std::size_t i = 0; i < column->weights.size(); ++i) {
      out.push_back({std::string(prefix) + ".conv" + std::to_string(i) + ".weight",
                     column->weights[i]});
      out.push_back({std::string(prefix) + ".conv" + std::to_string(i) + ".bias",
                     column->biases[i]});
    }
  }
  out.push_back({"fusion.hidden.weight", hidden_weights});
  out.push_back({"fusion.hidden.bias", hidden_bias});
  out.push_back({"fusion.head.weight", head_weights});
  out.push_back({"fusion.head.bias", head_bias});
  return out;
}

template <typename Scalar>
std::vector<Tensor<Scalar>> ModelParams<Scalar>::tensors() const {
  std::vector<Tensor<Scalar>> out;
  std::unordered_set<const void*> seen;
  for (auto& nt : named()) {
    if (seen.insert(nt.tensor.node_id()).second) out.push_back(nt.tensor);
  }
  return out;
}

template <typename Scalar>
Index ModelParams<Scalar>::parameter_count() const {
  Index n = 0;
  for (const auto& t : tensors()) n += t.size();
  return n;
}

template <typename Scalar>
ModelParams<Scalar> ModelParams<Scalar>::clone() const {
  ModelParams copy = *this;
  auto deep = [](ColumnParams<Scalar>& c) {
    for (auto& w : c.weights) w = w.detached_copy(true);
    for (auto& b : c.biases) b = b.detached_copy(true);
  };
  deep(copy.cc);
  deep(copy.mlo);
  copy.hidden_weights = hidden_weights.detached_copy(true);
  copy.hidden_bias = hidden_bias.detached_copy(true);
  copy.head_weights = head_weights.detached_copy(true);
  copy.head_bias = head_bias.detached_copy(true);
  return copy;
}

template <typename Scalar>
void ModelParams<Scalar>::zero_grad() const {
  for (const auto& t : tensors()) t.zero_grad();
}

namespace {

template <typename Scalar>
Tensor<Scalar> glorot(Shape shape, Index fan_in, Index fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  typename Tensor<Scalar>::Vector v(shape_numel(shape));
  for (Index i = 0; i < v.size(); ++i) {
    v[i] = static_cast<Scalar>((2.0 * uniform_unit(rng) - 1.0) * limit);
  }
  return Tensor<Scalar>(std::move(shape), std::move(v), /*requires_grad=*/true);
}

template <typename Scalar>
ColumnParams<Scalar> build_column(const ColumnPlan& plan, Rng& rng) {
  ColumnParams<Scalar> column;
  Index in_maps = 1;
  for (const LayerSpec& layer : plan.layers) {
    if (layer.kind != LayerKind::conv) continue;
    const Index area = layer.kernel_h * layer.kernel_w;
    column.weights.push_back(glorot<Scalar>({layer.maps, in_maps, layer.kernel_h, layer.kernel_w},
                                            in_maps * area, layer.maps * area, rng));
    column.biases.push_back(Tensor<Scalar>::zeros({layer.maps}, true));
    in_maps = layer.maps;
  }
  return column;
}

}  // namespace

template <typename Scalar>
ModelParams<Scalar> build_model(const ModelConfig& config, Rng& rng) {
  if (config.hidden_units < 1) throw std::invalid_argument("hidden_units must be >= 1");
  ModelParams<Scalar> params;
  params.config = config;
  params.plan = layer_skip_plan(ColumnSpec::full(config.width_divisor), config.input_height,
                                config.input_width);
  params.cc = build_column<Scalar>(params.plan, rng);
  params.mlo = build_column<Scalar>(params.plan, rng);
  const Index fused = 4 * params.plan.embedding_size;
  params.hidden_weights = glorot<Scalar>({config.hidden_units, fused}, fused, config.hidden_units, rng);
  params.hidden_bias = Tensor<Scalar>::zeros({config.hidden_units}, true);
  params.head_weights = glorot<Scalar>({3, config.hidden_units}, config.hidden_units, 3, rng);
  params.head_bias = Tensor<Scalar>::zeros({3}, true);
  return params;
}

template <typename Scalar>
Tensor<Scalar> image_tensor(const Image& image, bool requires_grad) {
  typename Tensor<Scalar>::Vector v =
      Eigen::Map<const Eigen::VectorXf>(image.data(), image.size()).template cast<Scalar>();
  return Tensor<Scalar>({1, image.rows(), image.cols()}, std::move(v), requires_grad);
}

template <typename Scalar>
Tensor<Scalar> column_forward(const Tensor<Scalar>& image, const ColumnParams<Scalar>& column,
                              const ColumnPlan& plan, const ForwardOptions& options, Rng& rng) {
  if (image.rank() != 3 || image.dim(0) != 1 || image.dim(1) != plan.trace[0][0] ||
      image.dim(2) != plan.trace[0][1]) {
    throw ShapeError("column input " + to_string(image.shape()) + " does not match the plan's [1x" +
                     std::to_string(plan.trace[0][0]) + "x" + std::to_string(plan.trace[0][1]) + "]");
  }
  Tensor<Scalar> x = image;
  if (options.phase == Phase::train && options.input_noise_std > 0) {
    Eigen::VectorXf draws(image.size());
    fill_standard_normal(rng, {draws.data(), static_cast<std::size_t>(draws.size())});
    typename Tensor<Scalar>::Vector noise =
        (draws.cast<double>() * options.input_noise_std).template cast<Scalar>();
    x = nn::add(x, Tensor<Scalar>(image.shape(), std::move(noise)));
  }
  std::size_t conv_index = 0;
  Index maps = 1;
  for (const LayerSpec& layer : plan.layers) {
    if (layer.kind == LayerKind::conv) {
      const nn::ConvSpec spec{layer.kernel_h, layer.kernel_w, layer.stride_h,
                              layer.stride_w, maps,           layer.maps};
      x = nn::relu(nn::conv2d(x, column.weights.at(conv_index), column.biases.at(conv_index), spec));
      ++conv_index;
      maps = layer.maps;
    } else {
      x = nn::maxpool2d(x, nn::PoolSpec{layer.kernel_h, layer.kernel_w, layer.stride_h, layer.stride_w});
    }
  }
  return nn::global_avg_pool(x);
}

template <typename Scalar>
ForwardResult<Scalar> forward(const std::array<Tensor<Scalar>, 4>& views,
                              const ModelParams<Scalar>& params, const ForwardOptions& options,
                              Rng& rng) {
  ForwardResult<Scalar> result;
  for (View v : data::kViews) {
    const auto i = static_cast<std::size_t>(v);
    if (!views[i].defined()) {
      throw std::invalid_argument("forward: missing view " + std::string(data::view_name(v)));
    }
    result.embeddings[i] = column_forward(views[i], params.column_for(v), params.plan, options, rng);
  }
  auto fused = nn::concat(std::vector<Tensor<Scalar>>(result.embeddings.begin(), result.embeddings.end()));
  auto hidden = nn::relu(nn::dense(fused, params.hidden_weights, params.hidden_bias));
  if (options.phase == Phase::train && options.dropout_rate > 0) {
    const double keep = 1.0 - options.dropout_rate;
    typename Tensor<Scalar>::Vector mask(hidden.size());
    for (Index i = 0; i < mask.size(); ++i) {
      mask[i] = uniform_unit(rng) < options.dropout_rate ? Scalar(0) : static_cast<Scalar>(1.0 / keep);
    }
    hidden = nn::mul(hidden, Tensor<Scalar>(hidden.shape(), std::move(mask)));
  }
  result.logits = nn::dense(hidden, params.head_weights, params.head_bias);
  result.probabilities = nn::softmax(result.logits);
  return result;
}

namespace {

template <typename Scalar>
PredictionDistribution distribution_from(const Tensor<Scalar>& probabilities) {
  if (probabilities.size() != 3) {
    throw ShapeError("expected 3 class probabilities, got " + to_string(probabilities.shape()));
  }
  PredictionDistribution d;
  double total = 0;
  for (int c = 0; c < 3; ++c) total += static_cast<double>(probabilities[c]);
  for (int c = 0; c < 3; ++c) d.p[static_cast<std::size_t>(c)] = static_cast<double>(probabilities[c]) / total;
  return d;
}

}  // namespace

PredictionDistribution to_distribution(const TensorF& probabilities) {
  return distribution_from(probabilities);
}
PredictionDistribution to_distribution(const TensorD& probabilities) {
  return distribution_from(probabilities);
}

PredictionDistribution predict_views(const std::array<Image, 4>& views,
                                     const ModelParams<float>& params) {
  NoGradGuard no_grad;
  std::array<TensorF, 4> inputs;
  for (std::size_t i = 0; i < 4; ++i) inputs[i] = image_tensor<float>(views[i]);
  Rng unused(0);
  return to_distribution(forward(inputs, params, ForwardOptions{Phase::eval}, unused).probabilities);
}

namespace {

void require_scale(const ModelParams<float>& params, const data::PipelineConfig& pipeline) {
  if (!(params.config.scale == pipeline.target_scale)) {
    throw std::invalid_argument("model was built for scale " + params.config.scale.str() +
                                " but the pipeline produces scale " + pipeline.target_scale.str());
  }
}

}  // namespace

PredictionDistribution predict_tta(const data::Exam& exam, const ModelParams<float>& params,
                                   const data::PipelineConfig& pipeline, int n_crops,
                                   std::uint64_t seed) {
  if (n_crops < 1) throw std::invalid_argument("n_crops must be >= 1");
  require_scale(params, pipeline);
  PredictionDistribution mean{{0.0, 0.0, 0.0}};
  for (int k = 0; k < n_crops; ++k) {
    Rng rng = make_rng(seed, "tta", static_cast<std::uint64_t>(k));
    const auto d = predict_views(data::prepare_views(exam, pipeline, data::Mode::test, rng), params);
    for (std::size_t c = 0; c < 3; ++c) mean.p[c] += d.p[c];
  }
  for (double& v : mean.p) v /= n_crops;
  return mean;
}

PredictionDistribution predict_validation(const data::Exam& exam,
                                          const ModelParams<float>& params,
                                          const data::PipelineConfig& pipeline) {
  require_scale(params, pipeline);
  Rng unused(0);
  return predict_views(data::prepare_views(exam, pipeline, data::Mode::validation, unused), params);
}

template struct ModelParams<float>;
template struct ModelParams<double>;

#define MVSCREEN_INSTANTIATE_MODEL(S)                                                          \
  template ModelParams<S> build_model<S>(const ModelConfig&, Rng&);                            \
  template Tensor<S> image_tensor<S>(const Image&, bool);                                      \
  template Tensor<S> column_forward<S>(const Tensor<S>&, const ColumnParams<S>&,               \
                                       const ColumnPlan&, const ForwardOptions&, Rng&);        \
  template ForwardResult<S> forward<S>(const std::array<Tensor<S>, 4>&, const ModelParams<S>&, \
                                       const ForwardOptions&, Rng&);

MVSCREEN_INSTANTIATE_MODEL(float)
MVSCREEN_INSTANTIATE_MODEL(double)

#undef MVSCREEN_INSTANTIATE_MODEL

}  // namespace mvscreen::model
