#include "mvscreen/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace mvscreen::saliency {

template <typename Scalar>
SaliencyResult<Scalar> saliency(const std::array<Image, 4>& views,
                                const model::ModelParams<Scalar>& params) {
  if (params.hidden_weights.size() == 0 || params.head_weights.size() == 0) {
    throw std::invalid_argument("saliency: model parameters are not initialized");
  }
  std::array<Tensor<Scalar>, 4> inputs;
  for (std::size_t v = 0; v < 4; ++v) {
    const auto& expected = params.plan.trace.front();
    if (views[v].rows() != expected[0] || views[v].cols() != expected[1]) {
      throw ShapeError("saliency: view " + std::string(data::view_name(data::kViews[v])) + " is " +
                       std::to_string(views[v].rows()) + "x" + std::to_string(views[v].cols()) +
                       " but the model expects " + std::to_string(expected[0]) + "x" +
                       std::to_string(expected[1]));
    }
    inputs[v] = model::image_tensor<Scalar>(views[v], true);
  }
  const model::ForwardOptions eval{model::Phase::eval, 0.0, 0.0};
  Rng unused(0);
  const auto out = model::forward(inputs, params, eval, unused);
  const Tensor<Scalar> h = nn::entropy(out.probabilities);
  h.backward();

  SaliencyResult<Scalar> result;
  result.entropy = static_cast<double>(h.item());
  for (std::size_t v = 0; v < 4; ++v) {
    const auto rows = views[v].rows();
    const auto cols = views[v].cols();
    result.maps[v] = Eigen::Map<const SaliencyMap<Scalar>>(inputs[v].grad().data(), rows, cols).abs();
  }
  params.zero_grad();
  return result;
}

template SaliencyResult<float> saliency<float>(const std::array<Image, 4>&, const model::ModelParams<float>&);
template SaliencyResult<double> saliency<double>(const std::array<Image, 4>&, const model::ModelParams<double>&);

SaliencyResult<float> exam_saliency(const data::Exam& exam, const model::ModelParams<float>& params,
                                    const data::PipelineConfig& pipeline) {
  Rng unused(0);
  const auto views = data::prepare_views(exam, pipeline, data::Mode::validation, unused);
  return saliency(views, params);
}

Image8 render_heatmap(const SaliencyMap<float>& map, double percentile) {
  if (!(percentile > 0) || percentile > 100) {
    throw std::invalid_argument("heatmap percentile must lie in (0, 100]");
  }
  std::vector<float> positive;
  for (Index i = 0; i < map.size(); ++i) {
    const float v = map.data()[i];
    if (!std::isfinite(v)) throw std::invalid_argument("saliency map contains non-finite values");
    if (v > 0) positive.push_back(v);
  }
  Image8 out = Image8::Zero(map.rows(), map.cols());
  if (positive.empty()) return out;
  auto rank = static_cast<std::size_t>(std::ceil(percentile * static_cast<double>(positive.size()) / 100.0 - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, positive.size());
  std::nth_element(positive.begin(), positive.begin() + static_cast<std::ptrdiff_t>(rank - 1), positive.end());
  const double clip = positive[rank - 1];
  for (Index i = 0; i < map.size(); ++i) {
    const double v = std::min<double>(map.data()[i], clip) / clip;
    out.data()[i] = static_cast<std::uint8_t>(std::lround(255.0 * v));
  }
  return out;
}

}  // namespace mvscreen::saliency
