#pragma once

#include "mvscreen/image.hpp"
#include "mvscreen/model.hpp"

#include <array>

namespace mvscreen::saliency {

/// |dH/dx| for one view, same extent as the model input.
template <typename Scalar>
using SaliencyMap = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
struct SaliencyResult {
  std::array<SaliencyMap<Scalar>, 4> maps;  // view order
  double entropy = 0.0;                      // H of the eval-mode prediction
};

/// Eval-mode forward on preprocessed views, entropy of the prediction,
/// backpropagated to the four inputs.
template <typename Scalar>
SaliencyResult<Scalar> saliency(const std::array<Image, 4>& views,
                                const model::ModelParams<Scalar>& params);

/// Saliency of an exam on its validation-mode (earliest image, centered)
/// crops.
SaliencyResult<float> exam_saliency(const data::Exam& exam, const model::ModelParams<float>& params,
                                    const data::PipelineConfig& pipeline);

/// Clips at the nearest-rank percentile of the positive entries and scales
/// linearly to 0..255. Maps without positive entries render black.
Image8 render_heatmap(const SaliencyMap<float>& map, double percentile = 99.0);

}  // namespace mvscreen::saliency
