#pragma once

#include "mvscreen/tensor.hpp"

#include <vector>

namespace mvscreen::nn {

struct ConvSpec {
  Index kernel_h = 1;
  Index kernel_w = 1;
  Index stride_h = 1;
  Index stride_w = 1;
  Index in_maps = 1;
  Index out_maps = 1;

  void validate() const;
};

struct PoolSpec {
  Index window_h = 1;
  Index window_w = 1;
  Index stride_h = 1;
  Index stride_w = 1;
};

/// Valid (unpadded) sliding-window extent: floor((in - window) / stride) + 1.
/// Throws ShapeError when the window does not fit.
Index window_extent(Index in, Index window, Index stride);

/// Valid strided cross-correlation of input [C_in,H,W] with weights
/// [C_out,C_in,kh,kw] plus bias [C_out].
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& weights,
                      const Tensor<Scalar>& bias, const ConvSpec& spec);

/// Max pooling over [C,H,W]; the gradient goes to the first maximum in
/// row-major window order.
template <typename Scalar>
Tensor<Scalar> maxpool2d(const Tensor<Scalar>& input, const PoolSpec& spec);

/// [C,H,W] -> [C], mean of each map.
template <typename Scalar>
Tensor<Scalar> global_avg_pool(const Tensor<Scalar>& input);

/// weights [m,n] times input [n] plus bias [m].
template <typename Scalar>
Tensor<Scalar> dense(const Tensor<Scalar>& input, const Tensor<Scalar>& weights,
                     const Tensor<Scalar>& bias);

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& input);

/// Softmax of a 1-D logit vector, computed after subtracting the max logit.
template <typename Scalar>
Tensor<Scalar> softmax(const Tensor<Scalar>& logits);

inline constexpr double kLogFloor = 1e-12;

/// -log(max(dist[label], 1e-12)) as a scalar tensor.
template <typename Scalar>
Tensor<Scalar> cross_entropy(const Tensor<Scalar>& dist, int label);

/// -sum p log p in nats over a 1-D distribution, with 0 log 0 = 0.
template <typename Scalar>
Tensor<Scalar> entropy(const Tensor<Scalar>& dist);

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b);

template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b);

template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& a, Scalar factor);

template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& a);

/// Concatenates 1-D tensors end to end.
template <typename Scalar>
Tensor<Scalar> concat(const std::vector<Tensor<Scalar>>& parts);

}  // namespace mvscreen::nn
