#include "mvscreen/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

namespace mvscreen::nn {

namespace {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using MapRowMatrix = Eigen::Map<RowMatrix<Scalar>>;
template <typename Scalar>
using ConstMapRowMatrix = Eigen::Map<const RowMatrix<Scalar>>;

void require(bool ok, const std::string& message) {
  if (!ok) throw ShapeError(message);
}

struct ConvGeometry {
  Index channels, height, width;
  Index kernel_h, kernel_w, stride_h, stride_w;
  Index out_h, out_w;

  Index patch() const { return channels * kernel_h * kernel_w; }
  Index positions() const { return out_h * out_w; }
};

// Unfolds [C,H,W] into a row-major [C*kh*kw, Ho*Wo] patch matrix.
template <typename Scalar>
void im2col(const Scalar* in, const ConvGeometry& g, Scalar* cols) {
  const Index plane = g.height * g.width;
  const Index positions = g.positions();
  for (Index c = 0; c < g.channels; ++c) {
    for (Index i = 0; i < g.kernel_h; ++i) {
      for (Index j = 0; j < g.kernel_w; ++j) {
        Scalar* dst = cols + ((c * g.kernel_h + i) * g.kernel_w + j) * positions;
        for (Index oy = 0; oy < g.out_h; ++oy) {
          const Scalar* src = in + c * plane + (oy * g.stride_h + i) * g.width + j;
          Scalar* row = dst + oy * g.out_w;
          if (g.stride_w == 1) {
            std::copy(src, src + g.out_w, row);
          } else {
            for (Index ox = 0; ox < g.out_w; ++ox) row[ox] = src[ox * g.stride_w];
          }
        }
      }
    }
  }
}

template <typename Scalar>
void col2im_accumulate(const Scalar* cols, const ConvGeometry& g, Scalar* out) {
  const Index plane = g.height * g.width;
  const Index positions = g.positions();
  for (Index c = 0; c < g.channels; ++c) {
    for (Index i = 0; i < g.kernel_h; ++i) {
      for (Index j = 0; j < g.kernel_w; ++j) {
        const Scalar* src = cols + ((c * g.kernel_h + i) * g.kernel_w + j) * positions;
        for (Index oy = 0; oy < g.out_h; ++oy) {
          Scalar* dst = out + c * plane + (oy * g.stride_h + i) * g.width + j;
          const Scalar* row = src + oy * g.out_w;
          for (Index ox = 0; ox < g.out_w; ++ox) dst[ox * g.stride_w] += row[ox];
        }
      }
    }
  }
}

}  // namespace

void ConvSpec::validate() const {
  require(kernel_h >= 1 && kernel_w >= 1 && stride_h >= 1 && stride_w >= 1 && in_maps >= 1 &&
              out_maps >= 1,
          "conv spec fields must all be >= 1");
}

Index window_extent(Index in, Index window, Index stride) {
  require(window >= 1 && stride >= 1, "window and stride must be >= 1");
  require(window <= in, "window " + std::to_string(window) + " larger than input extent " +
                            std::to_string(in));
  return (in - window) / stride + 1;
}

template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& weights,
                      const Tensor<Scalar>& bias, const ConvSpec& spec) {
  spec.validate();
  require(input.rank() == 3, "conv2d input must be [C,H,W], got " + to_string(input.shape()));
  require(input.dim(0) == spec.in_maps,
          "conv2d input has " + std::to_string(input.dim(0)) + " maps, spec expects " +
              std::to_string(spec.in_maps));
  const Shape expected_w{spec.out_maps, spec.in_maps, spec.kernel_h, spec.kernel_w};
  require(weights.shape() == expected_w, "conv2d weights " + to_string(weights.shape()) +
                                             ", expected " + to_string(expected_w));
  require(bias.shape() == Shape{spec.out_maps},
          "conv2d bias " + to_string(bias.shape()) + ", expected [" +
              std::to_string(spec.out_maps) + "]");
  require(spec.kernel_h <= input.dim(1) && spec.kernel_w <= input.dim(2),
          "conv2d kernel " + std::to_string(spec.kernel_h) + "x" + std::to_string(spec.kernel_w) +
              " larger than input " + to_string(input.shape()));

  ConvGeometry g{input.dim(0),   input.dim(1),  input.dim(2),  spec.kernel_h, spec.kernel_w,
                 spec.stride_h,  spec.stride_w, 0,             0};
  g.out_h = window_extent(g.height, g.kernel_h, g.stride_h);
  g.out_w = window_extent(g.width, g.kernel_w, g.stride_w);

  RowMatrix<Scalar> cols(g.patch(), g.positions());
  im2col(input.values().data(), g, cols.data());

  using Vector = typename Tensor<Scalar>::Vector;
  Vector out(spec.out_maps * g.positions());
  MapRowMatrix<Scalar> out_mat(out.data(), spec.out_maps, g.positions());
  ConstMapRowMatrix<Scalar> w_mat(weights.values().data(), spec.out_maps, g.patch());
  out_mat.noalias() = w_mat * cols;
  out_mat.colwise() += bias.values();

  return Tensor<Scalar>::make_result(
      {spec.out_maps, g.out_h, g.out_w}, std::move(out), {input, weights, bias},
      [input, weights, bias, g, out_maps = spec.out_maps](const Vector& grad_out) {
        ConstMapRowMatrix<Scalar> grad_mat(grad_out.data(), out_maps, g.positions());
        if (bias.requires_grad()) {
          bias.accumulate_grad(grad_mat.rowwise().sum());
        }
        if (weights.requires_grad()) {
          RowMatrix<Scalar> cols(g.patch(), g.positions());
          im2col(input.values().data(), g, cols.data());
          Vector dw(out_maps * g.patch());
          MapRowMatrix<Scalar> dw_mat(dw.data(), out_maps, g.patch());
          dw_mat.noalias() = grad_mat * cols.transpose();
          weights.accumulate_grad(dw);
        }
        if (input.requires_grad()) {
          ConstMapRowMatrix<Scalar> w_mat(weights.values().data(), out_maps, g.patch());
          RowMatrix<Scalar> dcols(g.patch(), g.positions());
          dcols.noalias() = w_mat.transpose() * grad_mat;
          Vector dx = Vector::Zero(input.size());
          col2im_accumulate(dcols.data(), g, dx.data());
          input.accumulate_grad(dx);
        }
      });
}

template <typename Scalar>
Tensor<Scalar> maxpool2d(const Tensor<Scalar>& input, const PoolSpec& spec) {
  require(input.rank() == 3, "maxpool2d input must be [C,H,W], got " + to_string(input.shape()));
  const Index channels = input.dim(0), height = input.dim(1), width = input.dim(2);
  const Index out_h = window_extent(height, spec.window_h, spec.stride_h);
  const Index out_w = window_extent(width, spec.window_w, spec.stride_w);

  using Vector = typename Tensor<Scalar>::Vector;
  Vector out(channels * out_h * out_w);
  std::vector<std::int64_t> argmax(static_cast<std::size_t>(out.size()));
  const Scalar* in = input.values().data();
  Index o = 0;
  for (Index c = 0; c < channels; ++c) {
    const Index base = c * height * width;
    for (Index oy = 0; oy < out_h; ++oy) {
      for (Index ox = 0; ox < out_w; ++ox, ++o) {
        Index best = base + (oy * spec.stride_h) * width + ox * spec.stride_w;
        Scalar best_value = in[best];
        for (Index i = 0; i < spec.window_h; ++i) {
          const Index row = base + (oy * spec.stride_h + i) * width + ox * spec.stride_w;
          for (Index j = 0; j < spec.window_w; ++j) {
            if (in[row + j] > best_value) {
              best_value = in[row + j];
              best = row + j;
            }
          }
        }
        out[o] = best_value;
        argmax[static_cast<std::size_t>(o)] = best;
      }
    }
  }

  return Tensor<Scalar>::make_result(
      {channels, out_h, out_w}, std::move(out), {input},
      [input, argmax = std::move(argmax)](const Vector& grad_out) {
        Vector dx = Vector::Zero(input.size());
        for (std::size_t k = 0; k < argmax.size(); ++k) {
          dx[argmax[k]] += grad_out[static_cast<Index>(k)];
        }
        input.accumulate_grad(dx);
      });
}

template <typename Scalar>
Tensor<Scalar> global_avg_pool(const Tensor<Scalar>& input) {
  require(input.rank() == 3,
          "global_avg_pool input must be [C,H,W], got " + to_string(input.shape()));
  const Index channels = input.dim(0);
  const Index plane = input.dim(1) * input.dim(2);
  using Vector = typename Tensor<Scalar>::Vector;
  ConstMapRowMatrix<Scalar> maps(input.values().data(), channels, plane);
  Vector out = maps.rowwise().mean();
  return Tensor<Scalar>::make_result(
      {channels}, std::move(out), {input}, [input, channels, plane](const Vector& grad_out) {
        Vector dx(input.size());
        MapRowMatrix<Scalar> dmaps(dx.data(), channels, plane);
        dmaps = (grad_out / static_cast<Scalar>(plane)).replicate(1, plane);
        input.accumulate_grad(dx);
      });
}

template <typename Scalar>
Tensor<Scalar> dense(const Tensor<Scalar>& input, const Tensor<Scalar>& weights,
                     const Tensor<Scalar>& bias) {
  require(input.rank() == 1, "dense input must be 1-D, got " + to_string(input.shape()));
  require(weights.rank() == 2 && weights.dim(1) == input.dim(0),
          "dense weights " + to_string(weights.shape()) + " incompatible with input " +
              to_string(input.shape()));
  require(bias.shape() == Shape{weights.dim(0)},
          "dense bias " + to_string(bias.shape()) + " incompatible with weights " +
              to_string(weights.shape()));
  const Index m = weights.dim(0), n = weights.dim(1);
  using Vector = typename Tensor<Scalar>::Vector;
  ConstMapRowMatrix<Scalar> w(weights.values().data(), m, n);
  Vector out = w * input.values() + bias.values();
  return Tensor<Scalar>::make_result(
      {m}, std::move(out), {input, weights, bias},
      [input, weights, bias, m, n](const Vector& grad_out) {
        if (bias.requires_grad()) bias.accumulate_grad(grad_out);
        if (weights.requires_grad()) {
          Vector dw(m * n);
          MapRowMatrix<Scalar>(dw.data(), m, n).noalias() =
              grad_out * input.values().transpose();
          weights.accumulate_grad(dw);
        }
        if (input.requires_grad()) {
          ConstMapRowMatrix<Scalar> w(weights.values().data(), m, n);
          input.accumulate_grad(w.transpose() * grad_out);
        }
      });
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& input) {
  using Vector = typename Tensor<Scalar>::Vector;
  Vector out = input.values().cwiseMax(Scalar(0));
  return Tensor<Scalar>::make_result(input.shape(), std::move(out), {input},
                                     [input](const Vector& grad_out) {
                                       input.accumulate_grad(
                                           (input.values().array() > Scalar(0))
                                               .select(grad_out, Scalar(0))
                                               .matrix());
                                     });
}

template <typename Scalar>
Tensor<Scalar> softmax(const Tensor<Scalar>& logits) {
  require(logits.rank() == 1, "softmax expects a 1-D tensor, got " + to_string(logits.shape()));
  using Vector = typename Tensor<Scalar>::Vector;
  const Scalar top = logits.values().maxCoeff();
  Vector e = (logits.values().array() - top).exp().matrix();
  Vector p = e / e.sum();
  return Tensor<Scalar>::make_result(logits.shape(), p, {logits},
                                     [logits, p](const Vector& grad_out) {
                                       const Scalar inner = grad_out.dot(p);
                                       logits.accumulate_grad(
                                           (p.array() * (grad_out.array() - inner)).matrix());
                                     });
}

template <typename Scalar>
Tensor<Scalar> cross_entropy(const Tensor<Scalar>& dist, int label) {
  require(dist.rank() == 1, "cross_entropy expects a 1-D distribution");
  if (label < 0 || label >= dist.size()) {
    throw std::invalid_argument("label " + std::to_string(label) + " outside {0.." +
                                std::to_string(dist.size() - 1) + "}");
  }
  using Vector = typename Tensor<Scalar>::Vector;
  const Scalar p = dist[label];
  const Scalar floor = static_cast<Scalar>(kLogFloor);
  Vector out(1);
  out[0] = -std::log(std::max(p, floor));
  return Tensor<Scalar>::make_result({1}, std::move(out), {dist},
                                     [dist, label, p, floor](const Vector& grad_out) {
                                       Vector d = Vector::Zero(dist.size());
                                       if (p > floor) d[label] = -grad_out[0] / p;
                                       dist.accumulate_grad(d);
                                     });
}

template <typename Scalar>
Tensor<Scalar> entropy(const Tensor<Scalar>& dist) {
  require(dist.rank() == 1, "entropy expects a 1-D distribution");
  using Vector = typename Tensor<Scalar>::Vector;
  Vector out(1);
  out[0] = 0;
  for (Index i = 0; i < dist.size(); ++i) {
    const Scalar p = dist[i];
    if (p > 0) out[0] -= p * std::log(p);
  }
  return Tensor<Scalar>::make_result({1}, std::move(out), {dist}, [dist](const Vector& grad_out) {
    Vector d = Vector::Zero(dist.size());
    for (Index i = 0; i < dist.size(); ++i) {
      const Scalar p = dist[i];
      if (p > 0) d[i] = -grad_out[0] * (std::log(p) + Scalar(1));
    }
    dist.accumulate_grad(d);
  });
}

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require(a.shape() == b.shape(),
          "add shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  using Vector = typename Tensor<Scalar>::Vector;
  return Tensor<Scalar>::make_result(a.shape(), a.values() + b.values(), {a, b},
                                     [a, b](const Vector& grad_out) {
                                       if (a.requires_grad()) a.accumulate_grad(grad_out);
                                       if (b.requires_grad()) b.accumulate_grad(grad_out);
                                     });
}

template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require(a.shape() == b.shape(),
          "mul shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  using Vector = typename Tensor<Scalar>::Vector;
  Vector out = a.values().cwiseProduct(b.values());
  return Tensor<Scalar>::make_result(
      a.shape(), std::move(out), {a, b}, [a, b](const Vector& grad_out) {
        if (a.requires_grad()) a.accumulate_grad(grad_out.cwiseProduct(b.values()));
        if (b.requires_grad()) b.accumulate_grad(grad_out.cwiseProduct(a.values()));
      });
}

template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& a, Scalar factor) {
  using Vector = typename Tensor<Scalar>::Vector;
  return Tensor<Scalar>::make_result(
      a.shape(), a.values() * factor, {a},
      [a, factor](const Vector& grad_out) { a.accumulate_grad(grad_out * factor); });
}

template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& a) {
  using Vector = typename Tensor<Scalar>::Vector;
  Vector out(1);
  out[0] = a.values().sum();
  return Tensor<Scalar>::make_result({1}, std::move(out), {a}, [a](const Vector& grad_out) {
    a.accumulate_grad(Vector::Constant(a.size(), grad_out[0]));
  });
}

template <typename Scalar>
Tensor<Scalar> concat(const std::vector<Tensor<Scalar>>& parts) {
  require(!parts.empty(), "concat of zero tensors");
  Index total = 0;
  for (const auto& p : parts) {
    require(p.rank() == 1, "concat expects 1-D tensors, got " + to_string(p.shape()));
    total += p.size();
  }
  using Vector = typename Tensor<Scalar>::Vector;
  Vector out(total);
  Index offset = 0;
  for (const auto& p : parts) {
    out.segment(offset, p.size()) = p.values();
    offset += p.size();
  }
  return Tensor<Scalar>::make_result({total}, std::move(out), parts,
                                     [parts](const Vector& grad_out) {
                                       Index offset = 0;
                                       for (const auto& p : parts) {
                                         if (p.requires_grad()) {
                                           p.accumulate_grad(grad_out.segment(offset, p.size()));
                                         }
                                         offset += p.size();
                                       }
                                     });
}

#define MVSCREEN_INSTANTIATE_OPS(S)                                                           \
  template Tensor<S> conv2d(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&,             \
                            const ConvSpec&);                                                 \
  template Tensor<S> maxpool2d(const Tensor<S>&, const PoolSpec&);                            \
  template Tensor<S> global_avg_pool(const Tensor<S>&);                                       \
  template Tensor<S> dense(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&);             \
  template Tensor<S> relu(const Tensor<S>&);                                                  \
  template Tensor<S> softmax(const Tensor<S>&);                                               \
  template Tensor<S> cross_entropy(const Tensor<S>&, int);                                    \
  template Tensor<S> entropy(const Tensor<S>&);                                               \
  template Tensor<S> add(const Tensor<S>&, const Tensor<S>&);                                 \
  template Tensor<S> mul(const Tensor<S>&, const Tensor<S>&);                                 \
  template Tensor<S> scale(const Tensor<S>&, S);                                              \
  template Tensor<S> sum(const Tensor<S>&);                                                   \
  template Tensor<S> concat(const std::vector<Tensor<S>>&);

MVSCREEN_INSTANTIATE_OPS(float)
MVSCREEN_INSTANTIATE_OPS(double)

#undef MVSCREEN_INSTANTIATE_OPS

}  // namespace mvscreen::nn
