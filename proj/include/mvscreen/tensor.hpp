#pragma once

#include <Eigen/Core>

#include <functional>
#include <initializer_list>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvscreen {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

/// Raised for any operand whose shape violates an op's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string to_string(const Shape& shape);
Index shape_numel(const Shape& shape);

/// Graph recording switch. Ops only record backward closures while enabled.
class GradMode {
 public:
  static bool enabled();
  static void set_enabled(bool enabled);
};

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Dense row-major tensor with optional reverse-mode gradient tracking.
///
/// A Tensor is a handle: copies share storage and graph position. Leaf
/// tensors created with requires_grad accumulate gradients across every
/// use in a graph, which is how tied parameters receive a single summed
/// gradient.
template <typename Scalar>
class Tensor {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using BackwardFn = std::function<void(const Vector& grad_output)>;

  struct Node {
    Shape shape;
    Vector value;
    Vector grad;  // empty until something is accumulated
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    BackwardFn backward;
  };

  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, Vector values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Scalar value, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::initializer_list<Scalar> values,
                            bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  Index rank() const { return static_cast<Index>(node_->shape.size()); }
  Index dim(Index axis) const { return node_->shape.at(static_cast<std::size_t>(axis)); }
  Index size() const { return node_->value.size(); }

  const Vector& values() const { return node_->value; }
  /// Mutable storage. Intended for parameter updates and test perturbation.
  Vector& values_mut() { return node_->value; }
  Scalar operator[](Index i) const { return node_->value[i]; }
  Scalar item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag) { node_->requires_grad = flag; }

  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  /// Gradient buffer; zeros if nothing has been accumulated.
  Vector grad() const;
  Vector& grad_mut();
  void accumulate_grad(const Vector& delta) const;
  void zero_grad() const { node_->grad.resize(0); }

  /// Reverse sweep from this scalar, accumulating into every tracked ancestor.
  void backward() const;

  /// Deep copy of the values into a fresh leaf (no graph, no grad).
  Tensor detached_copy(bool requires_grad = false) const;

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }
  const Node* node_id() const { return node_.get(); }

  /// Builds an op result. The backward closure is recorded only when grad
  /// mode is on and at least one input is tracked.
  static Tensor make_result(Shape shape, Vector value,
                            std::initializer_list<Tensor> inputs,
                            BackwardFn backward);
  static Tensor make_result(Shape shape, Vector value,
                            const std::vector<Tensor>& inputs,
                            BackwardFn backward);

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

/// Converts values between scalar types; the result is an untracked leaf.
template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& t) {
  return Tensor<To>(t.shape(), t.values().template cast<To>());
}

}  // namespace mvscreen
