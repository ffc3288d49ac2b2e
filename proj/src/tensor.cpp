#include "mvscreen/tensor.hpp"

#include <sstream>
#include <unordered_set>

namespace mvscreen {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Index shape_numel(const Shape& shape) {
  Index n = 1;
  for (Index e : shape) {
    if (e < 1) throw ShapeError("non-positive extent in shape " + to_string(shape));
    n *= e;
  }
  return n;
}

namespace {
thread_local bool grad_mode_enabled = true;
}

bool GradMode::enabled() { return grad_mode_enabled; }
void GradMode::set_enabled(bool enabled) { grad_mode_enabled = enabled; }

NoGradGuard::NoGradGuard() : previous_(GradMode::enabled()) { GradMode::set_enabled(false); }
NoGradGuard::~NoGradGuard() { GradMode::set_enabled(previous_); }

template <typename Scalar>
Tensor<Scalar>::Tensor(Shape shape, bool requires_grad)
    : Tensor(shape, Vector::Zero(shape_numel(shape)), requires_grad) {}

template <typename Scalar>
Tensor<Scalar>::Tensor(Shape shape, Vector values, bool requires_grad)
    : node_(std::make_shared<Node>()) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("shape " + to_string(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::zeros(Shape shape, bool requires_grad) {
  return Tensor(std::move(shape), requires_grad);
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::full(Shape shape, Scalar value, bool requires_grad) {
  const Index n = shape_numel(shape);
  return Tensor(std::move(shape), Vector::Constant(n, value), requires_grad);
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::from_values(Shape shape, std::initializer_list<Scalar> values,
                                           bool requires_grad) {
  Vector v(static_cast<Index>(values.size()));
  Index i = 0;
  for (Scalar x : values) v[i++] = x;
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

template <typename Scalar>
Scalar Tensor<Scalar>::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
  return node_->value[0];
}

template <typename Scalar>
typename Tensor<Scalar>::Vector Tensor<Scalar>::grad() const {
  if (has_grad()) return node_->grad;
  return Vector::Zero(node_->value.size());
}

template <typename Scalar>
typename Tensor<Scalar>::Vector& Tensor<Scalar>::grad_mut() {
  if (!has_grad()) node_->grad = Vector::Zero(node_->value.size());
  return node_->grad;
}

template <typename Scalar>
void Tensor<Scalar>::accumulate_grad(const Vector& delta) const {
  if (delta.size() != node_->value.size()) {
    throw ShapeError("gradient of size " + std::to_string(delta.size()) +
                     " for tensor of shape " + to_string(node_->shape));
  }
  if (has_grad()) {
    node_->grad += delta;
  } else {
    node_->grad = delta;
  }
}

template <typename Scalar>
void Tensor<Scalar>::backward() const {
  if (size() != 1) {
    throw ShapeError("backward() requires a scalar, got shape " + to_string(shape()));
  }
  if (!node_->requires_grad) return;

  // Post-order DFS gives a topological order with parents first.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  Tensor(node_).accumulate_grad(Vector::Ones(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (!node->backward || node->grad.size() == 0) continue;
    node->backward(node->grad);
    // Interior gradients are consumed; only leaves keep theirs.
    node->grad.resize(0);
  }
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::detached_copy(bool requires_grad) const {
  return Tensor(node_->shape, node_->value, requires_grad);
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::make_result(Shape shape, Vector value,
                                           std::initializer_list<Tensor> inputs,
                                           BackwardFn backward) {
  return make_result(std::move(shape), std::move(value), std::vector<Tensor>(inputs),
                     std::move(backward));
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::make_result(Shape shape, Vector value,
                                           const std::vector<Tensor>& inputs,
                                           BackwardFn backward) {
  Tensor out(std::move(shape), std::move(value));
  if (!GradMode::enabled()) return out;
  bool tracked = false;
  for (const Tensor& in : inputs) tracked = tracked || in.requires_grad();
  if (!tracked) return out;
  out.node_->requires_grad = true;
  for (const Tensor& in : inputs) {
    if (in.requires_grad()) out.node_->parents.push_back(in.node_);
  }
  out.node_->backward = std::move(backward);
  return out;
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace mvscreen
