#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "panodepth/errors.hpp"

namespace panodepth {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One vertex of the compute graph. A node owns its value and (lazily) its
// gradient; `inputs` + `backward` form the operation record that produced it.
template <typename T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;
  const char* op = "leaf";

  std::vector<T>& ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    return grad;
  }
};

bool grad_enabled();
void set_grad_enabled(bool enabled);

}  // namespace detail

// Disables graph recording for its lifetime (inference, optimizer updates).
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_enabled()) { detail::set_grad_enabled(false); }
  ~NoGradGuard() { detail::set_grad_enabled(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Dense row-major tensor handle. Copies share storage; use clone() for a deep
// copy. T is float for training/inference and double for gradient checks.
template <typename T>
class Tensor {
 public:
  using value_type = T;
  using NodePtr = std::shared_ptr<detail::Node<T>>;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), T(0)); }
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), T(1)); }
  static Tensor full(Shape shape, T value) { return Tensor(std::move(shape), value); }
  static Tensor scalar(T value) { return Tensor(Shape{1}, value); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return node_->data.size(); }

  std::span<T> data() { return node_->data; }
  std::span<const T> data() const { return node_->data; }
  T& operator[](std::size_t i) { return node_->data[i]; }
  const T& operator[](std::size_t i) const { return node_->data[i]; }
  T& at(std::initializer_list<std::size_t> index);
  T at(std::initializer_list<std::size_t> index) const;
  T item() const;

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool flag);
  bool has_grad() const { return node_->grad.size() == node_->data.size(); }
  // Gradient as a fresh tensor; zeros when nothing flowed here.
  Tensor grad() const;
  std::span<T> grad_data() { return node_->ensure_grad(); }
  void zero_grad();

  // Deep copy detached from the graph.
  Tensor clone() const;
  // Same storage values, no history, no grad requirement.
  Tensor detach() const { return clone(); }

  bool all_finite() const;

  const NodePtr& node() const { return node_; }

 private:
  std::size_t flat_index(std::initializer_list<std::size_t> index) const;

  NodePtr node_;
};

namespace detail {

// Builds an op result; records the graph edge only when grad mode is on and
// some input requires a gradient.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, std::vector<const Tensor<T>*> inputs,
                      std::function<void(Node<T>&)> backward, const char* op);

}  // namespace detail

// Reverse-mode pass from a scalar loss. Gradients accumulate additively.
template <typename T>
void backward(const Tensor<T>& loss);

// Topologically ordered operation records reachable from `root` (inputs first).
template <typename T>
std::vector<std::shared_ptr<detail::Node<T>>> topological_order(const Tensor<T>& root);

// Central-difference gradient of a scalar function at x, element by element.
template <typename T>
Tensor<T> finite_diff_gradient(const std::function<Tensor<T>(const Tensor<T>&)>& f,
                               const Tensor<T>& x, double h = 1e-3);

}  // namespace panodepth
