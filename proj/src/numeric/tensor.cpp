#include "panodepth/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

namespace panodepth {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool enabled) { g_grad_enabled = enabled; }

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, std::vector<const Tensor<T>*> inputs,
                      std::function<void(Node<T>&)> backward, const char* op) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  if (grad_enabled()) {
    bool any = false;
    for (const auto* in : inputs) any = any || (in && in->defined() && in->requires_grad());
    if (any) {
      node->requires_grad = true;
      for (const auto* in : inputs) node->inputs.push_back(in && in->defined() ? in->node() : nullptr);
      node->backward = std::move(backward);
    }
  }
  return Tensor<T>(std::move(node));
}

template Tensor<float> make_result(Shape, std::vector<float>, std::vector<const Tensor<float>*>,
                                   std::function<void(Node<float>&)>, const char*);
template Tensor<double> make_result(Shape, std::vector<double>, std::vector<const Tensor<double>*>,
                                    std::function<void(Node<double>&)>, const char*);

}  // namespace detail

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : node_(std::make_shared<detail::Node<T>>()) {
  node_->data.assign(numel(shape), fill);
  node_->shape = std::move(shape);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : node_(std::make_shared<detail::Node<T>>()) {
  if (values.size() != numel(shape)) {
    throw DimensionError("tensor data length " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(values);
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
  }
  return node_->shape[axis];
}

template <typename T>
std::size_t Tensor<T>::flat_index(std::initializer_list<std::size_t> index) const {
  if (index.size() != rank()) {
    throw DimensionError("index rank mismatch for " + shape_str(shape()));
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= node_->shape[axis]) throw DimensionError("index out of range for " + shape_str(shape()));
    flat = flat * node_->shape[axis] + i;
    ++axis;
  }
  return flat;
}

template <typename T>
T& Tensor<T>::at(std::initializer_list<std::size_t> index) {
  return node_->data[flat_index(index)];
}

template <typename T>
T Tensor<T>::at(std::initializer_list<std::size_t> index) const {
  return node_->data[flat_index(index)];
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool flag) {
  node_->requires_grad = flag;
  return *this;
}

template <typename T>
Tensor<T> Tensor<T>::grad() const {
  if (!has_grad()) return Tensor(shape(), T(0));
  return Tensor(shape(), node_->grad);
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (has_grad()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  return Tensor(shape(), node_->data);
}

template <typename T>
bool Tensor<T>::all_finite() const {
  for (T v : node_->data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template <typename T>
std::vector<std::shared_ptr<detail::Node<T>>> topological_order(const Tensor<T>& root) {
  using NodePtr = std::shared_ptr<detail::Node<T>>;
  std::vector<NodePtr> order;
  std::unordered_set<const detail::Node<T>*> visited;
  // Iterative post-order DFS; graphs can be deep enough to make recursion risky.
  std::vector<std::pair<NodePtr, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      const NodePtr& child = node->inputs[next++];
      if (child && child->requires_grad && visited.insert(child.get()).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

template <typename T>
void backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
  }
  if (!loss.requires_grad()) return;
  auto order = topological_order(loss);
  loss.node()->ensure_grad()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto& node = **it;
    if (node.backward && node.grad.size() == node.data.size()) {
      for (auto& in : node.inputs) {
        if (in && in->requires_grad) in->ensure_grad();
      }
      node.backward(node);
    }
  }
}

template <typename T>
Tensor<T> finite_diff_gradient(const std::function<Tensor<T>(const Tensor<T>&)>& f, const Tensor<T>& x,
                               double h) {
  NoGradGuard guard;
  Tensor<T> probe = x.clone();
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const T original = probe[i];
    probe[i] = original + static_cast<T>(h);
    const T plus = f(probe).item();
    probe[i] = original - static_cast<T>(h);
    const T minus = f(probe).item();
    probe[i] = original;
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      throw NumericError("finite difference produced a non-finite value at element " + std::to_string(i));
    }
    out[i] = static_cast<T>((static_cast<double>(plus) - static_cast<double>(minus)) / (2.0 * h));
  }
  return out;
}

template class Tensor<float>;
template class Tensor<double>;
template void backward(const Tensor<float>&);
template void backward(const Tensor<double>&);
template std::vector<std::shared_ptr<detail::Node<float>>> topological_order(const Tensor<float>&);
template std::vector<std::shared_ptr<detail::Node<double>>> topological_order(const Tensor<double>&);
template Tensor<float> finite_diff_gradient(const std::function<Tensor<float>(const Tensor<float>&)>&,
                                            const Tensor<float>&, double);
template Tensor<double> finite_diff_gradient(const std::function<Tensor<double>(const Tensor<double>&)>&,
                                             const Tensor<double>&, double);

}  // namespace panodepth
