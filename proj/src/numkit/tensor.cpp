#include "unimask/numkit/tensor.hpp"

#include <malloc.h>

#include <algorithm>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "unimask/error.hpp"

namespace unimask::nk {

namespace {
thread_local bool tl_grad_enabled = true;
}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

double* Node::ensure_grad() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad.data();
}

namespace {
Tensor make_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  if (numel(shape) != values.size()) {
    throw DimensionError("tensor of shape " + shape_str(shape) + " needs " +
                         std::to_string(numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}
}  // namespace

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  return make_leaf(std::move(shape), std::move(values), false);
}

Tensor Tensor::zeros(Shape shape) {
  const auto n = numel(shape);
  return make_leaf(std::move(shape), std::vector<double>(n, 0.0), false);
}

Tensor Tensor::full(Shape shape, double value) {
  const auto n = numel(shape);
  return make_leaf(std::move(shape), std::vector<double>(n, value), false);
}

Tensor Tensor::scalar(double value) { return make_leaf({}, {value}, false); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  return make_leaf(std::move(shape), std::move(values), true);
}

std::size_t Tensor::dim(int axis) const {
  const int r = static_cast<int>(rank());
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw DimensionError("axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(shape()));
  }
  return node_->shape[static_cast<std::size_t>(a)];
}

double Tensor::item() const {
  if (size() != 1) {
    throw ContractError("item() on tensor of shape " + shape_str(shape()));
  }
  return node_->value[0];
}

std::vector<double> Tensor::grad() const {
  if (node_->grad.empty()) return std::vector<double>(size(), 0.0);
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
  node_->ensure_grad();
  return node_->grad;
}

Tensor Tensor::detach() const {
  return make_leaf(node_->shape, node_->value, false);
}

std::vector<Node*> topological_order(const Tensor& root) {
  std::vector<Node*> order;
  if (!root.defined() || !root.requires_grad()) return order;
  std::unordered_set<Node*> visited;
  // Iterative post-order DFS; (node, next input index).
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

void Tensor::backward() const {
  if (size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        shape_str(shape()));
  }
  if (!requires_grad()) {
    throw ContractError("backward() on a tensor that does not require grad");
  }
  const auto order = topological_order(*this);
  node_->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

bool grad_enabled() { return tl_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(tl_grad_enabled) {
  tl_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() { tl_grad_enabled = previous_; }

void tune_allocator() {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
}

}  // namespace unimask::nk
