#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace unimask::nk {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// One record of the dynamic tape. Every op result owns the nodes it was
// computed from, so the graph reachable from a loss is exactly its history.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient flows in
  bool requires_grad = false;
  std::string_view op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into its inputs' grads.
  std::function<void(Node&)> backward;

  double* ensure_grad();
};

// Handle to a dense float64 tensor in row-major order. Copies share storage;
// use `detach()` for an independent value copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor constant(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  // Trainable leaf.
  static Tensor parameter(Shape shape, std::vector<double> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  // Negative axes count from the back.
  std::size_t dim(int axis) const;
  std::size_t size() const { return node_->value.size(); }

  std::span<const double> values() const { return node_->value; }
  // Direct write access, intended for leaves (optimizers, test fixtures).
  std::span<double> mutable_values() { return node_->value; }
  double item() const;
  double operator[](std::size_t i) const { return node_->value[i]; }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  // Zeros when no gradient has reached this tensor.
  std::vector<double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad() { node_->grad.clear(); }

  // Reverse-mode sweep from a scalar. Populates grads of every reachable
  // tensor that requires grad.
  void backward() const;

  Tensor detach() const;

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Nodes reachable from `root` that participate in differentiation, inputs
// before consumers. Each node appears once.
std::vector<Node*> topological_order(const Tensor& root);

bool grad_enabled();

// Keeps large buffers in the malloc arena instead of per-allocation mmaps,
// which otherwise dominate the cost of short-lived activations. Call once at
// program start.
void tune_allocator();

// Disables tape recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace unimask::nk
