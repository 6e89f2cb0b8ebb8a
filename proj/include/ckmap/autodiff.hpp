#pragma once

#include <functional>
#include <memory>
#include <string>

#include "ckmap/tensor.hpp"

namespace ckmap::ad {

/// One value in the computation graph. Nodes are created through the op
/// functions below; backward() walks reachable nodes in reverse creation
/// order, so a graph built in deterministic order backpropagates in
/// deterministic order (bit-stable runs).
class Node {
 public:
  Tensor value;
  Tensor grad;  // allocated on demand during backward
  bool requires_grad = false;
  std::uint64_t id = 0;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;  // reads this->grad, accumulates into parents

  Tensor& ensure_grad() {
    if (grad.data.empty()) grad = Tensor::zeros(value.shape);
    return grad;
  }
};

using NodePtr = std::shared_ptr<Node>;

/// Lightweight handle to a graph node.
struct Var {
  NodePtr node;

  const Tensor& value() const { return node->value; }
  const Shape& shape() const { return node->value.shape; }
  Tensor& grad() const { return node->ensure_grad(); }
  bool defined() const { return node != nullptr; }
};

/// Leaf with no gradient.
Var constant(Tensor value);
/// Trainable leaf.
Var parameter(Tensor value);
/// Custom op from explicit inputs, a precomputed value and a backward closure.
Var make_op(std::vector<Var> inputs, Tensor value, std::function<void(Node&)> backprop);

// Elementwise / arithmetic.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);

// Activations.
Var gelu(const Var& x);
Var softplus(const Var& x);

// Reductions / shape.
Var sum(const Var& x);                       // -> scalar {1}
Var reshape(const Var& x, Shape new_shape);  // same numel
Var concat(const std::vector<Var>& xs, std::size_t axis);
Var slice(const Var& x, std::size_t axis, std::size_t start, std::size_t len);

// NN primitives. x is (B, C, H, W) unless noted.
Var conv2d(const Var& x, const Var& w, const Var& b);  // w (Cout, Cin, kh, kw), same padding
Var linear(const Var& x, const Var& w, const Var& b);  // x (B, In), w (Out, In), b (Out)
Var group_norm(const Var& x, const Var& gamma, const Var& beta, std::size_t groups,
               double eps = 1e-5);
Var mean_pool_spatial(const Var& x);                       // (B,C,H,W) -> (B,C)
Var channel_affine(const Var& x, const Var& w, const Var& b);  // w,b (B,C) broadcast over H,W

/// Runs reverse-mode accumulation from a scalar root (seeds d(root)=1).
void backward(const Var& root);

/// Clears gradients on every node reachable from the given roots.
void zero_grad(const std::vector<Var>& params);

}  // namespace ckmap::ad
