#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vinrs/tensor.hpp"

namespace vinrs::nn {

struct Node;
using Var = std::shared_ptr<Node>;

/// One value in the computation graph. Ops allocate a fresh node per output;
/// leaves (parameters, constants) persist across forward passes, so gradients
/// accumulate in them until zero_grad.
struct Node {
  Tensor value;
  Tensor grad;  // same shape as value once touched
  std::vector<Var> parents;
  std::function<void(Node&)> backward_fn;
  bool requires_grad = false;
  std::string name;

  Tensor& ensure_grad() {
    if (grad.shape != value.shape) grad = Tensor(value.shape);
    return grad;
  }
  bool is_scalar() const { return value.numel() == 1; }
};

Var constant(Tensor v);

/// Trainable leaf tensor with an accumulated gradient and a name.
class Parameter {
 public:
  Parameter() = default;
  Parameter(Tensor init, std::string name);

  const Tensor& value() const { return node_->value; }
  Tensor& value() { return node_->value; }
  const Tensor& gradient() const { return node_->ensure_grad(); }
  Tensor& gradient() { return node_->ensure_grad(); }
  const std::string& name() const { return node_->name; }
  const Var& var() const { return node_; }

  void zero_grad() { node_->ensure_grad().fill(0.0); }

 private:
  Var node_;
};

void zero_grads(std::span<Parameter> params);

// ---- differentiable ops -------------------------------------------------
//
// All ops validate shapes, never mutate inputs, and reject non-finite
// outputs. Convolutions are stride-1 with zero same-padding, kernel dims odd.

/// 2-D convolution: x [Cin,H,W], kernel [Cout,Cin,kh,kw], bias [Cout] -> [Cout,H,W].
Var conv2d(const Var& x, const Var& kernel, const Var& bias);
Var conv2d(const Var& x, const Var& kernel);  // no bias term

struct ChannelMax {
  Var values;               // [H,W]
  std::vector<int> argmax;  // winning channel per cell, ties -> lowest index
};

/// Channel-wise max over a [C,H,W] tensor. Backward routes the gradient to
/// the winning channel only.
ChannelMax channel_max(const Var& x);

/// channel_max with the winning channels pinned externally (used to keep the
/// selection pattern fixed across the two evaluations of a finite-difference
/// gradient check).
Var channel_max_frozen(const Var& x, const std::vector<int>& argmax);

/// Affine map: x [n], weights [m,n], bias [m] -> [m].
Var dense(const Var& x, const Var& weights, const Var& bias);

Var relu(const Var& x);
Var sigmoid(const Var& x);
Var log(const Var& x);
Var clamp(const Var& x, double lo, double hi);  // zero gradient outside [lo, hi]

Var add(const Var& a, const Var& b);       // elementwise, same shape
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);       // elementwise, same shape
Var scale(const Var& x, double c);
Var add_const(const Var& x, double c);
Var rsub_const(double c, const Var& x);    // c - x

Var sum(const Var& x);                     // -> scalar
Var reshape(const Var& x, std::vector<int> shape);
Var pick(const Var& x, int flat_index);    // -> scalar
Var concat_channels(const Var& a, const Var& b);  // [Ca+Cb,H,W]
Var stack_scalars(const std::vector<Var>& xs);    // n scalars -> [n]

/// Reverse-mode sweep from a scalar loss. Parameter gradients accumulate
/// across calls until zero_grads.
void backward(const Var& loss);

}  // namespace vinrs::nn
