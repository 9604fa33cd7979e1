#pragma once

#include <span>
#include <unordered_map>
#include <vector>

#include "vinrs/autodiff.hpp"

namespace vinrs::nn {

/// Plain gradient descent: value -= lr * gradient.
void sgd_step(std::span<Parameter> params, double learning_rate);

/// Adam with per-parameter first/second moment state.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double learning_rate, double beta1 = 0.9,
                         double beta2 = 0.999, double epsilon = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

  void step(std::span<Parameter> params);

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  double lr_, beta1_, beta2_, eps_;
  long long t_ = 0;
  std::unordered_map<const Node*, Moments> state_;
};

}  // namespace vinrs::nn
