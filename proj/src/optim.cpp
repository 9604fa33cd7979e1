#include "vinrs/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace vinrs::nn {

namespace {

void require_finite_grad(const Parameter& p) {
  if (!p.gradient().all_finite())
    throw std::runtime_error("optimizer: non-finite gradient in parameter " + p.name());
}

}  // namespace

void sgd_step(std::span<Parameter> params, double learning_rate) {
  for (auto& p : params) {
    require_finite_grad(p);
    Tensor& v = p.value();
    const Tensor& g = p.gradient();
    for (int i = 0; i < v.numel(); ++i) v[i] -= learning_rate * g[i];
  }
}

void AdamOptimizer::step(std::span<Parameter> params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& p : params) {
    require_finite_grad(p);
    Tensor& value = p.value();
    const Tensor& g = p.gradient();
    auto& mom = state_[p.var().get()];
    if (mom.m.empty()) {
      mom.m.assign(static_cast<std::size_t>(value.numel()), 0.0);
      mom.v.assign(static_cast<std::size_t>(value.numel()), 0.0);
    }
    for (int i = 0; i < value.numel(); ++i) {
      const double gi = g[i];
      mom.m[static_cast<std::size_t>(i)] =
          beta1_ * mom.m[static_cast<std::size_t>(i)] + (1.0 - beta1_) * gi;
      mom.v[static_cast<std::size_t>(i)] =
          beta2_ * mom.v[static_cast<std::size_t>(i)] + (1.0 - beta2_) * gi * gi;
      const double mhat = mom.m[static_cast<std::size_t>(i)] / bc1;
      const double vhat = mom.v[static_cast<std::size_t>(i)] / bc2;
      value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace vinrs::nn
