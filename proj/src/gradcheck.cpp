#include "vinrs/gradcheck.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace vinrs::nn {

GradCheckResult grad_check(const std::function<Var()>& loss_fn,
                           std::span<Parameter> params, double h) {
  if (h <= 0.0) throw std::invalid_argument("grad_check: h must be positive");

  zero_grads(params);
  backward(loss_fn());
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) analytic.push_back(p.gradient());

  auto eval = [&](const Parameter& p) {
    try {
      return loss_fn()->value[0];
    } catch (const std::exception& e) {
      throw std::runtime_error("grad_check: evaluation failed while perturbing " +
                               p.name() + ": " + e.what());
    }
  };

  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = params[pi];
    for (int i = 0; i < p.value().numel(); ++i) {
      const double saved = p.value()[i];
      p.value()[i] = saved + h;
      const double lp = eval(p);
      p.value()[i] = saved - h;
      const double lm = eval(p);
      p.value()[i] = saved;
      const double fd = (lp - lm) / (2.0 * h);
      if (!std::isfinite(fd))
        throw std::runtime_error("grad_check: non-finite difference at " + p.name());
      const double rel =
          std::fabs(analytic[pi][i] - fd) / std::max(std::fabs(fd), 1e-8);
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = p.name();
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace vinrs::nn
