#pragma once

#include <functional>
#include <span>
#include <string>

#include "vinrs/autodiff.hpp"

namespace vinrs::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  int worst_index = -1;
};

/// Central-difference check of reverse-mode gradients.
///
/// loss_fn must rebuild the forward graph and return the scalar loss; it is
/// re-evaluated with each parameter element nudged by +/- h. Relative error
/// per element is |g_analytic - g_fd| / max(|g_fd|, 1e-8).
GradCheckResult grad_check(const std::function<Var()>& loss_fn,
                           std::span<Parameter> params, double h);

}  // namespace vinrs::nn
