#pragma once

#include <cmath>
#include <functional>

#include "agos/tensor.hpp"

namespace agos {

// Central finite differences: d(loss)/d(param[i]) ~ (L(+eps) - L(-eps)) / 2eps.
// The closure must re-evaluate the loss from scratch, reading `param` by
// reference, and must be deterministic (fixed seeds) so the two evaluations
// differ only in the perturbed entry.
inline Tensor<double> finite_diff_grad(Tensor<double>& param,
                                       const std::function<double()>& loss_fn,
                                       double eps = 1e-5) {
  Tensor<double> grad(param.shape);
  for (size_t i = 0; i < param.v.size(); ++i) {
    const double saved = param.v[i];
    param.v[i] = saved + eps;
    const double up = loss_fn();
    param.v[i] = saved - eps;
    const double down = loss_fn();
    param.v[i] = saved;
    grad.v[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

// Relative error with a floor: true relative error for healthy magnitudes,
// absolute error scaled by 1/floor for near-zero entries (finite differences
// carry ~1e-10 absolute noise in double, so a bare ratio would be
// meaningless there).
inline double rel_error(double a, double b, double floor = 1e-4) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace agos
