#pragma once

#include <cmath>
#include <functional>

#include "controlpe/error.hpp"
#include "controlpe/types.hpp"

namespace controlpe {

using LossFn = std::function<double(const VecD&)>;

// Central differences, one coordinate at a time. Ground truth for every
// hand-derived gradient in this codebase; keep it boring.
inline VecD finite_diff_grad(const LossFn& loss_fn, const VecD& params, double h) {
  if (!(h > 0.0)) fail(Err::bad_argument, "finite_diff_grad: h must be > 0");
  VecD grad(params.size());
  VecD p = params;
  for (Index i = 0; i < params.size(); ++i) {
    double orig = p(i);
    p(i) = orig + h;
    double up = loss_fn(p);
    p(i) = orig - h;
    double down = loss_fn(p);
    p(i) = orig;
    if (!std::isfinite(up) || !std::isfinite(down))
      fail(Err::non_finite, "finite_diff_grad: loss is not finite");
    grad(i) = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace controlpe
