#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "controlpe/error.hpp"
#include "controlpe/types.hpp"

namespace controlpe {

struct AdamOptions {
  float lr = 3e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

// Moment accumulators parallel to a fixed parameter list; lazily shaped on
// the first step.
struct AdamState {
  std::vector<MatF> m;
  std::vector<MatF> v;
  std::int64_t step = 0;
};

inline void adam_step(const std::vector<MatF*>& params, const std::vector<const MatF*>& grads,
                      AdamState& state, const AdamOptions& opt) {
  if (!(opt.lr > 0.0f)) fail(Err::bad_argument, "adam_step: lr must be > 0");
  if (params.size() != grads.size())
    fail(Err::shape_mismatch, "adam_step: " + std::to_string(params.size()) + " params vs " +
                                  std::to_string(grads.size()) + " grads");
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i] = MatF::Zero(params[i]->rows(), params[i]->cols());
      state.v[i] = MatF::Zero(params[i]->rows(), params[i]->cols());
    }
  }
  if (state.m.size() != params.size())
    fail(Err::shape_mismatch, "adam_step: state tracks a different parameter list");

  state.step += 1;
  const double b1 = opt.beta1, b2 = opt.beta2;
  const float c1 = static_cast<float>(1.0 - std::pow(b1, static_cast<double>(state.step)));
  const float c2 = static_cast<float>(1.0 - std::pow(b2, static_cast<double>(state.step)));
  for (std::size_t i = 0; i < params.size(); ++i) {
    MatF& p = *params[i];
    const MatF& g = *grads[i];
    if (p.rows() != g.rows() || p.cols() != g.cols() || p.rows() != state.m[i].rows() ||
        p.cols() != state.m[i].cols())
      fail(Err::shape_mismatch, "adam_step: tensor " + std::to_string(i) + " shape mismatch");
    state.m[i] = opt.beta1 * state.m[i] + (1.0f - opt.beta1) * g;
    state.v[i].array() = opt.beta2 * state.v[i].array() + (1.0f - opt.beta2) * g.array().square();
    p.array() -= opt.lr * (state.m[i].array() / c1) /
                 ((state.v[i].array() / c2).sqrt() + opt.eps);
  }
}

}  // namespace controlpe
