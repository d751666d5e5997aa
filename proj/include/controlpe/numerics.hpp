#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "controlpe/error.hpp"
#include "controlpe/types.hpp"

namespace controlpe {

template <class S>
std::string shape_str(const Mat<S>& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

// Checked product. Model code on hot paths multiplies Eigen expressions
// directly after validating shapes once at its entry point.
template <class S>
Mat<S> matmul(const Mat<S>& a, const Mat<S>& b) {
  if (a.cols() != b.rows())
    fail(Err::shape_mismatch, "matmul: " + shape_str(a) + " * " + shape_str(b));
  return a * b;
}

// Row-wise softmax with per-row max subtraction.
template <class S>
Mat<S> softmax_rows(const Mat<S>& x) {
  if (!x.allFinite()) fail(Err::non_finite, "softmax_rows: non-finite input");
  Mat<S> out(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    S m = x.row(i).maxCoeff();
    out.row(i) = (x.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

// out_i = gain_i * x_i / sqrt(mean(x^2) + eps)
template <class S>
Vec<S> rms_norm(const Vec<S>& x, const Vec<S>& gain, S eps) {
  if (x.size() != gain.size())
    fail(Err::shape_mismatch, "rms_norm: x has " + std::to_string(x.size()) + " entries, gain " +
                                  std::to_string(gain.size()));
  if (eps < S(0)) fail(Err::bad_argument, "rms_norm: eps must be >= 0");
  S ms = x.squaredNorm() / static_cast<S>(x.size());
  S inv = S(1) / std::sqrt(ms + eps);
  return (gain.array() * x.array() * inv).matrix();
}

// Mean over masked positions of -log softmax(logits_t)[target_t].
// Accumulates in double regardless of storage scalar.
template <class S>
double cross_entropy(const Mat<S>& logits, const std::vector<int>& targets,
                     const std::vector<std::uint8_t>& mask) {
  const auto t_len = static_cast<std::size_t>(logits.rows());
  if (targets.size() != t_len || mask.size() != t_len)
    fail(Err::shape_mismatch, "cross_entropy: " + std::to_string(t_len) + " logit rows, " +
                                  std::to_string(targets.size()) + " targets, " +
                                  std::to_string(mask.size()) + " mask entries");
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < t_len; ++t) {
    if (!mask[t]) continue;
    int y = targets[t];
    if (y < 0 || y >= logits.cols())
      fail(Err::bad_argument, "cross_entropy: target id " + std::to_string(y) + " out of range");
    const auto row = logits.row(static_cast<Index>(t));
    double m = static_cast<double>(row.maxCoeff());
    double lse = 0.0;
    for (Index j = 0; j < logits.cols(); ++j) lse += std::exp(static_cast<double>(row(j)) - m);
    total += std::log(lse) - (static_cast<double>(row(y)) - m);
    ++n;
  }
  if (n == 0) fail(Err::empty_mask, "cross_entropy: no masked positions");
  return total / static_cast<double>(n);
}

// Exact GELU and its derivative; smooth activation keeps the
// finite-difference gradient oracle clean.
template <class S>
S gelu(S x) {
  return S(0.5) * x * (S(1) + std::erf(x * S(0.70710678118654752440)));
}

template <class S>
S gelu_grad(S x) {
  S phi = S(0.5) * (S(1) + std::erf(x * S(0.70710678118654752440)));
  S pdf = std::exp(S(-0.5) * x * x) * S(0.39894228040143267794);
  return phi + x * pdf;
}

}  // namespace controlpe
