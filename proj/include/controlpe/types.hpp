#pragma once

#include <Eigen/Dense>

namespace controlpe {

// Row-major storage throughout: containers serialize tensors as row-major
// f32 and activations are token-major, so .data() is always the wire layout.
template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using MatF = Mat<float>;
using MatD = Mat<double>;
using VecF = Vec<float>;
using VecD = Vec<double>;
using Index = Eigen::Index;

}  // namespace controlpe
