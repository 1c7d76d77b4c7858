#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace latentdiff {

// Batches are row-major in the logical sense: one sample per row.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

/// Mutable views of a model's parameters, in a fixed traversal order.
using ParamRefs = std::vector<Matrix*>;
using ConstParamRefs = std::vector<const Matrix*>;
/// Gradients (or optimizer moments) laid out in the same order as ParamRefs.
using Grads = std::vector<Matrix>;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline Grads zeros_like(const ConstParamRefs& params) {
  Grads out;
  out.reserve(params.size());
  for (const Matrix* p : params) out.push_back(Matrix::Zero(p->rows(), p->cols()));
  return out;
}

inline ConstParamRefs to_const(const ParamRefs& refs) {
  return ConstParamRefs(refs.begin(), refs.end());
}

inline std::size_t parameter_count(const ConstParamRefs& params) {
  std::size_t n = 0;
  for (const Matrix* p : params) n += static_cast<std::size_t>(p->size());
  return n;
}

}  // namespace latentdiff
