#pragma once

// Dense primitives shared by the model, the losses and the metrics.
// Matrices are row-major; every kernel is templated on the scalar type and
// instantiated with double throughout the library.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>

#include "c3/errors.hpp"

namespace c3 {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using RowVector = RowVectorX<double>;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Unit-norm copy of every row of `m`. Throws DegenerateRowError naming the
/// first row whose norm is zero.
template <typename Derived>
MatrixX<typename Derived::Scalar> row_l2_normalize(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const Scalar norm = m.row(i).norm();
    if (!(norm > Scalar(0))) throw DegenerateRowError(static_cast<std::size_t>(i));
    out.row(i) = m.row(i) / norm;
  }
  return out;
}

/// Gram matrix of unit rows, i.e. the pairwise cosine similarities.
/// The result is exactly symmetric: the lower triangle mirrors the upper one.
template <typename Derived>
MatrixX<typename Derived::Scalar> similarity_matrix(const Eigen::MatrixBase<Derived>& z,
                                                    double norm_tolerance = 1e-6) {
  using Scalar = typename Derived::Scalar;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const Scalar norm = z.row(i).norm();
    if (!(std::abs(norm - Scalar(1)) <= Scalar(norm_tolerance)))
      throw ContractError("similarity_matrix: row " + std::to_string(i) +
                          " is not unit-norm (norm " + std::to_string(double(norm)) + ")");
  }
  MatrixX<Scalar> s = z * z.transpose();
  for (Eigen::Index i = 0; i < s.rows(); ++i)
    for (Eigen::Index j = i + 1; j < s.cols(); ++j) s(j, i) = s(i, j);
  return s;
}

/// log(sum(exp(v))) with a max shift.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::DenseBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  if (v.size() == 0) throw ContractError("log_sum_exp: empty input");
  const Scalar shift = v.maxCoeff();
  if (!std::isfinite(shift)) return shift;
  Scalar acc(0);
  for (Eigen::Index i = 0; i < v.size(); ++i) acc += std::exp(v(i) - shift);
  return shift + std::log(acc);
}

inline void check_prob_vector(const auto& p, double tolerance = 1e-9) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double pi = static_cast<double>(p(i));
    if (!(pi >= 0.0 && pi <= 1.0 + tolerance))
      throw ContractError("probability entry " + std::to_string(i) + " outside [0,1]: " +
                          std::to_string(pi));
    sum += pi;
  }
  if (!(std::abs(sum - 1.0) <= tolerance))
    throw ContractError("probabilities sum to " + std::to_string(sum) + ", expected 1");
}

/// Shannon entropy in nats, with 0 log 0 = 0.
template <typename Derived>
typename Derived::Scalar entropy(const Eigen::DenseBase<Derived>& p) {
  using Scalar = typename Derived::Scalar;
  check_prob_vector(p);
  Scalar h(0);
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p(i) > Scalar(0)) h -= p(i) * std::log(p(i));
  return h;
}

/// Row-wise softmax, max-shifted.
template <typename Derived>
MatrixX<typename Derived::Scalar> row_softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const Scalar shift = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - shift).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace c3
