#pragma once

// Training objectives over a batch of 2N augmented embeddings stacked as
// [z^a; z^b], so row i and row i+N are the two views of sample i ("twins").
//
// Initialization stage: NT-Xent on instances (z) and on cluster columns (c),
// with the cluster-assignment entropy regularizer.
// C3 stage: thresholded positive mask, entropy-regularized negative weights
// and the weighted contrastive loss.
//
// In every sum the anchor's own entry (i, i) is excluded.

#include <cmath>
#include <limits>
#include <vector>

#include "c3/numerics.hpp"

namespace c3 {

inline Eigen::Index twin_index(Eigen::Index i, Eigen::Index half) {
  return i < half ? i + half : i - half;
}

namespace detail {

template <typename Derived>
void require_paired_square(const Eigen::MatrixBase<Derived>& s, const char* what) {
  if (s.rows() != s.cols())
    throw ShapeError(std::string(what) + ": similarity matrix must be square");
  if (s.rows() < 2 || s.rows() % 2 != 0)
    throw ShapeError(std::string(what) + ": expected 2N rows with N >= 1, got " +
                     std::to_string(s.rows()));
}

template <typename Scalar>
struct ContrastiveResult {
  Scalar loss;
  MatrixX<Scalar> grad_s;
};

// Mean over rows of -log softmax_{j != i}(S_ij / tau) evaluated at the twin.
template <typename Scalar>
ContrastiveResult<Scalar> twin_contrastive(const MatrixX<Scalar>& s, Scalar tau) {
  const Eigen::Index rows = s.rows();
  const Eigen::Index half = rows / 2;
  MatrixX<Scalar> grad = MatrixX<Scalar>::Zero(rows, rows);
  Scalar total(0);
  std::vector<Scalar> logits(static_cast<std::size_t>(rows - 1));
  for (Eigen::Index i = 0; i < rows; ++i) {
    Scalar shift = -std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index j = 0, k = 0; j < rows; ++j) {
      if (j == i) continue;
      logits[k] = s(i, j) / tau;
      shift = std::max(shift, logits[k++]);
    }
    Scalar acc(0);
    for (const Scalar l : logits) acc += std::exp(l - shift);
    const Scalar lse = shift + std::log(acc);
    const Eigen::Index t = twin_index(i, half);
    total += lse - s(i, t) / tau;
    for (Eigen::Index j = 0; j < rows; ++j) {
      if (j == i) continue;
      grad(i, j) = std::exp(s(i, j) / tau - lse) / tau;
    }
    grad(i, t) -= Scalar(1) / tau;
  }
  const Scalar scale = Scalar(1) / Scalar(rows);
  return {total * scale, grad * scale};
}

}  // namespace detail

/// mask(i, j) = S_ij >= zeta for j != i; the diagonal is always false and the
/// twin entry always true.
template <typename Derived>
BoolMatrix positive_mask(const Eigen::MatrixBase<Derived>& s, double zeta) {
  if (!(zeta >= -1.0 && zeta <= 1.0)) throw ConfigError("zeta", "must lie in [-1, 1]");
  detail::require_paired_square(s, "positive_mask");
  const Eigen::Index rows = s.rows();
  const Eigen::Index half = rows / 2;
  BoolMatrix mask(rows, rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < rows; ++j) mask(i, j) = j != i && s(i, j) >= zeta;
    mask(i, twin_index(i, half)) = true;
  }
  return mask;
}

/// Closed-form minimizer, per anchor row, of
///   -sum_j w_j (1 - |S_ij|) - H(w) / gamma   subject to sum_j w_j = 1,
/// i.e. w_ij = softmax_{j != i}(gamma (1 - |S_ij|)). The diagonal is zero.
/// Entries with equal |S_ij| receive bit-identical weights.
template <typename Derived>
MatrixX<typename Derived::Scalar> compute_weights(const Eigen::MatrixBase<Derived>& s,
                                                  double gamma) {
  using Scalar = typename Derived::Scalar;
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma", "must be positive");
  if (s.rows() != s.cols()) throw ShapeError("compute_weights: similarity matrix must be square");
  if (s.rows() < 2) throw ShapeError("compute_weights: need at least two rows");
  const Eigen::Index rows = s.rows();
  MatrixX<Scalar> w = MatrixX<Scalar>::Zero(rows, rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    Scalar shift = -std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index j = 0; j < rows; ++j) {
      if (j == i) continue;
      w(i, j) = Scalar(gamma) * (Scalar(1) - std::abs(s(i, j)));
      shift = std::max(shift, w(i, j));
    }
    Scalar total(0);
    for (Eigen::Index j = 0; j < rows; ++j) {
      if (j == i) continue;
      w(i, j) = std::exp(w(i, j) - shift);
      total += w(i, j);
    }
    w.row(i) /= total;
  }
  return w;
}

template <typename Scalar>
struct C3LossResult {
  Scalar loss;
  MatrixX<Scalar> grad_s;  // d loss / d S with the weights held fixed
};

/// Weighted multi-positive contrastive loss, averaged over the 2N anchors:
///   l_i = -log( sum_{j in pos(i)} exp(S_ij) / sum_{j != i} w_ij exp(S_ij) ).
/// The numerator is unweighted. Weights are treated as constants.
template <typename DerivedS, typename DerivedW>
C3LossResult<typename DerivedS::Scalar> c3_loss(const Eigen::MatrixBase<DerivedS>& s,
                                                const BoolMatrix& mask,
                                                const Eigen::MatrixBase<DerivedW>& w) {
  using Scalar = typename DerivedS::Scalar;
  detail::require_paired_square(s, "c3_loss");
  const Eigen::Index rows = s.rows();
  if (mask.rows() != rows || mask.cols() != rows || w.rows() != rows || w.cols() != rows)
    throw ShapeError("c3_loss: similarity, mask and weights must share one 2N x 2N shape");

  constexpr Scalar kNegInf = -std::numeric_limits<Scalar>::infinity();
  MatrixX<Scalar> grad = MatrixX<Scalar>::Zero(rows, rows);
  MatrixX<Scalar> den_logits(1, rows);
  Scalar total(0);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (mask(i, i)) throw ContractError("c3_loss: mask includes the anchor itself");
    // Numerator and denominator share one accumulation routine so that equal
    // sets produce bit-identical log-sums.
    auto log_sum = [&](auto&& term, auto&& include) {
      Scalar shift = kNegInf;
      for (Eigen::Index j = 0; j < rows; ++j)
        if (include(j)) shift = std::max(shift, term(j));
      if (shift == kNegInf) return kNegInf;
      Scalar acc(0);
      for (Eigen::Index j = 0; j < rows; ++j)
        if (include(j)) acc += std::exp(term(j) - shift);
      return shift + std::log(acc);
    };
    auto positive = [&](Eigen::Index j) { return bool(mask(i, j)); };
    auto weighted = [&](Eigen::Index j) { return j != i && w(i, j) > Scalar(0); };
    auto sim = [&](Eigen::Index j) { return s(i, j); };
    for (Eigen::Index j = 0; j < rows; ++j)
      den_logits(0, j) = weighted(j) ? s(i, j) + std::log(w(i, j)) : kNegInf;
    auto den_term = [&](Eigen::Index j) { return den_logits(0, j); };

    const Scalar log_num = log_sum(sim, positive);
    if (log_num == kNegInf) throw ContractError("c3_loss: anchor without positives");
    const Scalar log_den = log_sum(den_term, weighted);
    if (log_den == kNegInf) throw ContractError("c3_loss: all weights of an anchor are zero");
    total += log_den - log_num;
    for (Eigen::Index j = 0; j < rows; ++j) {
      Scalar g(0);
      if (weighted(j)) g += std::exp(den_logits(0, j) - log_den);
      if (positive(j)) g -= std::exp(s(i, j) - log_num);
      grad(i, j) = g;
    }
  }
  const Scalar scale = Scalar(1) / Scalar(rows);
  return {total * scale, grad * scale};
}

/// Back-propagates dL/dS through S = Z Z^T: dZ = (dS + dS^T) Z.
template <typename DerivedG, typename DerivedZ>
MatrixX<typename DerivedZ::Scalar> chain_to_embeddings(const Eigen::MatrixBase<DerivedG>& grad_s,
                                                       const Eigen::MatrixBase<DerivedZ>& z) {
  if (grad_s.rows() != grad_s.cols() || grad_s.rows() != z.rows())
    throw ShapeError("chain_to_embeddings: dS must be square with one row per embedding");
  return (grad_s + grad_s.transpose()) * z;
}

template <typename Scalar>
struct EmbeddingLossResult {
  Scalar loss;
  MatrixX<Scalar> grad_z;
};

/// Instance-level NT-Xent: each anchor's only positive is its twin. Rows of
/// `z` are expected to be unit-norm; the loss is evaluated on Z Z^T as given.
template <typename Derived>
EmbeddingLossResult<typename Derived::Scalar> init_instance_loss(
    const Eigen::MatrixBase<Derived>& z, double tau) {
  using Scalar = typename Derived::Scalar;
  if (!(tau > 0.0)) throw ConfigError("tau_instance", "must be positive");
  if (z.rows() < 2 || z.rows() % 2 != 0)
    throw ShapeError("init_instance_loss: expected 2N stacked rows");
  const MatrixX<Scalar> s = z * z.transpose();
  auto res = detail::twin_contrastive<Scalar>(s, Scalar(tau));
  return {res.loss, chain_to_embeddings(res.grad_s, z)};
}

template <typename Scalar>
struct ClusterLossResult {
  Scalar loss;
  Scalar contrastive;
  Scalar entropy;  // H(P^a) + H(P^b) of the mean assignment probabilities
  MatrixX<Scalar> grad_a;
  MatrixX<Scalar> grad_b;
};

/// Cluster-level NT-Xent over the 2M cluster columns (column k of c_a is the
/// twin of column k of c_b, similarity is cosine, temperature tau), minus
/// the entropy of the mean cluster-assignment distribution of each view.
template <typename DerivedA, typename DerivedB>
ClusterLossResult<typename DerivedA::Scalar> init_cluster_loss(
    const Eigen::MatrixBase<DerivedA>& c_a, const Eigen::MatrixBase<DerivedB>& c_b, double tau) {
  using Scalar = typename DerivedA::Scalar;
  if (!(tau > 0.0)) throw ConfigError("tau_cluster", "must be positive");
  if (c_a.rows() != c_b.rows() || c_a.cols() != c_b.cols())
    throw ShapeError("init_cluster_loss: views must have the same shape");
  if (c_a.rows() < 1 || c_a.cols() < 1) throw ShapeError("init_cluster_loss: empty input");
  for (Eigen::Index i = 0; i < c_a.rows(); ++i) {
    check_prob_vector(c_a.row(i));
    check_prob_vector(c_b.row(i));
  }
  const Eigen::Index n = c_a.rows();
  const Eigen::Index m = c_a.cols();

  MatrixX<Scalar> y(2 * m, n);
  y.topRows(m) = c_a.transpose();
  y.bottomRows(m) = c_b.transpose();
  const VectorX<Scalar> norms = y.rowwise().norm();
  const MatrixX<Scalar> y_unit = row_l2_normalize(y);
  const MatrixX<Scalar> s = y_unit * y_unit.transpose();
  auto con = detail::twin_contrastive<Scalar>(s, Scalar(tau));

  const MatrixX<Scalar> grad_unit = chain_to_embeddings(con.grad_s, y_unit);
  const VectorX<Scalar> dots = grad_unit.cwiseProduct(y_unit).rowwise().sum();
  MatrixX<Scalar> grad_y = grad_unit - y_unit.cwiseProduct(dots.replicate(1, n));
  grad_y.array().colwise() /= norms.array();

  MatrixX<Scalar> grad_a = grad_y.topRows(m).transpose();
  MatrixX<Scalar> grad_b = grad_y.bottomRows(m).transpose();

  // Negative entropy of the column means; d/dc_ik = (log P_k + 1) / n.
  Scalar h_total(0);
  auto add_entropy = [&](const auto& c, MatrixX<Scalar>& grad) {
    const RowVectorX<Scalar> p = c.colwise().mean();
    for (Eigen::Index k = 0; k < m; ++k) {
      if (p(k) <= Scalar(0)) continue;
      const Scalar lp = std::log(p(k));
      h_total -= p(k) * lp;
      grad.col(k).array() += (lp + Scalar(1)) / Scalar(n);
    }
  };
  add_entropy(c_a, grad_a);
  add_entropy(c_b, grad_b);

  return {con.loss - h_total, con.loss, h_total, std::move(grad_a), std::move(grad_b)};
}

/// Mean number of positives per anchor row (the twin included, so >= 1).
inline double count_positive_pairs(const BoolMatrix& mask) {
  if (mask.rows() == 0) return 0.0;
  return static_cast<double>(mask.count()) / static_cast<double>(mask.rows());
}

}  // namespace c3
