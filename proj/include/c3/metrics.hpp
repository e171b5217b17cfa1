#pragma once

#include <cstdint>
#include <vector>

#include "c3/numerics.hpp"

namespace c3 {

/// Hard cluster assignment: labels in [0, num_clusters).
struct Partition {
  std::vector<int> labels;
  int num_clusters = 0;

  Partition() = default;
  Partition(std::vector<int> labels, int num_clusters);
  /// num_clusters inferred as max label + 1.
  explicit Partition(std::vector<int> labels);

  std::size_t size() const { return labels.size(); }
  friend bool operator==(const Partition&, const Partition&) = default;
};

/// counts(p, t) = #samples with predicted label p and true label t.
using ContingencyTable = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

ContingencyTable contingency(const Partition& pred, const Partition& truth);

struct Assignment {
  std::vector<int> col_for_row;
  double cost = 0.0;
};

/// Minimum-cost perfect matching on a square cost matrix (O(n^3) shortest
/// augmenting path). Among optimal matchings the lexicographically smallest
/// col_for_row is returned.
Assignment hungarian(const Matrix& cost);

/// Best fraction of samples matched under a cluster-to-class bijection.
double accuracy(const Partition& pred, const Partition& truth);

/// Mutual information over the arithmetic mean of the two entropies;
/// 0 when both partitions are single-cluster.
double nmi(const Partition& pred, const Partition& truth);

/// Adjusted Rand index (pair counting). Returns 1 when the index is
/// undefined because both partitions are trivial in the same way.
double ari(const Partition& pred, const Partition& truth);

struct ClusteringScores {
  double acc = 0.0;
  double nmi = 0.0;
  double ari = 0.0;
};

ClusteringScores score_all(const Partition& pred, const Partition& truth);

}  // namespace c3
