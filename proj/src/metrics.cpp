#include "c3/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace c3 {

Partition::Partition(std::vector<int> l, int m) : labels(std::move(l)), num_clusters(m) {
  if (num_clusters < 0) throw ContractError("partition: negative cluster count");
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] < 0 || labels[i] >= num_clusters)
      throw ContractError("partition: label " + std::to_string(labels[i]) + " at index " +
                          std::to_string(i) + " outside [0, " + std::to_string(num_clusters) + ")");
}

Partition::Partition(std::vector<int> l)
    : Partition(l, l.empty() ? 0 : *std::max_element(l.begin(), l.end()) + 1) {}

namespace {

void require_same_length(const Partition& a, const Partition& b, const char* what) {
  if (a.size() != b.size())
    throw ShapeError(std::string(what) + ": partitions have different lengths (" +
                     std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
}

// Matchings in the equality subgraph of an optimal dual are exactly the
// optimal matchings. Fix rows in order, each to the smallest column that
// still admits a perfect matching of the rest.
std::vector<int> lexicographic_optimum(const std::vector<std::vector<char>>& tight,
                                       std::vector<int> col_for_row) {
  const int n = static_cast<int>(col_for_row.size());
  std::vector<int> row_for_col(n);
  for (int r = 0; r < n; ++r) row_for_col[col_for_row[r]] = r;
  std::vector<char> fixed_row(n, 0), fixed_col(n, 0);

  // Alternating path from a free row `start` to the free column `target`,
  // avoiding fixed rows/cols. Applies the path on success.
  auto augment = [&](int start, int target) {
    std::vector<int> parent_col(n, -1);  // column -> row it was reached from
    std::vector<char> seen_col(n, 0);
    std::vector<int> queue{start};
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const int r = queue[q];
      for (int c = 0; c < n; ++c) {
        if (!tight[r][c] || fixed_col[c] || seen_col[c]) continue;
        seen_col[c] = 1;
        parent_col[c] = r;
        if (c == target) {
          int col = c;
          while (true) {
            const int row = parent_col[col];
            const int prev = col_for_row[row];
            col_for_row[row] = col;
            row_for_col[col] = row;
            if (row == start) return true;
            col = prev;
          }
        }
        const int next = row_for_col[c];
        if (next >= 0 && !fixed_row[next]) queue.push_back(next);
      }
    }
    return false;
  };

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (!tight[i][j] || fixed_col[j]) continue;
      if (col_for_row[i] == j) break;
      const auto saved_c = col_for_row;
      const auto saved_r = row_for_col;
      const int displaced = row_for_col[j];
      const int freed = col_for_row[i];
      // Tentatively give j to i, then re-match the displaced row through
      // the remaining graph onto the column i released.
      fixed_row[i] = 1;
      fixed_col[j] = 1;
      col_for_row[i] = j;
      row_for_col[j] = i;
      row_for_col[freed] = -1;
      col_for_row[displaced] = -1;
      if (augment(displaced, freed)) {
        fixed_row[i] = 0;
        fixed_col[j] = 0;
        break;
      }
      fixed_row[i] = 0;
      fixed_col[j] = 0;
      col_for_row = saved_c;
      row_for_col = saved_r;
    }
    fixed_row[i] = 1;
    fixed_col[col_for_row[i]] = 1;
  }
  return col_for_row;
}

}  // namespace

ContingencyTable contingency(const Partition& pred, const Partition& truth) {
  require_same_length(pred, truth, "contingency");
  ContingencyTable t = ContingencyTable::Zero(pred.num_clusters, truth.num_clusters);
  for (std::size_t i = 0; i < pred.size(); ++i) ++t(pred.labels[i], truth.labels[i]);
  return t;
}

Assignment hungarian(const Matrix& cost) {
  if (cost.rows() != cost.cols()) throw ShapeError("hungarian: cost matrix must be square");
  if (!cost.allFinite()) throw ContractError("hungarian: cost matrix has non-finite entries");
  const int n = static_cast<int>(cost.rows());
  if (n == 0) return {};

  // Shortest augmenting path with row/column potentials, 1-based internally.
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> col_for_row(n);
  for (int j = 1; j <= n; ++j) col_for_row[match[j] - 1] = j - 1;

  const double scale = 1.0 + cost.cwiseAbs().maxCoeff();
  const double tol = 1e-9 * scale * n;
  std::vector<std::vector<char>> tight(n, std::vector<char>(n, 0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      tight[i][j] = std::abs(cost(i, j) - u[i + 1] - v[j + 1]) <= tol;

  Assignment out;
  out.col_for_row = lexicographic_optimum(tight, std::move(col_for_row));
  for (int i = 0; i < n; ++i) out.cost += cost(i, out.col_for_row[i]);
  return out;
}

double accuracy(const Partition& pred, const Partition& truth) {
  require_same_length(pred, truth, "accuracy");
  if (pred.size() == 0) throw ContractError("accuracy: empty partitions");
  const ContingencyTable table = contingency(pred, truth);
  const Eigen::Index k = std::max(table.rows(), table.cols());
  Matrix cost = Matrix::Zero(k, k);
  cost.topLeftCorner(table.rows(), table.cols()) = -table.cast<double>();
  const Assignment a = hungarian(cost);
  return -a.cost / static_cast<double>(pred.size());
}

namespace {

double entropy_of_counts(const Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>& counts, double n) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < counts.size(); ++i)
    if (counts(i) > 0) {
      const double p = static_cast<double>(counts(i)) / n;
      h -= p * std::log(p);
    }
  return h;
}

}  // namespace

double nmi(const Partition& pred, const Partition& truth) {
  require_same_length(pred, truth, "nmi");
  if (pred.size() == 0) throw ContractError("nmi: empty partitions");
  const ContingencyTable t = contingency(pred, truth);
  const double n = static_cast<double>(pred.size());
  const Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1> rows = t.rowwise().sum();
  const Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1> cols = t.colwise().sum().transpose();
  double mi = 0.0;
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index j = 0; j < t.cols(); ++j) {
      if (t(i, j) == 0) continue;
      const double nij = static_cast<double>(t(i, j));
      mi += nij / n * std::log(n * nij / (static_cast<double>(rows(i)) * static_cast<double>(cols(j))));
    }
  const double norm = 0.5 * (entropy_of_counts(rows, n) + entropy_of_counts(cols, n));
  if (norm <= 0.0) return 0.0;
  return std::clamp(mi / norm, 0.0, 1.0);
}

double ari(const Partition& pred, const Partition& truth) {
  require_same_length(pred, truth, "ari");
  if (pred.size() < 2) throw ContractError("ari: need at least two samples");
  const ContingencyTable t = contingency(pred, truth);
  auto comb2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double sum_ij = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) sum_ij += comb2(static_cast<double>(t.data()[i]));
  double sum_a = 0.0, sum_b = 0.0;
  const auto rows = t.rowwise().sum().eval();
  const auto cols = t.colwise().sum().eval();
  for (Eigen::Index i = 0; i < rows.size(); ++i) sum_a += comb2(static_cast<double>(rows(i)));
  for (Eigen::Index j = 0; j < cols.size(); ++j) sum_b += comb2(static_cast<double>(cols(j)));
  const double expected = sum_a * sum_b / comb2(static_cast<double>(pred.size()));
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (sum_ij - expected) / (max_index - expected);
}

ClusteringScores score_all(const Partition& pred, const Partition& truth) {
  return {accuracy(pred, truth), nmi(pred, truth), ari(pred, truth)};
}

}  // namespace c3
