#include <cmath>
#include <random>

#include "c3/errors.hpp"
#include "c3/metrics.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace c3;

namespace {

Partition random_partition(std::mt19937_64& rng, std::size_t n, int k) {
  std::uniform_int_distribution<int> pick(0, k - 1);
  std::vector<int> labels(n);
  for (auto& l : labels) l = pick(rng);
  return Partition(labels, k);
}

Partition relabel(const Partition& p, std::mt19937_64& rng) {
  std::vector<int> perm(static_cast<std::size_t>(p.num_clusters));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> labels(p.labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = perm[p.labels[i]];
  return Partition(labels, p.num_clusters);
}

}  // namespace

TEST_CASE("partition validation") {
  CHECK_THROWS_AS(Partition({0, 3}, 3), ContractError);
  CHECK_THROWS_AS(Partition({0, -1}, 2), ContractError);
  CHECK(Partition({2, 0, 1}).num_clusters == 3);
}

TEST_CASE("contingency counts") {
  const ContingencyTable t = contingency(Partition({0, 0, 1, 1}, 2), Partition({0, 1, 1, 1}, 2));
  CHECK(t(0, 0) == 1);
  CHECK(t(0, 1) == 1);
  CHECK(t(1, 0) == 0);
  CHECK(t(1, 1) == 2);
  CHECK_THROWS_AS(contingency(Partition({0}, 1), Partition({0, 0}, 1)), ShapeError);
}

TEST_CASE("hungarian small examples") {
  Matrix c(3, 3);
  c << 4, 1, 3,
       2, 0, 5,
       3, 2, 2;
  const Assignment a = hungarian(c);
  CHECK(a.cost == 5.0);
  CHECK(a.col_for_row == std::vector<int>{1, 0, 2});

  // all-equal costs: the identity is the lexicographically smallest optimum
  const Assignment flat = hungarian(Matrix::Constant(4, 4, 7.0));
  CHECK(flat.col_for_row == std::vector<int>{0, 1, 2, 3});
  CHECK(flat.cost == 28.0);

  CHECK(hungarian(Matrix::Constant(1, 1, -2.0)).cost == -2.0);
  CHECK_THROWS_AS(hungarian(Matrix::Zero(2, 3)), ShapeError);
  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(hungarian(bad), ContractError);
}

TEST_CASE("hungarian equals exhaustive search") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> small(0, 4);
  for (int trial = 0; trial < 300; ++trial) {
    Matrix c(5, 5);
    // integer costs produce many ties and exercise the tie rule
    for (Eigen::Index k = 0; k < c.size(); ++k) c.data()[k] = small(rng);
    const auto [perm, cost] = oracle::brute_force_assignment(c);
    const Assignment a = hungarian(c);
    CHECK(a.cost == cost);
    CHECK(a.col_for_row == perm);
  }
  for (int trial = 0; trial < 300; ++trial) {
    const Matrix c = oracle::random_matrix(rng, 5, 5);
    const auto [perm, cost] = oracle::brute_force_assignment(c);
    const Assignment a = hungarian(c);
    CHECK(std::abs(a.cost - cost) <= 1e-12);
    CHECK(a.col_for_row == perm);
  }
}

TEST_CASE("accuracy examples") {
  CHECK(accuracy(Partition({0, 0, 1, 1}, 2), Partition({0, 0, 1, 1}, 2)) == 1.0);
  CHECK(accuracy(Partition({1, 1, 0, 0}, 2), Partition({0, 0, 1, 1}, 2)) == 1.0);
  CHECK(accuracy(Partition({0, 0, 1, 1}, 2), Partition({0, 1, 1, 1}, 2)) == 0.75);
  CHECK(accuracy(Partition({0, 0, 0, 0}, 1), Partition({0, 1, 2, 3}, 4)) == 0.25);
}

TEST_CASE("accuracy equals brute force over bijections") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const int kp = 1 + trial % 6, kt = 1 + (trial / 6) % 6;
    const std::size_t n = 1 + trial % 40;
    const Partition p = random_partition(rng, n, kp);
    const Partition t = random_partition(rng, n, kt);
    CHECK(accuracy(p, t) == doctest::Approx(oracle::brute_force_accuracy(p, t)).epsilon(1e-15));
  }
}

TEST_CASE("nmi examples") {
  const Partition a({0, 0, 1, 1}, 2);
  CHECK(nmi(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(nmi(Partition({0, 1, 0, 1}, 2), a) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(nmi(Partition({0, 0, 0, 0}, 1), Partition({0, 0, 0, 0}, 1)) == 0.0);
  CHECK(nmi(Partition({0, 0, 0, 0}, 1), a) == 0.0);
  // mutual information ln 2 over mean entropy (ln 2 + ln 4)/2
  const Partition fine({0, 1, 2, 3}, 4);
  CHECK(nmi(a, fine) == doctest::Approx(std::log(2.0) / (1.5 * std::log(2.0))).epsilon(1e-14));
}

TEST_CASE("ari examples") {
  CHECK_THROWS_AS(ari(Partition({0}, 1), Partition({0}, 1)), ContractError);
  const Partition a({0, 0, 1, 1}, 2);
  CHECK(ari(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ari(Partition({1, 1, 0, 0}, 2), a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ari(Partition({0, 0, 0}, 1), Partition({0, 0, 0}, 1)) == 1.0);
  CHECK(ari(Partition({0, 1, 0, 1}, 2), a) == doctest::Approx(oracle::pairwise_ari(Partition({0, 1, 0, 1}, 2), a)));
}

TEST_CASE("ari equals the pair-counting oracle") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + trial % 50;
    const Partition p = random_partition(rng, n, 1 + trial % 7);
    const Partition t = random_partition(rng, n, 1 + (trial / 7) % 7);
    CHECK(std::abs(ari(p, t) - oracle::pairwise_ari(p, t)) <= 1e-12);
  }
}

TEST_CASE("metric properties over random partition pairs") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 2 + trial % 30;
    const Partition p = random_partition(rng, n, 1 + trial % 5);
    const Partition t = random_partition(rng, n, 1 + (trial / 5) % 5);
    const ClusteringScores s = score_all(p, t);
    CHECK(s.acc >= 0.0);
    CHECK(s.acc <= 1.0);
    CHECK(s.nmi >= -1e-12);
    CHECK(s.nmi <= 1.0 + 1e-12);
    CHECK(s.ari <= 1.0 + 1e-12);
    CHECK(std::abs(nmi(p, t) - nmi(t, p)) <= 1e-12);
    CHECK(std::abs(ari(p, t) - ari(t, p)) <= 1e-12);
    const Partition q = relabel(p, rng);
    CHECK(std::abs(accuracy(q, t) - s.acc) <= 1e-12);
    CHECK(std::abs(nmi(q, t) - s.nmi) <= 1e-12);
    CHECK(std::abs(ari(q, t) - s.ari) <= 1e-12);
  }
}
