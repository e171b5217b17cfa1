#include <cmath>
#include <random>
#include <set>

#include "c3/losses.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace c3;

namespace {

Matrix random_similarity(std::mt19937_64& rng, Eigen::Index n, Eigen::Index dim = 6) {
  return similarity_matrix(oracle::random_unit_rows(rng, 2 * n, dim));
}

}  // namespace

TEST_CASE("positive_mask at the extremes of zeta") {
  std::mt19937_64 rng(1);
  const Matrix s = random_similarity(rng, 5);
  const BoolMatrix all = positive_mask(s, -1.0);
  for (Eigen::Index i = 0; i < 10; ++i)
    for (Eigen::Index j = 0; j < 10; ++j) CHECK(all(i, j) == (i != j));

  const BoolMatrix twins = positive_mask(s, 1.0);
  for (Eigen::Index i = 0; i < 10; ++i)
    for (Eigen::Index j = 0; j < 10; ++j) CHECK(twins(i, j) == (j == twin_index(i, 5)));
  CHECK(count_positive_pairs(twins) == 1.0);
  CHECK(count_positive_pairs(all) == 9.0);

  CHECK_THROWS_AS(positive_mask(s, 1.5), ConfigError);
  CHECK_THROWS_AS(positive_mask(s, -1.01), ConfigError);
}

TEST_CASE("positive_mask follows the threshold and is monotone in zeta") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 1 + trial % 8;
    const Matrix s = random_similarity(rng, n, 3);
    double prev = std::numeric_limits<double>::infinity();
    BoolMatrix prev_mask = BoolMatrix::Constant(2 * n, 2 * n, true);
    for (double zeta = -1.0; zeta <= 1.0 + 1e-12; zeta += 0.05) {
      const BoolMatrix mask = positive_mask(s, std::min(zeta, 1.0));
      for (Eigen::Index i = 0; i < 2 * n; ++i)
        for (Eigen::Index j = 0; j < 2 * n; ++j) {
          if (i == j) CHECK_FALSE(mask(i, j));
          else if (j == twin_index(i, n)) CHECK(mask(i, j));
          else CHECK(mask(i, j) == (s(i, j) >= std::min(zeta, 1.0)));
          if (mask(i, j)) CHECK(prev_mask(i, j));
        }
      const double pairs = count_positive_pairs(mask);
      CHECK(pairs <= prev);
      CHECK(pairs >= 1.0);
      prev = pairs;
      prev_mask = mask;
    }
  }
}

TEST_CASE("compute_weights is uniform when all |S| agree") {
  const Eigen::Index rows = 6;
  Matrix s = Matrix::Constant(rows, rows, -0.3);
  for (Eigen::Index i = 0; i < rows; ++i) s(i, i) = 1.0;
  s(0, 3) = 0.3;  // same magnitude
  const Matrix w = compute_weights(s, 0.1);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < rows; ++j)
      CHECK(w(i, j) == doctest::Approx(i == j ? 0.0 : 1.0 / 5.0).epsilon(1e-14));
}

TEST_CASE("compute_weights hand example and simplex oracle") {
  // Row 0 off-diagonal similarities 0, 0.5, -0.5, 1.
  Matrix s = Matrix::Identity(5, 5);
  s(0, 1) = 0.0;
  s(0, 2) = 0.5;
  s(0, 3) = -0.5;
  s(0, 4) = 1.0;
  const Matrix w = compute_weights(s, 0.1);
  const double e1 = std::exp(0.1), e05 = std::exp(0.05), e0 = 1.0;
  const double z = e1 + 2 * e05 + e0;
  CHECK(w(0, 0) == 0.0);
  CHECK(w(0, 1) == doctest::Approx(e1 / z).epsilon(1e-14));
  CHECK(w(0, 2) == doctest::Approx(e05 / z).epsilon(1e-14));
  CHECK(w(0, 3) == doctest::Approx(e05 / z).epsilon(1e-14));
  CHECK(w(0, 4) == doctest::Approx(e0 / z).epsilon(1e-14));

  const auto ref = oracle::simplex_minimize({1.0, 0.5, 0.5, 0.0}, 0.1);
  for (int j = 0; j < 4; ++j) CHECK(std::abs(ref[j] - w(0, j + 1)) <= 1e-6);
}

TEST_CASE("compute_weights limits in gamma") {
  std::mt19937_64 rng(4);
  const Matrix s = random_similarity(rng, 8);
  const Matrix flat = compute_weights(s, 1e-6);
  for (Eigen::Index i = 0; i < 16; ++i)
    for (Eigen::Index j = 0; j < 16; ++j)
      if (i != j) CHECK(std::abs(flat(i, j) - 1.0 / 15.0) <= 1e-4);

  Matrix t = Matrix::Identity(5, 5);
  t(0, 1) = 0.5;
  t(0, 2) = -0.6;
  t(0, 3) = 0.02;  // unique minimal |S|
  t(0, 4) = 0.9;
  const Matrix sharp = compute_weights(t, 100.0);
  CHECK(sharp(0, 3) > 0.99);

  CHECK_THROWS_AS(compute_weights(s, 0.0), ConfigError);
  CHECK_THROWS_AS(compute_weights(s, -1.0), ConfigError);
}

TEST_CASE("compute_weights rows lie on the simplex with argmax at min |S|") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index n = 1 + trial % 10;
    Matrix s = random_similarity(rng, n, 2 + trial % 5);
    if (trial % 3 == 0) s(0, 1) = s(1, 0) = -s(0, 2 % (2 * n));  // force a |S| tie sometimes
    const double gamma = std::pow(10.0, (trial % 7) - 3);
    const Matrix w = compute_weights(s, gamma);
    for (Eigen::Index i = 0; i < 2 * n; ++i) {
      CHECK(std::abs(w.row(i).sum() - 1.0) <= 1e-9);
      CHECK(w(i, i) == 0.0);
      double min_abs = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < 2 * n; ++j) {
        CHECK(w(i, j) >= 0.0);
        CHECK(w(i, j) <= 1.0);
        if (j != i) min_abs = std::min(min_abs, std::abs(s(i, j)));
      }
      const double max_w = w.row(i).maxCoeff();
      for (Eigen::Index j = 0; j < 2 * n; ++j)
        if (j != i && std::abs(s(i, j)) == min_abs) CHECK(w(i, j) == max_w);
    }
  }
}

TEST_CASE("c3_loss of a single pair is zero") {
  Matrix s(2, 2);
  s << 1.0, 0.37, 0.37, 1.0;
  const BoolMatrix mask = positive_mask(s, 0.6);
  const Matrix w = compute_weights(s, 0.1);
  const auto res = c3_loss(s, mask, w);
  CHECK(res.loss == 0.0);
  CHECK(res.grad_s.isZero());
}

TEST_CASE("c3_loss matches the scalar oracle") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index n = 1 + trial % 16;
    const Matrix s = random_similarity(rng, n, 4);
    const double zeta = -0.5 + 0.03 * trial;
    const BoolMatrix mask = positive_mask(s, std::min(zeta, 1.0));
    const Matrix w = compute_weights(s, 0.1 + trial);
    CHECK(std::abs(c3_loss(s, mask, w).loss - oracle::c3_loss(s, mask, w)) <= 1e-10);
  }
}

TEST_CASE("c3_loss gradient in S matches finite differences") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index n = 2 + trial % 5;
    const Matrix s = random_similarity(rng, n, 3);
    const BoolMatrix mask = positive_mask(s, 0.3);
    const Matrix w = compute_weights(s, 1.0);
    const auto res = c3_loss(s, mask, w);
    const Matrix fd = oracle::finite_difference(
        [&](const Matrix& x) { return oracle::c3_loss(x, mask, w); }, s);
    CHECK((res.grad_s - fd).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(oracle::max_relative_error(res.grad_s, fd, 1e-6) <= 1e-5);
  }
}

TEST_CASE("unweighted c3_loss with every pair positive is exactly zero") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix s = random_similarity(rng, 2 + trial, 5);
    const BoolMatrix mask = positive_mask(s, -1.0);
    const Matrix ones = Matrix::Ones(s.rows(), s.cols());
    CHECK(c3_loss(s, mask, ones).loss == 0.0);
    // With normalized weights the denominator shrinks and the loss does not vanish.
    CHECK(c3_loss(s, mask, compute_weights(s, 0.1)).loss < 0.0);
  }
}

TEST_CASE("c3_loss shape errors") {
  const Matrix s = Matrix::Identity(4, 4);
  const BoolMatrix mask = positive_mask(s, 0.5);
  CHECK_THROWS_AS(c3_loss(s, mask, Matrix::Ones(3, 3)), ShapeError);
  CHECK_THROWS_AS(c3_loss(Matrix::Identity(3, 3), BoolMatrix::Constant(3, 3, false),
                          Matrix::Ones(3, 3)),
                  ShapeError);
}

TEST_CASE("chain_to_embeddings") {
  std::mt19937_64 rng(9);
  const Matrix z = oracle::random_unit_rows(rng, 6, 4);
  CHECK(chain_to_embeddings(Matrix::Zero(6, 6), z).isZero());

  Matrix single = Matrix::Zero(6, 6);
  single(1, 4) = 0.7;
  const Matrix dz = chain_to_embeddings(single, z);
  for (Eigen::Index i = 0; i < 6; ++i)
    if (i != 1 && i != 4) CHECK(dz.row(i).isZero());
  CHECK_FALSE(dz.row(1).isZero());
  CHECK_FALSE(dz.row(4).isZero());

  CHECK_THROWS_AS(chain_to_embeddings(Matrix::Zero(5, 5), z), ShapeError);
}

TEST_CASE("c3 loss gradient in z matches finite differences") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index n = 2 + trial % 4;
    const Matrix z = oracle::random_unit_rows(rng, 2 * n, 3);
    const Matrix s = similarity_matrix(z);
    const BoolMatrix mask = positive_mask(s, 0.2);
    const Matrix w = compute_weights(s, 0.1);
    const Matrix dz = chain_to_embeddings(c3_loss(s, mask, w).grad_s, z);
    auto f = [&](const Matrix& x) {
      Matrix sx(x.rows(), x.rows());
      for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.rows(); ++j) sx(i, j) = oracle::dot_rows(x, i, x, j);
      return oracle::c3_loss(sx, mask, w);
    };
    const Matrix fd = oracle::finite_difference(f, z);
    CHECK((dz - fd).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(oracle::max_relative_error(dz, fd, 1e-6) <= 1e-5);
  }
}

TEST_CASE("init_instance_loss") {
  Matrix same = Matrix::Zero(4, 3);
  same.col(0).setOnes();
  CHECK(init_instance_loss(same, 0.5).loss == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  CHECK_THROWS_AS(init_instance_loss(same, 0.0), ConfigError);
  CHECK_THROWS_AS(init_instance_loss(Matrix::Ones(3, 2), 0.5), ShapeError);

  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix z = oracle::random_unit_rows(rng, 2 * (1 + trial % 16), 2 + trial % 7);
    const double tau = 0.2 + 0.05 * (trial % 10);
    CHECK(std::abs(init_instance_loss(z, tau).loss - oracle::instance_loss(z, tau)) <= 1e-10);
  }
  for (int trial = 0; trial < 8; ++trial) {
    const Matrix z = oracle::random_unit_rows(rng, 2 * (2 + trial % 4), 3);
    const auto res = init_instance_loss(z, 0.5);
    const Matrix fd = oracle::finite_difference(
        [](const Matrix& x) { return init_instance_loss(x, 0.5).loss; }, z);
    CHECK(oracle::max_relative_error(res.grad_z, fd, 1e-6) <= 1e-5);
  }
}

TEST_CASE("init_cluster_loss") {
  const int m = 4;
  const Matrix uniform = Matrix::Constant(6, m, 1.0 / m);
  const auto flat = init_cluster_loss(uniform, uniform, 1.0);
  CHECK(flat.entropy == doctest::Approx(2.0 * std::log(double(m))).epsilon(1e-14));
  // identical columns: contrastive part is log(2M - 1)
  CHECK(flat.contrastive == doctest::Approx(std::log(2.0 * m - 1.0)).epsilon(1e-13));

  Matrix bad = uniform;
  bad(0, 0) = 0.9;
  CHECK_THROWS_AS(init_cluster_loss(bad, uniform, 1.0), ContractError);
  CHECK_THROWS_AS(init_cluster_loss(uniform, uniform, -1.0), ConfigError);

  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index n = 1 + trial % 16;
    const Eigen::Index k = 2 + trial % 7;
    const Matrix ca = oracle::random_prob_rows(rng, n, k);
    const Matrix cb = oracle::random_prob_rows(rng, n, k);
    CHECK(std::abs(init_cluster_loss(ca, cb, 1.0).loss - oracle::cluster_loss(ca, cb, 1.0)) <= 1e-10);
  }
  for (int trial = 0; trial < 8; ++trial) {
    const Matrix ca = oracle::random_prob_rows(rng, 5, 3);
    const Matrix cb = oracle::random_prob_rows(rng, 5, 3);
    const auto res = init_cluster_loss(ca, cb, 0.7);
    const Matrix fa = oracle::finite_difference(
        [&](const Matrix& x) { return oracle::cluster_loss(x, cb, 0.7); }, ca);
    const Matrix fb = oracle::finite_difference(
        [&](const Matrix& x) { return oracle::cluster_loss(ca, x, 0.7); }, cb);
    CHECK(oracle::max_relative_error(res.grad_a, fa, 1e-6) <= 1e-5);
    CHECK(oracle::max_relative_error(res.grad_b, fb, 1e-6) <= 1e-5);
  }
}

TEST_CASE("positive-pair count in a well-clustered batch with many classes") {
  // 256 augmented rows spread over 200 balanced classes; rows of one class share
  // a prototype, prototypes are nearly orthogonal. Twins belong to different
  // classes, so each row sees its forced twin plus its class-mates.
  const Eigen::Index rows = 256, classes = 200, dim = 512;
  std::mt19937_64 rng(13);
  const Matrix protos = oracle::random_unit_rows(rng, classes, dim);
  Matrix z(rows, dim);
  std::vector<int> label(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    label[i] = static_cast<int>(i % classes);
    z.row(i) = protos.row(label[i]);
  }
  const BoolMatrix mask = positive_mask(similarity_matrix(z), 0.9);
  double class_mates = 0.0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < rows; ++j) class_mates += (i != j && label[i] == label[j]);
  const double expected = 1.0 + class_mates / rows;
  CHECK(count_positive_pairs(mask) == doctest::Approx(expected).epsilon(1e-15));
  // Mean class occupancy is the batch/classes ratio 1.28; the per-row count
  // stays close to the twin-only value of 1.
  std::set<int> used(label.begin(), label.end());
  CHECK(double(rows) / double(used.size()) == doctest::Approx(1.28));
  CHECK(count_positive_pairs(mask) < 1.5);
}
