#include "c3/augment.hpp"

#include <cmath>
#include <numeric>
#include <vector>

#include "c3/rng.hpp"

namespace c3 {

void AugmentConfig::validate() const {
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
    throw ConfigError("augment.noise_sigma", "must be >= 0");
  if (!(mask_rate >= 0.0 && mask_rate < 1.0))
    throw ConfigError("augment.mask_rate", "must lie in [0, 1)");
  if (!(scale_min > 0.0)) throw ConfigError("augment.scale_min", "must be positive");
  if (!(scale_max >= scale_min) || !std::isfinite(scale_max))
    throw ConfigError("augment.scale_max", "must be >= scale_min");
}

RowVector augment_view(std::mt19937_64& rng, const AugmentConfig& cfg, const RowVector& x) {
  RowVector out = x;
  if (cfg.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
    for (Eigen::Index j = 0; j < out.size(); ++j) out(j) += noise(rng);
  }
  if (cfg.mask_rate > 0.0) {
    std::bernoulli_distribution drop(cfg.mask_rate);
    for (Eigen::Index j = 0; j < out.size(); ++j)
      if (drop(rng)) out(j) = 0.0;
  }
  if (cfg.scale_max > cfg.scale_min) {
    std::uniform_real_distribution<double> scale(cfg.scale_min, cfg.scale_max);
    out *= scale(rng);
  } else if (cfg.scale_min != 1.0) {
    out *= cfg.scale_min;
  }
  return out;
}

std::pair<RowVector, RowVector> make_pair(std::mt19937_64& rng, const AugmentConfig& cfg,
                                          const RowVector& x) {
  RowVector a = augment_view(rng, cfg, x);
  RowVector b = augment_view(rng, cfg, x);
  return {std::move(a), std::move(b)};
}

std::pair<Matrix, Matrix> augment_batch(std::uint64_t key, const AugmentConfig& cfg,
                                        const Matrix& x, std::span<const std::size_t> row_keys) {
  if (row_keys.size() != static_cast<std::size_t>(x.rows()))
    throw ShapeError("augment_batch: one row key per row required");
  cfg.validate();
  Matrix xa(x.rows(), x.cols());
  Matrix xb(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    std::mt19937_64 rng(derive_seed(key, StreamId::kAugment, {row_keys[static_cast<std::size_t>(i)]}));
    auto [a, b] = make_pair(rng, cfg, x.row(i));
    xa.row(i) = a;
    xb.row(i) = b;
  }
  return {std::move(xa), std::move(xb)};
}

std::pair<Matrix, Matrix> augment_batch(std::uint64_t key, const AugmentConfig& cfg,
                                        const Matrix& x) {
  std::vector<std::size_t> keys(static_cast<std::size_t>(x.rows()));
  std::iota(keys.begin(), keys.end(), std::size_t{0});
  return augment_batch(key, cfg, x, keys);
}

}  // namespace c3
