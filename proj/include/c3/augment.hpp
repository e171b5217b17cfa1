#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

#include "c3/numerics.hpp"

namespace c3 {

/// Corruption pool for vector data: additive Gaussian noise, then random
/// coordinate masking, then a uniform per-view scale factor. Noise sigma is
/// in units of the (standardized) feature scale.
struct AugmentConfig {
  double noise_sigma = 0.1;
  double mask_rate = 0.1;
  double scale_min = 0.9;
  double scale_max = 1.1;

  void validate() const;
  static AugmentConfig identity() { return {0.0, 0.0, 1.0, 1.0}; }
};

/// Draws one view from the pool.
RowVector augment_view(std::mt19937_64& rng, const AugmentConfig& cfg, const RowVector& x);

/// Two independent views of `x`.
std::pair<RowVector, RowVector> make_pair(std::mt19937_64& rng, const AugmentConfig& cfg,
                                          const RowVector& x);

/// Applies make_pair row by row. Row i draws from a generator keyed by
/// (key, row_keys[i]), so a row's views depend only on its key and not on its
/// position in the batch.
std::pair<Matrix, Matrix> augment_batch(std::uint64_t key, const AugmentConfig& cfg,
                                        const Matrix& x, std::span<const std::size_t> row_keys);

/// Same with row keys 0..rows-1.
std::pair<Matrix, Matrix> augment_batch(std::uint64_t key, const AugmentConfig& cfg,
                                        const Matrix& x);

}  // namespace c3
