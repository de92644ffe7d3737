#pragma once

#include "flesd/matrix.hpp"
#include "flesd/rng.hpp"

namespace flesd {

// Vector-valued view generator: per sample, x' = s * (mask ⊙ (x + noise)) with
// noise ~ N(0, noise_sigma^2), mask_j ~ Bernoulli(1 - mask_prob) and
// s ~ U[scale_lo, scale_hi].
struct AugmentationConfig {
  double noise_sigma = 0.0;
  double mask_prob = 0.0;
  double scale_lo = 1.0;
  double scale_hi = 1.0;

  void validate() const;
  bool is_identity() const {
    return noise_sigma == 0.0 && mask_prob == 0.0 && scale_lo == 1.0 && scale_hi == 1.0;
  }
};

Matrix augment(const Matrix& batch, const AugmentationConfig& cfg, Rng& rng);

}  // namespace flesd
