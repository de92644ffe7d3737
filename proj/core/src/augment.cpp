#include "flesd/augment.hpp"

#include <cmath>

#include "flesd/error.hpp"

namespace flesd {

void AugmentationConfig::validate() const {
  if (!(noise_sigma >= 0.0)) throw ParameterError("augmentation: noise_sigma must be >= 0");
  if (!(mask_prob >= 0.0 && mask_prob <= 1.0)) {
    throw ParameterError("augmentation: mask_prob must lie in [0, 1]");
  }
  if (!(scale_lo > 0.0 && scale_lo <= scale_hi) || !std::isfinite(scale_hi)) {
    throw ParameterError("augmentation: need 0 < scale_lo <= scale_hi");
  }
}

Matrix augment(const Matrix& batch, const AugmentationConfig& cfg, Rng& rng) {
  cfg.validate();
  Matrix out = batch;
  if (cfg.is_identity()) return out;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    if (cfg.noise_sigma > 0.0) {
      for (double& v : row) v += cfg.noise_sigma * normal(rng);
    }
    if (cfg.mask_prob > 0.0) {
      for (double& v : row)
        if (unif(rng) < cfg.mask_prob) v = 0.0;
    }
    const double s = cfg.scale_lo + (cfg.scale_hi - cfg.scale_lo) * unif(rng);
    for (double& v : row) v *= s;
  }
  return out;
}

}  // namespace flesd
