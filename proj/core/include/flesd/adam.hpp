#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "flesd/matrix.hpp"
#include "flesd/tape.hpp"

namespace flesd {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment estimates for one parameter tensor.
struct AdamState {
  std::uint64_t step = 0;
  Matrix m1;
  Matrix m2;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_param(const ParamTensor& p, const AdamOptions& opts = {});
};

// One bias-corrected Adam update of `param.value` from `param.grad`.
void adam_step(ParamTensor& param, AdamState& state);

// Adam over an ordered list of tensors. The same list (same order, same
// shapes) must be passed to every step().
class AdamOptimizer {
 public:
  AdamOptimizer(std::span<ParamTensor* const> params, const AdamOptions& opts);

  void step(std::span<ParamTensor* const> params);
  std::span<const AdamState> states() const { return states_; }

 private:
  std::vector<AdamState> states_;
};

}  // namespace flesd
