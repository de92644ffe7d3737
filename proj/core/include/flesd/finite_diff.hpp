#pragma once

#include <functional>

#include "flesd/matrix.hpp"
#include "flesd/tape.hpp"

namespace flesd {

// Central-difference estimate of d loss / d value. `value` is perturbed in
// place one entry at a time and restored; loss_fn must read it and be pure.
Matrix finite_diff_gradient(const std::function<double()>& loss_fn, Matrix& value,
                            double epsilon = 1e-5);

inline Matrix finite_diff_gradient(const std::function<double()>& loss_fn, ParamTensor& param,
                                   double epsilon = 1e-5) {
  return finite_diff_gradient(loss_fn, param.value, epsilon);
}

// |a - b| / max(|a|, |b|) in the Frobenius norm; 0 when both vanish.
double relative_error(const Matrix& a, const Matrix& b);

}  // namespace flesd
