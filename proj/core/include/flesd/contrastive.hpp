#pragma once

#include "flesd/matrix.hpp"
#include "flesd/tape.hpp"

namespace flesd {

// Symmetric NT-Xent over the 2B views [a; b]. Each of the 2B anchors takes its
// paired view as the positive and the other 2B - 2 views as negatives:
//
//   loss = 1/(2B) * sum_i [ log sum_{k != i} exp(z_i.z_k / tau) - z_i.z_pos(i) / tau ]
//
// Rows are expected to be unit-norm. Throws ParameterError when B < 2.
Var info_nce_loss(Tape& tape, Var reps_a, Var reps_b, double temperature);
double info_nce_loss(const Matrix& reps_a, const Matrix& reps_b, double temperature);

}  // namespace flesd
