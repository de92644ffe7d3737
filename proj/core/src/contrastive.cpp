#include "flesd/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "flesd/error.hpp"

namespace flesd {
namespace {

struct NtXentForward {
  double loss = 0.0;
  Matrix joint;  // 2B x d
  Matrix probs;  // 2B x 2B softmax over k != i, zero on the diagonal
};

NtXentForward nt_xent_forward(const Matrix& a, const Matrix& b, double tau) {
  if (!a.same_shape(b)) throw DimensionError("info_nce_loss: view batches differ in shape");
  if (a.rows() < 2) throw ParameterError("info_nce_loss: batch size must be >= 2");
  if (!(tau > 0.0)) throw ParameterError("info_nce_loss: temperature must be > 0");

  const std::size_t half = a.rows();
  const std::size_t n = 2 * half;
  NtXentForward f;
  f.joint = vstack(a, b);
  Matrix sim = matmul_transposed(f.joint, f.joint);
  f.probs = Matrix(n, n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t pos = i < half ? i + half : i - half;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k)
      if (k != i) mx = std::max(mx, sim(i, k) / tau);
    double z = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      f.probs(i, k) = std::exp(sim(i, k) / tau - mx);
      z += f.probs(i, k);
    }
    for (std::size_t k = 0; k < n; ++k) f.probs(i, k) /= z;
    total += mx + std::log(z) - sim(i, pos) / tau;
  }
  f.loss = total / static_cast<double>(n);
  return f;
}

}  // namespace

Var info_nce_loss(Tape& tape, Var reps_a, Var reps_b, double temperature) {
  NtXentForward f = nt_xent_forward(tape.value(reps_a), tape.value(reps_b), temperature);
  const double loss = f.loss;
  return tape.record(
      Matrix(1, 1, loss), {reps_a, reps_b},
      [reps_a, reps_b, temperature, f = std::move(f)](Tape& tp, const Matrix& g) {
        const std::size_t n = f.joint.rows();
        const std::size_t half = n / 2;
        // dL/dS_ik = (P_ik - [k == pos(i)]) / (2B); S = Z Z^T / tau.
        Matrix ds = f.probs;
        for (std::size_t i = 0; i < n; ++i) ds(i, i < half ? i + half : i - half) -= 1.0;
        Matrix sym(n, n);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t k = 0; k < n; ++k) sym(i, k) = ds(i, k) + ds(k, i);
        const double c = g(0, 0) / (static_cast<double>(n) * temperature);
        const Matrix dz = c * matmul(sym, f.joint);
        const std::size_t d = dz.cols();
        Matrix da(half, d);
        Matrix db(half, d);
        for (std::size_t i = 0; i < half; ++i) {
          for (std::size_t j = 0; j < d; ++j) {
            da(i, j) = dz(i, j);
            db(i, j) = dz(i + half, j);
          }
        }
        tp.accumulate(reps_a, da);
        tp.accumulate(reps_b, db);
      });
}

double info_nce_loss(const Matrix& reps_a, const Matrix& reps_b, double temperature) {
  return nt_xent_forward(reps_a, reps_b, temperature).loss;
}

}  // namespace flesd
