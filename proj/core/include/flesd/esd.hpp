#pragma once

// Ensemble similarity distillation: a student encoder is trained on the
// public set so that its softmax over anchor similarities matches the
// distribution read off the ensembled client similarity target.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flesd/augment.hpp"
#include "flesd/dataset.hpp"
#include "flesd/encoder.hpp"
#include "flesd/momentum_queue.hpp"
#include "flesd/similarity.hpp"
#include "flesd/tape.hpp"

namespace flesd {

struct EsdConfig {
  double student_temperature = 0.1;  // tau_S
  double target_temperature = 0.1;   // tau_T
  double momentum = 0.999;           // zeta
  std::size_t anchor_capacity = 2048;  // m
  std::size_t batch_size = 128;        // B'
  std::size_t epochs = 200;
  double lr = 1e-3;
  // tau_S must equal tau_T unless this is set.
  bool allow_temperature_mismatch = false;

  void validate() const;
};

// mu <- zeta * mu + (1 - zeta) * theta, entrywise.
void ema_update(EncoderParams& momentum, const EncoderParams& student, double zeta);

// Positions in `anchors` whose public index differs from `query`.
std::vector<std::size_t> kept_anchor_positions(std::size_t query,
                                               std::span<const std::size_t> anchors);

// p_j = M[q, j] / sum_u M[q, j_u] over the kept anchors (self-index dropped),
// in anchor order. Throws DegenerateInputError if nothing is left.
std::vector<double> target_probs(const EnsembleTarget& target, std::size_t query,
                                 std::span<const std::size_t> anchors);

// Softmax of <query, anchor_j> / tau_S over the rows of `anchors`.
std::vector<double> student_probs(std::span<const double> query, const Matrix& anchors,
                                  double student_temperature);
// d(sum_j upstream_j * q_j) / d query for q = student_probs(query, anchors, tau_S).
std::vector<double> student_probs_vjp(std::span<const double> query, const Matrix& anchors,
                                      double student_temperature,
                                      std::span<const double> upstream);

// KL(p || q); q is floored at 1e-300 where p > 0.
double esd_loss(std::span<const double> p, std::span<const double> q);

// Mean over queries of KL(p^i || q^i) against the queue's anchors, with
// self-anchors dropped per query. Gradients flow into `queries` only; queries
// left with no anchor are skipped. Throws DegenerateInputError when no query
// has an anchor.
Var esd_batch_loss(Tape& tape, Var queries, std::span<const std::size_t> query_indices,
                   const Matrix& anchor_reps, std::span<const std::size_t> anchor_indices,
                   const EnsembleTarget& target, double student_temperature);

struct DistillResult {
  EncoderParams student;
  std::vector<double> epoch_losses;  // NaN for an epoch with no measurable loss
  std::size_t optimizer_steps = 0;
  std::vector<std::string> warnings;
};

// Trains the student on `d_pub` (row i = public index i) toward `target`.
// Per iteration: the student encodes one augmented view of a mini-batch and
// the momentum encoder (initialised as a copy of the student) an independent
// one; the loss is taken against the current queue; an Adam step is applied
// once the queue holds min(m, 2B') anchors; then the EMA update and the FIFO
// push of the momentum representations.
DistillResult distill(EncoderParams student, const EnsembleTarget& target, const Dataset& d_pub,
                      const EsdConfig& cfg, const AugmentationConfig& aug, std::uint64_t seed);

}  // namespace flesd
