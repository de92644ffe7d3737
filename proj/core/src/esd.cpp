#include "flesd/esd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "flesd/adam.hpp"
#include "flesd/error.hpp"
#include "flesd/local_training.hpp"
#include "flesd/rng.hpp"

namespace flesd {

void EsdConfig::validate() const {
  if (!(student_temperature > 0.0)) throw ParameterError("esd: tau_S must be > 0");
  if (!(target_temperature >= kMinTargetTemperature)) {
    throw ParameterError("esd: tau_T must be >= " + std::to_string(kMinTargetTemperature));
  }
  if (student_temperature != target_temperature && !allow_temperature_mismatch) {
    throw ParameterError("esd: tau_S must equal tau_T (set allow_temperature_mismatch to override)");
  }
  if (!(momentum >= 0.0 && momentum <= 1.0)) throw ParameterError("esd: momentum must lie in [0, 1]");
  if (batch_size < 1) throw ParameterError("esd: batch_size must be >= 1");
  if (anchor_capacity < batch_size) {
    throw ParameterError("esd: anchor_capacity must be >= batch_size");
  }
  if (!(lr > 0.0)) throw ParameterError("esd: lr must be > 0");
}

void ema_update(EncoderParams& momentum, const EncoderParams& student, double zeta) {
  if (!momentum.same_architecture(student)) {
    throw DimensionError("ema_update: momentum and student architectures differ");
  }
  if (!(zeta >= 0.0 && zeta <= 1.0)) throw ParameterError("ema_update: zeta must lie in [0, 1]");
  auto mu = momentum.tensors();
  const auto theta = student.tensors();
  for (std::size_t t = 0; t < mu.size(); ++t) {
    auto m = mu[t]->value.data();
    const auto s = theta[t]->value.data();
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = zeta * m[i] + (1.0 - zeta) * s[i];
  }
}

std::vector<std::size_t> kept_anchor_positions(std::size_t query,
                                               std::span<const std::size_t> anchors) {
  std::vector<std::size_t> kept;
  kept.reserve(anchors.size());
  for (std::size_t u = 0; u < anchors.size(); ++u)
    if (anchors[u] != query) kept.push_back(u);
  return kept;
}

std::vector<double> target_probs(const EnsembleTarget& target, std::size_t query,
                                 std::span<const std::size_t> anchors) {
  const std::size_t n = target.size();
  if (query >= n) throw DimensionError("target_probs: query index out of range");
  std::vector<double> p;
  double z = 0.0;
  for (std::size_t j : anchors) {
    if (j >= n) throw DimensionError("target_probs: anchor index out of range");
    if (j == query) continue;
    p.push_back(target.entries(query, j));
    z += p.back();
  }
  if (p.empty()) throw DegenerateInputError("target_probs: every anchor is the query itself");
  for (double& v : p) v /= z;
  return p;
}

std::vector<double> student_probs(std::span<const double> query, const Matrix& anchors,
                                  double student_temperature) {
  if (!(student_temperature > 0.0)) throw ParameterError("student_probs: tau_S must be > 0");
  if (anchors.rows() == 0) throw DegenerateInputError("student_probs: no anchors");
  Matrix logits(1, anchors.rows());
  for (std::size_t j = 0; j < anchors.rows(); ++j) logits(0, j) = dot(query, anchors.row(j));
  const Matrix q = softmax_rows(logits, student_temperature);
  return {q.data().begin(), q.data().end()};
}

std::vector<double> student_probs_vjp(std::span<const double> query, const Matrix& anchors,
                                      double student_temperature,
                                      std::span<const double> upstream) {
  if (upstream.size() != anchors.rows()) {
    throw DimensionError("student_probs_vjp: one upstream entry per anchor required");
  }
  const std::vector<double> q = student_probs(query, anchors, student_temperature);
  double mean_g = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) mean_g += q[j] * upstream[j];
  std::vector<double> grad(query.size(), 0.0);
  for (std::size_t j = 0; j < q.size(); ++j) {
    const double w = q[j] * (upstream[j] - mean_g) / student_temperature;
    const auto a = anchors.row(j);
    for (std::size_t c = 0; c < grad.size(); ++c) grad[c] += w * a[c];
  }
  return grad;
}

double esd_loss(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DimensionError("esd_loss: p and q differ in length");
  double kl = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (p[j] > 0.0) kl += p[j] * (std::log(p[j]) - std::log(std::max(q[j], 1e-300)));
  }
  return kl;
}

Var esd_batch_loss(Tape& tape, Var queries, std::span<const std::size_t> query_indices,
                   const Matrix& anchor_reps, std::span<const std::size_t> anchor_indices,
                   const EnsembleTarget& target, double student_temperature) {
  const Matrix& z = tape.value(queries);
  if (z.rows() != query_indices.size()) {
    throw DimensionError("esd_batch_loss: query rows differ from query indices");
  }
  if (anchor_reps.rows() != anchor_indices.size()) {
    throw DimensionError("esd_batch_loss: anchor rows differ from anchor indices");
  }
  if (anchor_reps.rows() > 0 && anchor_reps.cols() != z.cols()) {
    throw DimensionError("esd_batch_loss: anchor and query widths differ");
  }
  if (!(student_temperature > 0.0)) throw ParameterError("esd_batch_loss: tau_S must be > 0");

  const Matrix logits = matmul_transposed(z, anchor_reps);  // B x m
  // dlogits holds (q - p) on kept anchors, zero elsewhere.
  Matrix dlogits(z.rows(), anchor_reps.rows());
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const auto kept = kept_anchor_positions(query_indices[i], anchor_indices);
    if (kept.empty()) continue;
    std::vector<std::size_t> kept_idx;
    kept_idx.reserve(kept.size());
    for (std::size_t u : kept) kept_idx.push_back(anchor_indices[u]);
    const auto p = target_probs(target, query_indices[i], kept_idx);

    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t u : kept) mx = std::max(mx, logits(i, u) / student_temperature);
    std::vector<double> q(kept.size());
    double zsum = 0.0;
    for (std::size_t k = 0; k < kept.size(); ++k) {
      q[k] = std::exp(logits(i, kept[k]) / student_temperature - mx);
      zsum += q[k];
    }
    for (double& v : q) v /= zsum;
    total += esd_loss(p, q);
    for (std::size_t k = 0; k < kept.size(); ++k) dlogits(i, kept[k]) = q[k] - p[k];
    ++used;
  }
  if (used == 0) throw DegenerateInputError("esd_batch_loss: no query has a usable anchor");

  const double loss = total / static_cast<double>(used);
  return tape.record(Matrix(1, 1, loss), {queries},
                     [queries, anchor_reps, student_temperature, used,
                      dlogits = std::move(dlogits)](Tape& tp, const Matrix& g) {
                       const double c =
                           g(0, 0) / (static_cast<double>(used) * student_temperature);
                       tp.accumulate(queries, c * matmul(dlogits, anchor_reps));
                     });
}

DistillResult distill(EncoderParams student, const EnsembleTarget& target, const Dataset& d_pub,
                      const EsdConfig& cfg, const AugmentationConfig& aug, std::uint64_t seed) {
  cfg.validate();
  aug.validate();
  if (d_pub.empty()) throw DegenerateInputError("distill: public dataset is empty");
  if (d_pub.size() < 2) throw DegenerateInputError("distill: public set needs at least two samples");
  if (target.size() != d_pub.size()) {
    throw DimensionError("distill: target is " + std::to_string(target.size()) +
                         "x" + std::to_string(target.size()) + " but the public set has " +
                         std::to_string(d_pub.size()) + " samples");
  }

  DistillResult result;
  const std::size_t n = d_pub.size();
  std::size_t batch = cfg.batch_size;
  if (n < batch) {
    batch = n;
    result.warnings.push_back("distill batch clamped to public set size " + std::to_string(n));
  }
  if (cfg.anchor_capacity > n) {
    result.warnings.push_back("anchor capacity " + std::to_string(cfg.anchor_capacity) +
                              " exceeds public set size " + std::to_string(n));
  }
  const std::size_t warmup = std::min(cfg.anchor_capacity, 2 * batch);

  EncoderParams momentum = student;
  MomentumQueue queue(cfg.anchor_capacity);
  auto tensors = student.tensors();
  AdamOptimizer adam(tensors, AdamOptions{.lr = cfg.lr});

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::uint64_t epoch_seed = derive_seed({seed, epoch});
    Rng aug_rng(derive_seed({epoch_seed, 1}));
    double loss_sum = 0.0;
    std::size_t measured = 0;
    for (const auto& rows : epoch_batches(n, batch, derive_seed({epoch_seed, 0}))) {
      const Matrix x = gather_rows(d_pub.features, rows);
      Matrix student_view = augment(x, aug, aug_rng);
      const Matrix momentum_view = augment(x, aug, aug_rng);
      const Matrix keys = encode(momentum, momentum_view);

      if (!queue.empty()) {
        const Matrix anchors = queue.representations();
        const std::vector<std::size_t> anchor_idx = queue.indices();
        student.zero_grad();
        Tape tape;
        Var z = encode(tape, student, tape.constant(std::move(student_view)));
        Var loss = esd_batch_loss(tape, z, rows, anchors, anchor_idx, target,
                                  cfg.student_temperature);
        loss_sum += tape.scalar(loss);
        ++measured;
        if (queue.size() >= warmup) {
          tape.backward(loss);
          adam.step(tensors);
          ++result.optimizer_steps;
        }
      }
      ema_update(momentum, student, cfg.momentum);
      queue.push(rows, keys);
    }
    result.epoch_losses.push_back(measured == 0 ? std::numeric_limits<double>::quiet_NaN()
                                                : loss_sum / static_cast<double>(measured));
  }
  result.student = std::move(student);
  return result;
}

}  // namespace flesd
