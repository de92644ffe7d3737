#include "flesd/local_training.hpp"

#include <algorithm>
#include <numeric>

#include "flesd/adam.hpp"
#include "flesd/contrastive.hpp"
#include "flesd/error.hpp"
#include "flesd/rng.hpp"

namespace flesd {

void ContrastiveConfig::validate() const {
  if (!(temperature > 0.0)) throw ParameterError("contrastive: temperature must be > 0");
  if (batch_size < 2) throw ParameterError("contrastive: batch_size must be >= 2");
  if (!(lr > 0.0)) throw ParameterError("contrastive: lr must be > 0");
  aug.validate();
}

void SupervisedConfig::validate() const {
  if (batch_size < 1 || epochs < 1) {
    throw ParameterError("supervised: batch_size and epochs must be >= 1");
  }
  if (!(lr > 0.0)) throw ParameterError("supervised: lr must be > 0");
  aug.validate();
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                    std::uint64_t epoch_seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(epoch_seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; batch_size > 0 && start + batch_size <= n; start += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(start + batch_size));
  }
  return batches;
}

LocalTrainResult train_simclr_local(EncoderParams params, const Dataset& shard,
                                    const ContrastiveConfig& cfg,
                                    const std::optional<ProximalTerm>& prox, std::uint64_t seed) {
  cfg.validate();
  if (shard.empty()) throw DegenerateInputError("train_simclr_local: empty shard");
  if (prox && prox->config.prox_mu < 0.0) {
    throw ParameterError("train_simclr_local: prox_mu must be >= 0");
  }
  if (prox && !prox->anchor.same_architecture(params)) {
    throw DimensionError("train_simclr_local: proximal anchor architecture differs");
  }

  LocalTrainResult result;
  std::size_t batch = cfg.batch_size;
  if (shard.size() < batch) {
    batch = shard.size();
    result.warnings.push_back("batch size clamped from " + std::to_string(cfg.batch_size) +
                              " to shard size " + std::to_string(batch));
  }
  if (batch < 2) {
    throw DegenerateInputError("train_simclr_local: shard of one sample has no negatives");
  }

  const bool use_prox = prox && prox->config.prox_mu > 0.0;
  auto tensors = params.tensors();
  const std::vector<const ParamTensor*> anchor_tensors =
      use_prox ? prox->anchor.tensors() : std::vector<const ParamTensor*>{};
  AdamOptimizer adam(tensors, AdamOptions{.lr = cfg.lr});

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::uint64_t epoch_seed = derive_seed({seed, epoch});
    Rng aug_rng(derive_seed({epoch_seed, 1}));
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (const auto& rows : epoch_batches(shard.size(), batch, derive_seed({epoch_seed, 0}))) {
      const Matrix x = gather_rows(shard.features, rows);
      Matrix view_a = augment(x, cfg.aug, aug_rng);
      Matrix view_b = augment(x, cfg.aug, aug_rng);

      params.zero_grad();
      Tape tape;
      Var za = encode(tape, params, tape.constant(std::move(view_a)));
      Var zb = encode(tape, params, tape.constant(std::move(view_b)));
      Var loss = info_nce_loss(tape, za, zb, cfg.temperature);
      loss_sum += tape.scalar(loss);
      Var objective = loss;
      if (use_prox) {
        for (std::size_t i = 0; i < tensors.size(); ++i) {
          Var d = squared_distance(tape, tape.param(*tensors[i]), anchor_tensors[i]->value);
          objective = add(tape, objective, scale(tape, d, 0.5 * prox->config.prox_mu));
        }
      }
      tape.backward(objective);
      adam.step(tensors);
      ++steps;
    }
    result.epoch_losses.push_back(steps == 0 ? 0.0 : loss_sum / static_cast<double>(steps));
  }
  result.params = std::move(params);
  return result;
}

double classification_accuracy(const EncoderParams& params, const LinearHead& head,
                               const Dataset& ds) {
  if (ds.empty()) return 0.0;
  return accuracy(argmax_rows(head.logits(encode(params, ds.features))), ds.labels);
}

SupervisedResult train_supervised_local(EncoderParams params, LinearHead head,
                                        const Dataset& shard, const SupervisedConfig& cfg,
                                        std::uint64_t seed) {
  cfg.validate();
  if (shard.empty()) throw DegenerateInputError("train_supervised_local: empty shard");
  if (head.weight.value.rows() != params.config().output_dim()) {
    throw DimensionError("train_supervised_local: head input differs from encoder output");
  }

  SupervisedResult result;
  std::size_t batch = cfg.batch_size;
  if (shard.size() < batch) {
    batch = shard.size();
    result.warnings.push_back("batch size clamped to shard size " + std::to_string(batch));
  }

  std::vector<ParamTensor*> tensors = params.tensors();
  tensors.push_back(&head.weight);
  tensors.push_back(&head.bias);
  AdamOptimizer adam(tensors, AdamOptions{.lr = cfg.lr});

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::uint64_t epoch_seed = derive_seed({seed, epoch});
    Rng aug_rng(derive_seed({epoch_seed, 1}));
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (const auto& rows : epoch_batches(shard.size(), batch, derive_seed({epoch_seed, 0}))) {
      Matrix x = augment(gather_rows(shard.features, rows), cfg.aug, aug_rng);
      std::vector<int> y(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) y[i] = shard.labels[rows[i]];

      for (ParamTensor* t : tensors) t->zero_grad();
      Tape tape;
      Var z = encode(tape, params, tape.constant(std::move(x)));
      Var loss = softmax_cross_entropy(tape, head.logits(tape, z), y);
      loss_sum += tape.scalar(loss);
      tape.backward(loss);
      adam.step(tensors);
      ++steps;
    }
    result.epoch_losses.push_back(steps == 0 ? 0.0 : loss_sum / static_cast<double>(steps));
    result.epoch_accuracy.push_back(classification_accuracy(params, head, shard));
  }
  result.params = std::move(params);
  result.head = std::move(head);
  return result;
}

}  // namespace flesd
