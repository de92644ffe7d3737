#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flesd/augment.hpp"
#include "flesd/dataset.hpp"
#include "flesd/encoder.hpp"
#include "flesd/linear_head.hpp"

namespace flesd {

struct ContrastiveConfig {
  double temperature = 0.4;
  std::size_t batch_size = 256;
  std::size_t epochs = 1;
  double lr = 1e-3;
  AugmentationConfig aug;

  void validate() const;
};

struct SupervisedConfig {
  std::size_t batch_size = 256;
  std::size_t epochs = 1;
  double lr = 1e-3;
  AugmentationConfig aug;

  void validate() const;
};

struct ProxConfig {
  double prox_mu = 0.0;
};

// FedProx regulariser prox_mu/2 * ||w - anchor||^2.
struct ProximalTerm {
  ProxConfig config;
  EncoderParams anchor;
};

struct LocalTrainResult {
  EncoderParams params;
  std::vector<double> epoch_losses;  // mean contrastive loss per epoch
  std::vector<std::string> warnings;
};

// SimCLR-style client update. Each epoch reshuffles the shard with a seed
// derived from (seed, epoch), draws two augmented views per batch and takes
// one Adam step on the symmetric NT-Xent loss (plus the proximal term when
// given). The trailing partial batch is dropped. A shard smaller than the
// batch size shrinks the batch to the shard, with a warning.
LocalTrainResult train_simclr_local(EncoderParams params, const Dataset& shard,
                                    const ContrastiveConfig& cfg,
                                    const std::optional<ProximalTerm>& prox, std::uint64_t seed);

struct SupervisedResult {
  EncoderParams params;
  LinearHead head;
  std::vector<double> epoch_losses;
  std::vector<double> epoch_accuracy;  // training accuracy after each epoch
  std::vector<std::string> warnings;
};

// Cross-entropy training of head(encode(x)) jointly with the encoder.
// Single-class shards are allowed.
SupervisedResult train_supervised_local(EncoderParams params, LinearHead head,
                                        const Dataset& shard, const SupervisedConfig& cfg,
                                        std::uint64_t seed);

// Top-1 accuracy of head(encode(x)) on ds.
double classification_accuracy(const EncoderParams& params, const LinearHead& head,
                               const Dataset& ds);

// Shuffled row order for one epoch, and its batches (last partial batch dropped).
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                    std::uint64_t epoch_seed);

}  // namespace flesd
