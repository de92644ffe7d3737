#pragma once

#include <cstdint>
#include <vector>

#include "flesd/dataset.hpp"
#include "flesd/encoder.hpp"
#include "flesd/local_training.hpp"
#include "flesd/probe.hpp"

namespace flesd {

// Local-only heterogeneity study: every client of a Dirichlet split trains
// from the same init, once contrastively and once with labels, and each
// variant is scored on the shared held-out test set.
struct RobustnessConfig {
  std::size_t num_clients = 6;
  std::vector<double> alphas = {100.0, 0.01};  // first = near-iid, last = skewed
  std::size_t min_shard_size = 16;
  EncoderConfig encoder;
  ContrastiveConfig contrastive;
  SupervisedConfig supervised;
  ProbeConfig probe;
  std::uint64_t seed = 0;
};

struct RobustnessCell {
  double alpha = 0.0;
  std::vector<double> contrastive_probe;  // per client, linear probe of the contrastive encoder
  std::vector<double> supervised_test;    // per client, own head on the test set
  std::vector<double> supervised_probe;   // per client, linear probe of the supervised encoder
  double mean_contrastive_probe = 0.0;
  double mean_supervised_test = 0.0;
  double mean_supervised_probe = 0.0;
};

struct RobustnessResult {
  std::vector<RobustnessCell> cells;  // one per alpha, in config order
  // first alpha minus last alpha, in accuracy units
  double contrastive_drop = 0.0;
  double supervised_drop = 0.0;
  double supervised_probe_drop = 0.0;
  std::vector<std::string> warnings;
};

// `pool` is split into train/test with probe.train_fraction; the train part
// is partitioned per alpha and the probe is fitted on the whole train part.
RobustnessResult run_robustness_study(const Dataset& pool, const RobustnessConfig& cfg);

}  // namespace flesd
