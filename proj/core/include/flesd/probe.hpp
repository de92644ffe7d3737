#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flesd/dataset.hpp"
#include "flesd/encoder.hpp"
#include "flesd/linear_head.hpp"

namespace flesd {

struct ProbeConfig {
  std::size_t epochs = 100;
  double lr = 1e-3;
  std::size_t batch_size = 128;
  double train_fraction = 0.8;  // share of the pool kept for training; the rest is the test set
  std::uint64_t seed = 0;

  void validate() const;
};

struct ProbeResult {
  double accuracy = 0.0;
  LinearHead head;
  std::vector<std::string> warnings;
};

// Linear evaluation: a zero-initialised softmax head is fitted with Adam on
// the frozen clean representations of `train` and scored (top-1) on `test`.
// The encoder is only read. Test classes missing from train produce warnings.
ProbeResult linear_probe(const EncoderParams& encoder, const Dataset& train, const Dataset& test,
                         const ProbeConfig& cfg);

// Same protocol on precomputed representations.
ProbeResult linear_probe_features(const Matrix& train_reps, std::span<const int> train_labels,
                                  const Matrix& test_reps, std::span<const int> test_labels,
                                  int num_classes, const ProbeConfig& cfg);

}  // namespace flesd
