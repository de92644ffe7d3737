#include "flesd/probe.hpp"

#include <algorithm>
#include <set>

#include "flesd/adam.hpp"
#include "flesd/error.hpp"
#include "flesd/local_training.hpp"
#include "flesd/rng.hpp"

namespace flesd {

void ProbeConfig::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ParameterError("probe: train_fraction must lie in (0, 1)");
  }
  if (batch_size < 1) throw ParameterError("probe: batch_size must be >= 1");
  if (!(lr > 0.0)) throw ParameterError("probe: lr must be > 0");
}

ProbeResult linear_probe_features(const Matrix& train_reps, std::span<const int> train_labels,
                                  const Matrix& test_reps, std::span<const int> test_labels,
                                  int num_classes, const ProbeConfig& cfg) {
  cfg.validate();
  if (train_reps.rows() != train_labels.size() || test_reps.rows() != test_labels.size()) {
    throw DimensionError("linear_probe: one label per representation row required");
  }
  if (train_reps.rows() == 0) throw DegenerateInputError("linear_probe: empty training set");
  if (train_reps.cols() != test_reps.cols() && test_reps.rows() > 0) {
    throw DimensionError("linear_probe: train and test representation widths differ");
  }
  if (num_classes < 1) throw ParameterError("linear_probe: num_classes must be >= 1");

  ProbeResult result;
  const std::set<int> seen(train_labels.begin(), train_labels.end());
  std::set<int> missing;
  for (int y : test_labels)
    if (!seen.count(y)) missing.insert(y);
  for (int y : missing) {
    result.warnings.push_back("class " + std::to_string(y) +
                              " appears in the probe test set but not in its training set");
  }

  result.head = LinearHead::zeros(train_reps.cols(), static_cast<std::size_t>(num_classes));
  auto tensors = result.head.tensors();
  AdamOptimizer adam(tensors, AdamOptions{.lr = cfg.lr});
  const std::size_t n = train_reps.rows();
  const std::size_t batch = std::min(cfg.batch_size, n);
  std::vector<int> labels;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& rows : epoch_batches(n, batch, derive_seed({cfg.seed, epoch}))) {
      labels.clear();
      for (std::size_t r : rows) labels.push_back(train_labels[r]);
      result.head.weight.zero_grad();
      result.head.bias.zero_grad();
      Tape tape;
      Var logits = result.head.logits(tape, tape.constant(gather_rows(train_reps, rows)));
      tape.backward(softmax_cross_entropy(tape, logits, labels));
      adam.step(tensors);
    }
  }
  result.accuracy =
      test_reps.rows() == 0 ? 0.0 : accuracy(argmax_rows(result.head.logits(test_reps)), test_labels);
  return result;
}

ProbeResult linear_probe(const EncoderParams& encoder, const Dataset& train, const Dataset& test,
                         const ProbeConfig& cfg) {
  return linear_probe_features(encode(encoder, train.features), train.labels,
                               encode(encoder, test.features), test.labels,
                               std::max(train.num_classes, test.num_classes), cfg);
}

}  // namespace flesd
