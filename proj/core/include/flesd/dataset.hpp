#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "flesd/matrix.hpp"

namespace flesd {

// Labelled samples. Row i of `features` carries `labels[i]` and the global
// sample id `ids[i]`; ids survive partitioning and splitting.
struct Dataset {
  Matrix features;
  std::vector<int> labels;
  std::vector<std::int64_t> ids;
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t in_dim() const { return features.cols(); }
  bool empty() const { return labels.empty(); }

  // Throws SchemaError if the invariants (lengths, label range, unique ids) fail.
  void validate() const;

  // Rows in the given order; num_classes is kept.
  Dataset subset(std::span<const std::size_t> rows) const;

  std::vector<std::size_t> class_histogram() const;
};

// Class c draws `per_class` samples from N(center_c, spread^2 I); centers are
// standard-normal draws. Samples are stored class-major, ids = row index.
Dataset synth_gaussian_blobs(int n_classes, std::size_t per_class, std::size_t in_dim,
                             double spread, std::uint64_t seed);

// Rows: feature columns then one integer label column. ids = row index.
Dataset load_csv_dataset(const std::filesystem::path& path);

struct TrainTestSplit {
  Dataset train;
  Dataset test;
};

// Seeded random split; train gets round(train_fraction * n) rows.
TrainTestSplit train_test_split(const Dataset& ds, double train_fraction, std::uint64_t seed);

// Concatenates datasets (e.g. all shards back into one pool).
Dataset concat(std::span<const Dataset> parts);

}  // namespace flesd
