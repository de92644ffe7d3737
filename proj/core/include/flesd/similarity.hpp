#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "flesd/dataset.hpp"
#include "flesd/encoder.hpp"
#include "flesd/matrix.hpp"

namespace flesd {

// Sharpening temperatures below this overflow exp(1/tau) too easily.
inline constexpr double kMinTargetTemperature = 0.01;

// d x N matrix whose column i is the unit representation of public sample i.
struct RepresentationMatrix {
  Matrix columns;
  int source_client = -1;

  std::size_t dim() const { return columns.rows(); }
  std::size_t count() const { return columns.cols(); }
};

// N x N Gram matrix of a client's public-set representations.
struct SimilarityMatrix {
  Matrix entries;
  std::size_t size() const { return entries.rows(); }
};

// Entrywise exp(M / tau_T), or a mean of such matrices. Strictly positive.
struct EnsembleTarget {
  Matrix entries;
  double target_temperature = 0.0;
  std::size_t size() const { return entries.rows(); }
};

// Clean (unaugmented) representations of every public sample. A degenerate
// representation is reported with the offending sample id.
RepresentationMatrix infer_representations(const EncoderParams& params, const Dataset& d_pub,
                                           int client_id = -1);

// R^T R. Only the upper triangle is computed; the lower one is mirrored.
SimilarityMatrix similarity_matrix(const RepresentationMatrix& r);

EnsembleTarget sharpen(const SimilarityMatrix& m, double target_temperature);

// Entrywise mean over the sampled clients' sharpened matrices, summed in list order.
EnsembleTarget ensemble(std::span<const EnsembleTarget> sharpened);

// Representation snapshot, little-endian:
//   8 bytes magic "FLSDREP1"
//   i32     client id
//   u32     d
//   u32     N
//   u32     reserved (0)
//   f64     tau_T (NaN when unset)
//   f64...  payload, column-major (column i = sample i)
inline constexpr std::size_t kRepresentationHeaderSize = 32;
std::size_t representation_snapshot_size(std::size_t dim, std::size_t count);
std::vector<std::uint8_t> serialize(const RepresentationMatrix& r, double target_temperature);
RepresentationMatrix deserialize_representations(std::span<const std::uint8_t> bytes,
                                                 double* target_temperature = nullptr);
void save_representations(const RepresentationMatrix& r, const std::filesystem::path& path);

}  // namespace flesd
