#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "flesd/dataset.hpp"
#include "flesd/rng.hpp"

namespace flesd {

struct PartitionConfig {
  std::size_t num_clients = 1;  // K, not counting the public shard
  double alpha = 1.0;           // Dirichlet concentration
  bool public_shard = false;    // adds shard 0 as D_pub
  std::uint64_t seed = 0;
  std::size_t min_shard_size = 0;
  std::size_t max_retries = 1000;

  void validate() const;
};

// Shards of a Dirichlet split. With a public shard, shards[0] is D_pub and
// shards[1..K] belong to clients 1..K; otherwise shards[k] is client k.
struct Partition {
  std::vector<Dataset> shards;
  bool has_public_shard = false;

  const Dataset& public_data() const;
  std::span<const Dataset> client_shards() const;
  std::size_t num_clients() const { return client_shards().size(); }
};

// Per class, draws proportions ~ Dirichlet(alpha) over all shards and cuts the
// (shuffled) class members at the cumulative proportions. Resamples the whole
// allocation until every shard has at least min_shard_size samples; throws
// PartitionInfeasibleError once max_retries is spent.
Partition dirichlet_partition(const Dataset& ds, const PartitionConfig& cfg);

// One Dirichlet(alpha) draw of the given dimension. Sampled in log space so
// tiny alphas (0.01) do not underflow to an all-zero vector.
std::vector<double> sample_dirichlet(double alpha, std::size_t dim, Rng& rng);

// [{shard_id, size, class_histogram, public}, ...]
nlohmann::json partition_report(const Partition& p);

// Mean over shards of the largest single-class share within the shard.
double mean_max_class_share(const Partition& p);

}  // namespace flesd
