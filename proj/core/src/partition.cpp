#include "flesd/partition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "flesd/error.hpp"

namespace flesd {

void PartitionConfig::validate() const {
  if (num_clients < 1) throw ParameterError("partition: num_clients must be >= 1");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw ParameterError("partition: alpha must be a finite value > 0");
  }
}

const Dataset& Partition::public_data() const {
  if (!has_public_shard) throw ParameterError("partition has no public shard");
  return shards.front();
}

std::span<const Dataset> Partition::client_shards() const {
  std::span<const Dataset> all(shards);
  return has_public_shard ? all.subspan(1) : all;
}

std::vector<double> sample_dirichlet(double alpha, std::size_t dim, Rng& rng) {
  // G ~ Gamma(a) as Gamma(a + 1) * U^(1/a) for a < 1, kept as a logarithm.
  const bool boost = alpha < 1.0;
  std::gamma_distribution<double> gamma(boost ? alpha + 1.0 : alpha, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> logs(dim);
  for (double& lg : logs) {
    double g = gamma(rng);
    while (!(g > 0.0)) g = gamma(rng);
    lg = std::log(g);
    if (boost) {
      double u = unif(rng);
      while (!(u > 0.0)) u = unif(rng);
      lg += std::log(u) / alpha;
    }
  }
  const double mx = *std::max_element(logs.begin(), logs.end());
  double z = 0.0;
  for (double& lg : logs) {
    lg = std::exp(lg - mx);
    z += lg;
  }
  for (double& p : logs) p /= z;
  return logs;
}

Partition dirichlet_partition(const Dataset& ds, const PartitionConfig& cfg) {
  cfg.validate();
  if (ds.empty()) throw ParameterError("dirichlet_partition: dataset is empty");

  const std::size_t n_shards = cfg.num_clients + (cfg.public_shard ? 1 : 0);
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.num_classes));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  }

  Rng rng(derive_seed({cfg.seed, tag(SeedTag::kPartition)}));
  std::vector<std::vector<std::size_t>> members;
  bool ok = false;
  for (std::size_t attempt = 0; attempt <= cfg.max_retries && !ok; ++attempt) {
    members.assign(n_shards, {});
    for (const auto& cls : by_class) {
      if (cls.empty()) continue;
      std::vector<std::size_t> idx = cls;
      std::shuffle(idx.begin(), idx.end(), rng);
      std::vector<double> props = n_shards == 1 ? std::vector<double>{1.0}
                                                : sample_dirichlet(cfg.alpha, n_shards, rng);
      double cum = 0.0;
      std::size_t begin = 0;
      for (std::size_t s = 0; s < n_shards; ++s) {
        std::size_t end = idx.size();
        if (s + 1 < n_shards) {
          cum += props[s];
          end = std::min(idx.size(), static_cast<std::size_t>(cum * static_cast<double>(idx.size())));
          end = std::max(end, begin);
        }
        members[s].insert(members[s].end(), idx.begin() + static_cast<std::ptrdiff_t>(begin),
                          idx.begin() + static_cast<std::ptrdiff_t>(end));
        begin = end;
      }
    }
    ok = std::all_of(members.begin(), members.end(), [&](const auto& m) {
      return m.size() >= cfg.min_shard_size && !m.empty();
    });
  }
  if (!ok) {
    throw PartitionInfeasibleError(
        "dirichlet_partition: no allocation with every shard >= " +
        std::to_string(std::max<std::size_t>(cfg.min_shard_size, 1)) + " samples after " +
        std::to_string(cfg.max_retries + 1) + " attempts (alpha=" + std::to_string(cfg.alpha) +
        ", shards=" + std::to_string(n_shards) + ")");
  }

  Partition p;
  p.has_public_shard = cfg.public_shard;
  p.shards.reserve(n_shards);
  for (auto& m : members) {
    std::sort(m.begin(), m.end());
    p.shards.push_back(ds.subset(m));
  }
  return p;
}

nlohmann::json partition_report(const Partition& p) {
  nlohmann::json shards = nlohmann::json::array();
  for (std::size_t s = 0; s < p.shards.size(); ++s) {
    shards.push_back({{"shard_id", s},
                      {"size", p.shards[s].size()},
                      {"class_histogram", p.shards[s].class_histogram()},
                      {"public", p.has_public_shard && s == 0}});
  }
  return shards;
}

double mean_max_class_share(const Partition& p) {
  double total = 0.0;
  for (const Dataset& s : p.shards) {
    const auto h = s.class_histogram();
    const auto mx = h.empty() ? 0 : *std::max_element(h.begin(), h.end());
    total += s.empty() ? 0.0 : static_cast<double>(mx) / static_cast<double>(s.size());
  }
  return p.shards.empty() ? 0.0 : total / static_cast<double>(p.shards.size());
}

}  // namespace flesd
