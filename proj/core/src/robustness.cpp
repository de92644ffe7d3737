#include "flesd/robustness.hpp"

#include <bit>
#include <numeric>

#include "flesd/error.hpp"
#include "flesd/partition.hpp"
#include "flesd/rng.hpp"

namespace flesd {

namespace {

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

RobustnessResult run_robustness_study(const Dataset& pool, const RobustnessConfig& cfg) {
  if (cfg.alphas.size() < 2) throw ParameterError("robustness: at least two alphas required");
  cfg.probe.validate();
  const TrainTestSplit split =
      train_test_split(pool, cfg.probe.train_fraction, derive_seed({cfg.seed, tag(SeedTag::kSplit)}));
  const EncoderParams init = init_encoder(cfg.encoder);

  RobustnessResult result;
  for (double alpha : cfg.alphas) {
    PartitionConfig pc;
    pc.num_clients = cfg.num_clients;
    pc.alpha = alpha;
    pc.min_shard_size = cfg.min_shard_size;
    pc.seed = derive_seed({cfg.seed, tag(SeedTag::kPartition), std::bit_cast<std::uint64_t>(alpha)});
    const Partition partition = dirichlet_partition(split.train, pc);

    RobustnessCell cell;
    cell.alpha = alpha;
    for (std::size_t k = 0; k < partition.shards.size(); ++k) {
      const Dataset& shard = partition.shards[k];
      const auto id = static_cast<std::uint64_t>(k);

      LocalTrainResult c = train_simclr_local(
          init, shard, cfg.contrastive, std::nullopt,
          derive_seed({cfg.seed, tag(SeedTag::kClient), id}));
      ProbeResult cp = linear_probe(c.params, split.train, split.test, cfg.probe);
      cell.contrastive_probe.push_back(cp.accuracy);

      const LinearHead head = LinearHead::glorot(
          cfg.encoder.output_dim(), static_cast<std::size_t>(pool.num_classes),
          derive_seed({cfg.seed, tag(SeedTag::kInit), tag(SeedTag::kSupervised)}));
      SupervisedResult s = train_supervised_local(
          init, head, shard, cfg.supervised,
          derive_seed({cfg.seed, tag(SeedTag::kSupervised), id}));
      cell.supervised_test.push_back(classification_accuracy(s.params, s.head, split.test));
      cell.supervised_probe.push_back(
          linear_probe(s.params, split.train, split.test, cfg.probe).accuracy);

      for (const auto& w : c.warnings) {
        result.warnings.push_back("alpha " + std::to_string(alpha) + ", client " +
                                  std::to_string(k) + ": " + w);
      }
    }
    cell.mean_contrastive_probe = mean(cell.contrastive_probe);
    cell.mean_supervised_test = mean(cell.supervised_test);
    cell.mean_supervised_probe = mean(cell.supervised_probe);
    result.cells.push_back(std::move(cell));
  }
  const RobustnessCell& hi = result.cells.front();
  const RobustnessCell& lo = result.cells.back();
  result.contrastive_drop = hi.mean_contrastive_probe - lo.mean_contrastive_probe;
  result.supervised_drop = hi.mean_supervised_test - lo.mean_supervised_test;
  result.supervised_probe_drop = hi.mean_supervised_probe - lo.mean_supervised_probe;
  return result;
}

}  // namespace flesd
