#include "flesd/federation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "flesd/error.hpp"
#include "flesd/parallel.hpp"
#include "flesd/rng.hpp"
#include "flesd/similarity.hpp"

namespace flesd {

Scheme scheme_from_string(const std::string& name) {
  if (name == "flesd") return Scheme::kFlesd;
  if (name == "flesd_cc") return Scheme::kFlesdCc;
  if (name == "fedavg") return Scheme::kFedAvg;
  if (name == "fedprox") return Scheme::kFedProx;
  if (name == "min_local") return Scheme::kMinLocal;
  throw ParameterError("unknown scheme '" + name +
                       "' (expected flesd, flesd_cc, fedavg, fedprox or min_local)");
}

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::kFlesd:
      return "flesd";
    case Scheme::kFlesdCc:
      return "flesd_cc";
    case Scheme::kFedAvg:
      return "fedavg";
    case Scheme::kFedProx:
      return "fedprox";
    case Scheme::kMinLocal:
      return "min_local";
  }
  return "unknown";
}

void FederationConfig::validate() const {
  if (!(sample_fraction > 0.0 && sample_fraction <= 1.0)) {
    throw ParameterError("federation: sample_fraction must lie in (0, 1]");
  }
  if (total_epochs != 0 && total_epochs != rounds * local_epochs) {
    throw ParameterError("federation: total_epochs (" + std::to_string(total_epochs) +
                         ") != rounds x local_epochs (" + std::to_string(rounds) + " x " +
                         std::to_string(local_epochs) + ")");
  }
  if (prox_mu < 0.0) throw ParameterError("federation: prox_mu must be >= 0");
}

std::size_t FederationConfig::effective_total_epochs() const {
  return total_epochs != 0 ? total_epochs : rounds * local_epochs;
}

FederationConfig FederationConfig::normalized() const {
  FederationConfig out = *this;
  if (scheme == Scheme::kFlesdCc || scheme == Scheme::kMinLocal) {
    out.local_epochs = effective_total_epochs();
    out.rounds = 1;
    out.total_epochs = out.local_epochs;
  }
  return out;
}

std::vector<std::size_t> sample_clients(std::size_t num_clients, double fraction,
                                        std::uint64_t round_seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ParameterError("sample_clients: fraction must lie in (0, 1]");
  }
  const auto want = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(num_clients) - 1e-12));
  std::vector<std::size_t> ids(num_clients);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  if (want >= num_clients) return ids;
  Rng rng(round_seed);
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < want; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, num_clients - 1);
    std::swap(ids[i], ids[pick(rng)]);
  }
  ids.resize(want);
  std::sort(ids.begin(), ids.end());
  return ids;
}

EncoderParams weight_average(std::span<const EncoderParams> params,
                             std::span<const double> weights) {
  if (params.empty()) throw ParameterError("weight_average: nothing to average");
  if (params.size() != weights.size()) {
    throw ParameterError("weight_average: one weight per model required");
  }
  double wsum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ParameterError("weight_average: weights must be >= 0");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-9) throw ParameterError("weight_average: weights must sum to 1");
  for (const auto& p : params) {
    if (!p.same_architecture(params.front())) {
      throw DimensionError("weight_average: cannot average heterogeneous architectures");
    }
  }

  EncoderParams out = params.front();
  auto acc = out.tensors();
  double seen = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (weights[k] == 0.0) continue;
    seen += weights[k];
    const double r = weights[k] / seen;
    const auto src = params[k].tensors();
    for (std::size_t t = 0; t < acc.size(); ++t) {
      auto a = acc[t]->value.data();
      const auto s = src[t]->value.data();
      if (r == 1.0) {
        std::copy(s.begin(), s.end(), a.begin());
      } else {
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += r * (s[i] - a[i]);
      }
    }
  }
  out.zero_grad();
  return out;
}

std::uint64_t client_seed(std::uint64_t global_seed, std::size_t round, int client_id) {
  return derive_seed({global_seed, tag(SeedTag::kClient), round,
                      static_cast<std::uint64_t>(client_id)});
}

namespace {

struct Participant {
  int id;
  const Dataset* shard;
};

std::vector<Participant> participants(const Partition& partition, bool include_public) {
  std::vector<Participant> out;
  for (std::size_t s = 0; s < partition.shards.size(); ++s) {
    if (partition.has_public_shard && s == 0 && !include_public) continue;
    out.push_back({static_cast<int>(s), &partition.shards[s]});
  }
  if (out.empty()) throw ParameterError("federation: no training clients");
  return out;
}

std::vector<double> mean_curves(const std::vector<std::vector<double>>& curves) {
  if (curves.empty()) return {};
  std::vector<double> out(curves.front().size(), 0.0);
  for (const auto& c : curves)
    for (std::size_t e = 0; e < out.size() && e < c.size(); ++e) out[e] += c[e];
  for (double& v : out) v /= static_cast<double>(curves.size());
  return out;
}

std::string context(std::size_t round, int client) {
  return "round " + std::to_string(round) + ", client " + std::to_string(client) + ": ";
}

// Runs local contrastive training for the sampled participants in parallel.
std::vector<LocalTrainResult> train_sampled(const FederationConfig& cfg,
                                            const std::vector<Participant>& people,
                                            const std::vector<std::size_t>& sampled,
                                            const EncoderParams& start,
                                            const ContrastiveConfig& local_cfg,
                                            std::size_t round, double prox_mu) {
  ContrastiveConfig lc = local_cfg;
  lc.epochs = cfg.local_epochs;
  std::optional<ProximalTerm> prox;
  if (prox_mu > 0.0) prox = ProximalTerm{ProxConfig{prox_mu}, start};
  std::vector<LocalTrainResult> out(sampled.size());
  parallel_for(sampled.size(), cfg.client_threads, [&](std::size_t i) {
    const Participant& p = people[sampled[i]];
    try {
      out[i] = train_simclr_local(start, *p.shard, lc, prox, client_seed(cfg.seed, round, p.id));
    } catch (const Error& e) {
      throw Error(context(round, p.id) + e.what());
    }
  });
  return out;
}

void add_warnings(FederationResult& r, std::size_t round, int client,
                  const std::vector<std::string>& ws) {
  for (const auto& w : ws) r.warnings.push_back(context(round, client) + w);
}

}  // namespace

FederationResult run_flesd(const FederationConfig& cfg_in, const Partition& partition,
                           const EncoderConfig& encoder_cfg, const ContrastiveConfig& local_cfg,
                           const EsdConfig& esd_cfg) {
  cfg_in.validate();
  const FederationConfig cfg = cfg_in.normalized();
  esd_cfg.validate();
  if (!partition.has_public_shard) throw ParameterError("run_flesd: partition has no public shard");
  const Dataset& d_pub = partition.public_data();
  const auto people = participants(partition, false);

  FederationResult result;
  EncoderParams global = init_encoder(encoder_cfg);
  const std::uint64_t weight_bytes = snapshot_size(encoder_cfg);
  const std::uint64_t public_bytes = 8ULL * d_pub.size() * d_pub.in_dim();

  if (cfg.rounds == 0) {
    result.global = std::move(global);
    return result;
  }
  if (!cfg.resend_public_data) {
    for (const auto& p : people) {
      result.ledger.add({0, p.id, Direction::kDown, PayloadKind::kPublicData, public_bytes});
    }
  }
  for (const auto& p : people) {
    result.ledger.add({1, p.id, Direction::kDown, PayloadKind::kWeights, weight_bytes});
  }

  for (std::size_t t = 1; t <= cfg.rounds; ++t) {
    RoundRecord rec;
    rec.round = t;
    const auto sampled = sample_clients(
        people.size(), cfg.sample_fraction,
        derive_seed({cfg.seed, tag(SeedTag::kSample), static_cast<std::uint64_t>(t)}));
    if (cfg.resend_public_data) {
      for (std::size_t i : sampled) {
        result.ledger.add({t, people[i].id, Direction::kDown, PayloadKind::kPublicData, public_bytes});
      }
    }

    auto local = train_sampled(cfg, people, sampled, global, local_cfg, t, 0.0);
    std::vector<EnsembleTarget> sharpened(sampled.size());
    parallel_for(sampled.size(), cfg.client_threads, [&](std::size_t i) {
      const int id = people[sampled[i]].id;
      try {
        const RepresentationMatrix r = infer_representations(local[i].params, d_pub, id);
        sharpened[i] = sharpen(similarity_matrix(r), esd_cfg.target_temperature);
      } catch (const Error& e) {
        throw Error(context(t, id) + e.what());
      }
    });

    std::vector<std::vector<double>> curves;
    for (std::size_t i = 0; i < sampled.size(); ++i) {
      const int id = people[sampled[i]].id;
      rec.sampled_clients.push_back(id);
      result.ledger.add({t, id, Direction::kUp, PayloadKind::kRepresentations,
                         representation_snapshot_size(encoder_cfg.output_dim(), d_pub.size())});
      curves.push_back(local[i].epoch_losses);
      add_warnings(result, t, id, local[i].warnings);
      result.client_models.insert_or_assign(id, std::move(local[i].params));
    }
    rec.mean_local_losses = mean_curves(curves);

    const EnsembleTarget target = ensemble(sharpened);
    DistillResult distilled;
    try {
      distilled = distill(global, target, d_pub, esd_cfg, local_cfg.aug,
                          derive_seed({cfg.seed, tag(SeedTag::kDistill), static_cast<std::uint64_t>(t)}));
    } catch (const Error& e) {
      throw Error("round " + std::to_string(t) + ", server distillation: " + e.what());
    }
    for (const auto& w : distilled.warnings) {
      result.warnings.push_back("round " + std::to_string(t) + ", server: " + w);
    }
    rec.distill_losses = std::move(distilled.epoch_losses);
    global = std::move(distilled.student);

    for (const auto& p : people) {
      result.ledger.add({t, p.id, Direction::kDown, PayloadKind::kWeights, weight_bytes});
    }
    result.rounds.push_back(std::move(rec));
  }
  result.global = std::move(global);
  return result;
}

namespace {

FederationResult run_weight_averaging(const FederationConfig& cfg_in, const Partition& partition,
                                      const EncoderConfig& encoder_cfg,
                                      const ContrastiveConfig& local_cfg, double prox_mu) {
  cfg_in.validate();
  const FederationConfig cfg = cfg_in.normalized();
  const auto people = participants(partition, true);

  FederationResult result;
  EncoderParams global = init_encoder(encoder_cfg);
  const std::uint64_t weight_bytes = snapshot_size(encoder_cfg);

  for (std::size_t t = 1; t <= cfg.rounds; ++t) {
    RoundRecord rec;
    rec.round = t;
    const auto sampled = sample_clients(
        people.size(), cfg.sample_fraction,
        derive_seed({cfg.seed, tag(SeedTag::kSample), static_cast<std::uint64_t>(t)}));
    for (std::size_t i : sampled) {
      result.ledger.add({t, people[i].id, Direction::kDown, PayloadKind::kWeights, weight_bytes});
    }

    auto local = train_sampled(cfg, people, sampled, global, local_cfg, t, prox_mu);

    double total_size = 0.0;
    for (std::size_t i : sampled) total_size += static_cast<double>(people[i].shard->size());
    std::vector<double> weights;
    std::vector<EncoderParams> models;
    std::vector<std::vector<double>> curves;
    for (std::size_t i = 0; i < sampled.size(); ++i) {
      const int id = people[sampled[i]].id;
      rec.sampled_clients.push_back(id);
      result.ledger.add({t, id, Direction::kUp, PayloadKind::kWeights, weight_bytes});
      weights.push_back(static_cast<double>(people[sampled[i]].shard->size()) / total_size);
      curves.push_back(local[i].epoch_losses);
      add_warnings(result, t, id, local[i].warnings);
      models.push_back(local[i].params);
      result.client_models.insert_or_assign(id, std::move(local[i].params));
    }
    rec.mean_local_losses = mean_curves(curves);
    try {
      global = weight_average(models, weights);
    } catch (const Error& e) {
      throw Error("round " + std::to_string(t) + ", aggregation: " + e.what());
    }
    result.rounds.push_back(std::move(rec));
  }
  result.global = std::move(global);
  return result;
}

}  // namespace

FederationResult run_fedavg(const FederationConfig& cfg, const Partition& partition,
                            const EncoderConfig& encoder_cfg, const ContrastiveConfig& local_cfg) {
  return run_weight_averaging(cfg, partition, encoder_cfg, local_cfg, 0.0);
}

FederationResult run_fedprox(const FederationConfig& cfg, const Partition& partition,
                             const EncoderConfig& encoder_cfg, const ContrastiveConfig& local_cfg) {
  return run_weight_averaging(cfg, partition, encoder_cfg, local_cfg, cfg.prox_mu);
}

FederationResult run_min_local(const FederationConfig& cfg_in, const Partition& partition,
                               const EncoderConfig& encoder_cfg,
                               const ContrastiveConfig& local_cfg) {
  cfg_in.validate();
  const FederationConfig cfg = cfg_in.normalized();
  const auto people = participants(partition, true);
  std::vector<std::size_t> everyone(people.size());
  std::iota(everyone.begin(), everyone.end(), std::size_t{0});

  FederationResult result;
  const EncoderParams init = init_encoder(encoder_cfg);
  auto local = train_sampled(cfg, people, everyone, init, local_cfg, 1, 0.0);
  RoundRecord rec;
  rec.round = 1;
  std::vector<std::vector<double>> curves;
  for (std::size_t i = 0; i < people.size(); ++i) {
    rec.sampled_clients.push_back(people[i].id);
    curves.push_back(local[i].epoch_losses);
    add_warnings(result, 1, people[i].id, local[i].warnings);
    result.client_models.insert_or_assign(people[i].id, std::move(local[i].params));
  }
  rec.mean_local_losses = mean_curves(curves);
  result.rounds.push_back(std::move(rec));
  return result;
}

FederationResult run_scheme(const FederationConfig& cfg, const Partition& partition,
                            const EncoderConfig& encoder_cfg, const ContrastiveConfig& local_cfg,
                            const EsdConfig& esd_cfg) {
  switch (cfg.scheme) {
    case Scheme::kFlesd:
    case Scheme::kFlesdCc:
      return run_flesd(cfg, partition, encoder_cfg, local_cfg, esd_cfg);
    case Scheme::kFedAvg:
      return run_fedavg(cfg, partition, encoder_cfg, local_cfg);
    case Scheme::kFedProx:
      return run_fedprox(cfg, partition, encoder_cfg, local_cfg);
    case Scheme::kMinLocal:
      return run_min_local(cfg, partition, encoder_cfg, local_cfg);
  }
  throw ParameterError("run_scheme: unknown scheme");
}

CommCostCheck comm_cost_check(double omega, double omega_prime, double public_size, double dim,
                              double param_count) {
  if (omega < 0.0 || omega_prime < 0.0 || public_size < 0.0 || dim < 0.0 || param_count < 0.0) {
    throw ParameterError("comm_cost_check: inputs must be non-negative");
  }
  CommCostCheck c;
  c.lhs = omega * public_size * dim;
  c.rhs = omega_prime * param_count;
  c.flesd_cheaper = c.lhs <= c.rhs;
  return c;
}

}  // namespace flesd
