#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flesd/encoder.hpp"
#include "flesd/esd.hpp"
#include "flesd/ledger.hpp"
#include "flesd/local_training.hpp"
#include "flesd/partition.hpp"

namespace flesd {

enum class Scheme { kFlesd, kFlesdCc, kFedAvg, kFedProx, kMinLocal };

Scheme scheme_from_string(const std::string& name);
std::string to_string(Scheme s);

struct FederationConfig {
  Scheme scheme = Scheme::kFlesd;
  std::size_t rounds = 1;        // T
  std::size_t local_epochs = 1;  // E_local
  std::size_t total_epochs = 0;  // E_total; 0 means T * E_local
  double sample_fraction = 1.0;  // C
  double prox_mu = 0.0;          // fedprox only
  std::uint64_t seed = 0;
  // Re-send D_pub to the sampled clients every round instead of once up front.
  bool resend_public_data = false;
  // Worker threads for the per-round client phase. Results do not depend on it.
  std::size_t client_threads = 1;

  void validate() const;
  // flesd_cc collapses to T = 1, E_local = E_total; min_local trains E_total.
  FederationConfig normalized() const;
  std::size_t effective_total_epochs() const;
};

struct RoundRecord {
  std::size_t round = 0;
  std::vector<int> sampled_clients;
  std::vector<double> mean_local_losses;  // per local epoch, averaged over sampled clients
  std::vector<double> distill_losses;     // per distillation epoch (FLESD only)
};

struct FederationResult {
  std::optional<EncoderParams> global;       // absent for min_local
  std::map<int, EncoderParams> client_models;  // latest local model per client id
  std::vector<RoundRecord> rounds;
  CommunicationLedger ledger;
  std::vector<std::string> warnings;
};

// ceil(C * K) ids out of [0, K), drawn without replacement from round_seed and
// returned in ascending order. C = 1 gives every id.
std::vector<std::size_t> sample_clients(std::size_t num_clients, double fraction,
                                        std::uint64_t round_seed);

// Entrywise sum_k w_k * params_k. Weights must be >= 0 and sum to 1 within 1e-9.
// Computed as a running weighted mean, so identical inputs come back unchanged.
EncoderParams weight_average(std::span<const EncoderParams> params,
                             std::span<const double> weights);

// Seed of client `client_id`'s local update in round `round`.
std::uint64_t client_seed(std::uint64_t global_seed, std::size_t round, int client_id);

// Algorithm loop of FLESD (and FLESD-cc): per round, sampled clients start
// from the global weights, run contrastive local training, and upload the
// representation matrix of the public shard; the server sharpens, ensembles
// and distils into the previous global weights, then broadcasts the result.
FederationResult run_flesd(const FederationConfig& cfg, const Partition& partition,
                           const EncoderConfig& encoder_cfg, const ContrastiveConfig& local_cfg,
                           const EsdConfig& esd_cfg);

// Weight-averaging baselines. The public shard, if any, is an ordinary client
// (id 0). Aggregation weights are proportional to shard sizes.
FederationResult run_fedavg(const FederationConfig& cfg, const Partition& partition,
                            const EncoderConfig& encoder_cfg, const ContrastiveConfig& local_cfg);
FederationResult run_fedprox(const FederationConfig& cfg, const Partition& partition,
                             const EncoderConfig& encoder_cfg, const ContrastiveConfig& local_cfg);

// No aggregation: each client trains E_total epochs from the shared init.
FederationResult run_min_local(const FederationConfig& cfg, const Partition& partition,
                               const EncoderConfig& encoder_cfg,
                               const ContrastiveConfig& local_cfg);

// Dispatches on cfg.scheme.
FederationResult run_scheme(const FederationConfig& cfg, const Partition& partition,
                            const EncoderConfig& encoder_cfg, const ContrastiveConfig& local_cfg,
                            const EsdConfig& esd_cfg);

struct CommCostCheck {
  bool flesd_cheaper = false;
  double lhs = 0.0;  // omega * N * d_k
  double rhs = 0.0;  // omega' * |f_k|
};

// Whether uploading representation matrices beats uploading weights:
// omega * N * d_k <= omega' * |f_k|.
CommCostCheck comm_cost_check(double omega, double omega_prime, double public_size,
                              double dim, double param_count);

}  // namespace flesd
