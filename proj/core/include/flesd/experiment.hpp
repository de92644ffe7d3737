#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flesd/dataset.hpp"
#include "flesd/encoder.hpp"
#include "flesd/esd.hpp"
#include "flesd/federation.hpp"
#include "flesd/local_training.hpp"
#include "flesd/partition.hpp"
#include "flesd/probe.hpp"

namespace flesd {

struct DataConfig {
  std::string kind = "blobs";  // "blobs" or "csv"
  int num_classes = 8;
  std::size_t per_class = 300;
  std::size_t in_dim = 10;
  double spread = 1.0;
  std::filesystem::path path;  // csv only, resolved against the config file's directory
};

struct PartitionGridConfig {
  std::size_t num_clients = 6;
  std::vector<double> alphas = {1.0};
  bool public_shard = true;
  std::size_t min_shard_size = 0;  // 0 = twice the local batch size
  std::size_t max_retries = 1000;
};

struct EncoderSpec {
  std::vector<std::size_t> hidden = {32};
  std::size_t output_dim = 16;
  Activation activation = Activation::kRelu;
};

struct FederationGridConfig {
  std::vector<Scheme> schemes = {Scheme::kFlesd, Scheme::kFedAvg, Scheme::kMinLocal};
  std::vector<std::size_t> rounds = {2};  // T grid
  std::size_t total_epochs = 10;           // E_total, split as T x E_local
  double sample_fraction = 1.0;
  double prox_mu = 0.01;
  bool resend_public_data = false;
};

struct OutputConfig {
  std::filesystem::path dir = "out";
  bool wall_clock = false;  // write measured seconds into metrics.csv
  bool save_weights = true;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  DataConfig data;
  PartitionGridConfig partition;
  EncoderSpec encoder;
  ContrastiveConfig local;
  EsdConfig esd;
  FederationGridConfig federation;
  ProbeConfig probe;
  OutputConfig output;

  EncoderConfig encoder_config(std::size_t in_dim) const;
  PartitionConfig partition_config(double alpha) const;
};

// Throws ConfigError naming the offending field path (e.g. "esd.momentum").
// Unknown keys are rejected.
ExperimentConfig parse_config(const nlohmann::json& j,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

// Synthesizes or reads the dataset. A missing csv is a ConfigError on data.path.
Dataset load_data(const ExperimentConfig& cfg);

struct CellResult {
  Scheme scheme = Scheme::kFlesd;
  double alpha = 0.0;
  std::size_t rounds = 0;
  std::size_t local_epochs = 0;
  double final_probe_acc = 0.0;       // global model; mean of local probes for min_local
  double mean_local_probe_acc = 0.0;
  std::map<int, double> client_probe_acc;
  std::vector<RoundRecord> round_records;
  CommunicationLedger ledger;
  double wall_seconds = 0.0;
  std::vector<std::string> warnings;
  std::optional<EncoderParams> global;
};

struct ExperimentResult {
  std::vector<CellResult> cells;  // alpha-major, then scheme, then T, in config order
  nlohmann::json partition_report;
};

// Per-alpha partitions of the training pool, without training.
nlohmann::json partition_report(const ExperimentConfig& cfg);

// Runs every (alpha, scheme, T) cell, up to `threads` cells at a time.
ExperimentResult run_grid(const ExperimentConfig& cfg, std::size_t threads = 1);

std::string metrics_csv(const ExperimentResult& r, bool wall_clock);
std::string ledger_csv(const ExperimentResult& r);
nlohmann::json metrics_json(const ExperimentResult& r);

// metrics.csv, metrics.json, ledger.csv, partition_report.json and weights/.
void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& r,
                   const std::filesystem::path& dir);

// SIM_THREADS, or 1 when unset or invalid.
std::size_t threads_from_env();

}  // namespace flesd
