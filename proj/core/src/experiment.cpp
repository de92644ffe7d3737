#include "flesd/experiment.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <mutex>
#include <sstream>

#include "flesd/error.hpp"
#include "flesd/parallel.hpp"
#include "flesd/rng.hpp"

namespace flesd {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
}

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
  require_object(j, path);
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; })) {
      throw ConfigError(join(path, key), "unknown field");
    }
  }
}

const json* find(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

std::size_t as_count(const json& v, const std::string& path) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw ConfigError(path, "expected a non-negative integer");
  }
  return static_cast<std::size_t>(v.get<std::int64_t>());
}

double as_real(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  return v.get<double>();
}

void read(const json& j, const char* key, const std::string& path, std::size_t& out) {
  if (const json* v = find(j, key)) out = as_count(*v, join(path, key));
}

void read(const json& j, const char* key, const std::string& path, double& out) {
  if (const json* v = find(j, key)) out = as_real(*v, join(path, key));
}

void read(const json& j, const char* key, const std::string& path, bool& out) {
  if (const json* v = find(j, key)) {
    if (!v->is_boolean()) throw ConfigError(join(path, key), "expected true or false");
    out = v->get<bool>();
  }
}

void read(const json& j, const char* key, const std::string& path, std::string& out) {
  if (const json* v = find(j, key)) {
    if (!v->is_string()) throw ConfigError(join(path, key), "expected a string");
    out = v->get<std::string>();
  }
}

template <class T, class F>
void read_list(const json& j, const char* key, const std::string& path, std::vector<T>& out,
               F convert) {
  const json* v = find(j, key);
  if (!v) return;
  const std::string p = join(path, key);
  if (!v->is_array()) throw ConfigError(p, "expected an array");
  out.clear();
  for (std::size_t i = 0; i < v->size(); ++i) {
    out.push_back(convert((*v)[i], p + "[" + std::to_string(i) + "]"));
  }
}

// Runs a validate() and reports its message under `path`.
template <class F>
void validated(const std::string& path, F fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
}

void parse_augmentation(const json& j, const std::string& path, AugmentationConfig& a) {
  check_keys(j, path, {"noise_sigma", "mask_prob", "scale_lo", "scale_hi"});
  read(j, "noise_sigma", path, a.noise_sigma);
  read(j, "mask_prob", path, a.mask_prob);
  read(j, "scale_lo", path, a.scale_lo);
  read(j, "scale_hi", path, a.scale_hi);
  validated(path, [&] { a.validate(); });
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string format_alpha(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("write failed for " + path.string());
}

double mean_of(const std::map<int, double>& m) {
  if (m.empty()) return 0.0;
  double s = 0.0;
  for (const auto& [id, v] : m) s += v;
  return s / static_cast<double>(m.size());
}

}  // namespace

EncoderConfig ExperimentConfig::encoder_config(std::size_t in_dim) const {
  EncoderConfig e;
  e.layer_sizes.push_back(in_dim);
  e.layer_sizes.insert(e.layer_sizes.end(), encoder.hidden.begin(), encoder.hidden.end());
  e.layer_sizes.push_back(encoder.output_dim);
  e.activation = encoder.activation;
  e.init_seed = derive_seed({seed, tag(SeedTag::kInit)});
  return e;
}

PartitionConfig ExperimentConfig::partition_config(double alpha) const {
  PartitionConfig p;
  p.num_clients = partition.num_clients;
  p.alpha = alpha;
  p.public_shard = partition.public_shard;
  p.seed = derive_seed({seed, tag(SeedTag::kPartition), std::bit_cast<std::uint64_t>(alpha)});
  p.min_shard_size =
      partition.min_shard_size != 0 ? partition.min_shard_size : 2 * local.batch_size;
  p.max_retries = partition.max_retries;
  return p;
}

ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  check_keys(j, "", {"seed", "data", "partition", "encoder", "local", "esd", "federation", "probe",
                     "output"});
  ExperimentConfig cfg;
  if (const json* v = find(j, "seed")) {
    if (!v->is_number_unsigned()) throw ConfigError("seed", "expected a non-negative integer");
    cfg.seed = v->get<std::uint64_t>();
  }

  if (const json* d = find(j, "data")) {
    const std::string p = "data";
    check_keys(*d, p, {"kind", "num_classes", "per_class", "in_dim", "spread", "path"});
    read(*d, "kind", p, cfg.data.kind);
    std::size_t classes = static_cast<std::size_t>(cfg.data.num_classes);
    read(*d, "num_classes", p, classes);
    cfg.data.num_classes = static_cast<int>(classes);
    read(*d, "per_class", p, cfg.data.per_class);
    read(*d, "in_dim", p, cfg.data.in_dim);
    read(*d, "spread", p, cfg.data.spread);
    std::string path;
    read(*d, "path", p, path);
    if (cfg.data.kind == "csv") {
      if (path.empty()) throw ConfigError("data.path", "required when data.kind is \"csv\"");
      cfg.data.path = std::filesystem::path(path).is_absolute() ? std::filesystem::path(path)
                                                                 : base_dir / path;
    } else if (cfg.data.kind == "blobs") {
      if (cfg.data.num_classes < 1) throw ConfigError("data.num_classes", "must be >= 1");
      if (cfg.data.per_class < 1) throw ConfigError("data.per_class", "must be >= 1");
      if (cfg.data.in_dim < 1) throw ConfigError("data.in_dim", "must be >= 1");
      if (!(cfg.data.spread > 0.0)) throw ConfigError("data.spread", "must be > 0");
    } else {
      throw ConfigError("data.kind", "expected \"blobs\" or \"csv\"");
    }
  }

  if (const json* s = find(j, "partition")) {
    const std::string p = "partition";
    check_keys(*s, p, {"num_clients", "alphas", "public_shard", "min_shard_size", "max_retries"});
    read(*s, "num_clients", p, cfg.partition.num_clients);
    read_list(*s, "alphas", p, cfg.partition.alphas, as_real);
    read(*s, "public_shard", p, cfg.partition.public_shard);
    read(*s, "min_shard_size", p, cfg.partition.min_shard_size);
    read(*s, "max_retries", p, cfg.partition.max_retries);
    if (cfg.partition.num_clients < 1) throw ConfigError("partition.num_clients", "must be >= 1");
    if (cfg.partition.alphas.empty()) throw ConfigError("partition.alphas", "must not be empty");
    for (std::size_t i = 0; i < cfg.partition.alphas.size(); ++i) {
      if (!(cfg.partition.alphas[i] > 0.0)) {
        throw ConfigError("partition.alphas[" + std::to_string(i) + "]", "must be > 0");
      }
    }
  }

  if (const json* e = find(j, "encoder")) {
    const std::string p = "encoder";
    check_keys(*e, p, {"hidden", "output_dim", "activation"});
    read_list(*e, "hidden", p, cfg.encoder.hidden, as_count);
    read(*e, "output_dim", p, cfg.encoder.output_dim);
    std::string act = to_string(cfg.encoder.activation);
    read(*e, "activation", p, act);
    validated("encoder.activation", [&] { cfg.encoder.activation = activation_from_string(act); });
    if (cfg.encoder.output_dim < 1) throw ConfigError("encoder.output_dim", "must be >= 1");
    for (std::size_t i = 0; i < cfg.encoder.hidden.size(); ++i) {
      if (cfg.encoder.hidden[i] < 1) {
        throw ConfigError("encoder.hidden[" + std::to_string(i) + "]", "must be >= 1");
      }
    }
  }

  if (const json* l = find(j, "local")) {
    const std::string p = "local";
    check_keys(*l, p, {"temperature", "batch_size", "lr", "augmentation"});
    read(*l, "temperature", p, cfg.local.temperature);
    read(*l, "batch_size", p, cfg.local.batch_size);
    read(*l, "lr", p, cfg.local.lr);
    if (const json* a = find(*l, "augmentation")) {
      parse_augmentation(*a, "local.augmentation", cfg.local.aug);
    }
    validated(p, [&] { cfg.local.validate(); });
  }

  if (const json* e = find(j, "esd")) {
    const std::string p = "esd";
    check_keys(*e, p, {"student_temperature", "target_temperature", "momentum", "anchor_capacity",
                       "batch_size", "epochs", "lr", "allow_temperature_mismatch"});
    read(*e, "student_temperature", p, cfg.esd.student_temperature);
    read(*e, "target_temperature", p, cfg.esd.target_temperature);
    read(*e, "momentum", p, cfg.esd.momentum);
    read(*e, "anchor_capacity", p, cfg.esd.anchor_capacity);
    read(*e, "batch_size", p, cfg.esd.batch_size);
    read(*e, "epochs", p, cfg.esd.epochs);
    read(*e, "lr", p, cfg.esd.lr);
    read(*e, "allow_temperature_mismatch", p, cfg.esd.allow_temperature_mismatch);
    validated(p, [&] { cfg.esd.validate(); });
  }

  if (const json* f = find(j, "federation")) {
    const std::string p = "federation";
    check_keys(*f, p, {"schemes", "rounds", "total_epochs", "sample_fraction", "prox_mu",
                       "resend_public_data"});
    read_list(*f, "schemes", p, cfg.federation.schemes, [](const json& v, const std::string& path) {
      if (!v.is_string()) throw ConfigError(path, "expected a scheme name");
      Scheme s{};
      validated(path, [&] { s = scheme_from_string(v.get<std::string>()); });
      return s;
    });
    read_list(*f, "rounds", p, cfg.federation.rounds, as_count);
    read(*f, "total_epochs", p, cfg.federation.total_epochs);
    read(*f, "sample_fraction", p, cfg.federation.sample_fraction);
    read(*f, "prox_mu", p, cfg.federation.prox_mu);
    read(*f, "resend_public_data", p, cfg.federation.resend_public_data);
  }
  if (cfg.federation.schemes.empty()) throw ConfigError("federation.schemes", "must not be empty");
  if (cfg.federation.rounds.empty()) throw ConfigError("federation.rounds", "must not be empty");
  if (cfg.federation.total_epochs < 1) throw ConfigError("federation.total_epochs", "must be >= 1");
  for (std::size_t i = 0; i < cfg.federation.rounds.size(); ++i) {
    const std::size_t t = cfg.federation.rounds[i];
    if (t < 1 || cfg.federation.total_epochs % t != 0) {
      throw ConfigError("federation.rounds[" + std::to_string(i) + "]",
                        "must be >= 1 and divide total_epochs (" +
                            std::to_string(cfg.federation.total_epochs) + ")");
    }
  }
  if (!(cfg.federation.sample_fraction > 0.0 && cfg.federation.sample_fraction <= 1.0)) {
    throw ConfigError("federation.sample_fraction", "must lie in (0, 1]");
  }
  if (cfg.federation.prox_mu < 0.0) throw ConfigError("federation.prox_mu", "must be >= 0");
  const bool needs_public = std::any_of(
      cfg.federation.schemes.begin(), cfg.federation.schemes.end(),
      [](Scheme s) { return s == Scheme::kFlesd || s == Scheme::kFlesdCc; });
  if (needs_public && !cfg.partition.public_shard) {
    throw ConfigError("partition.public_shard", "flesd schemes need a public shard");
  }

  if (const json* pr = find(j, "probe")) {
    const std::string p = "probe";
    check_keys(*pr, p, {"epochs", "lr", "batch_size", "train_fraction"});
    read(*pr, "epochs", p, cfg.probe.epochs);
    read(*pr, "lr", p, cfg.probe.lr);
    read(*pr, "batch_size", p, cfg.probe.batch_size);
    read(*pr, "train_fraction", p, cfg.probe.train_fraction);
    validated(p, [&] { cfg.probe.validate(); });
  }
  cfg.probe.seed = derive_seed({cfg.seed, tag(SeedTag::kProbe)});

  if (const json* o = find(j, "output")) {
    const std::string p = "output";
    check_keys(*o, p, {"dir", "wall_clock", "save_weights"});
    std::string dir = cfg.output.dir.string();
    read(*o, "dir", p, dir);
    cfg.output.dir = dir;
    read(*o, "wall_clock", p, cfg.output.wall_clock);
    read(*o, "save_weights", p, cfg.output.save_weights);
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("", "invalid JSON in " + path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

Dataset load_data(const ExperimentConfig& cfg) {
  if (cfg.data.kind == "csv") {
    if (!std::filesystem::exists(cfg.data.path)) {
      throw ConfigError("data.path", "dataset file not found: " + cfg.data.path.string());
    }
    return load_csv_dataset(cfg.data.path);
  }
  return synth_gaussian_blobs(cfg.data.num_classes, cfg.data.per_class, cfg.data.in_dim,
                              cfg.data.spread, derive_seed({cfg.seed, tag(SeedTag::kData)}));
}

namespace {

TrainTestSplit split_pool(const ExperimentConfig& cfg, const Dataset& ds) {
  return train_test_split(ds, cfg.probe.train_fraction, derive_seed({cfg.seed, tag(SeedTag::kSplit)}));
}

json report_for(double alpha, const Partition& p) {
  return json{{"alpha", alpha},
              {"mean_max_class_share", mean_max_class_share(p)},
              {"shards", partition_report(p)}};
}

struct Job {
  std::size_t alpha_index;
  Scheme scheme;
  std::size_t rounds;
};

}  // namespace

json partition_report(const ExperimentConfig& cfg) {
  const TrainTestSplit split = split_pool(cfg, load_data(cfg));
  json out = json::array();
  for (double alpha : cfg.partition.alphas) {
    out.push_back(report_for(alpha, dirichlet_partition(split.train, cfg.partition_config(alpha))));
  }
  return out;
}

ExperimentResult run_grid(const ExperimentConfig& cfg, std::size_t threads) {
  const Dataset data = load_data(cfg);
  const TrainTestSplit split = split_pool(cfg, data);
  const EncoderConfig encoder_cfg = cfg.encoder_config(data.in_dim());
  validated("encoder", [&] { encoder_cfg.validate(); });

  ExperimentResult result;
  result.partition_report = json::array();
  std::vector<Partition> partitions;
  for (double alpha : cfg.partition.alphas) {
    partitions.push_back(dirichlet_partition(split.train, cfg.partition_config(alpha)));
    result.partition_report.push_back(report_for(alpha, partitions.back()));
  }

  // min_local does not depend on T, so it runs once per alpha.
  std::vector<Job> jobs;
  for (std::size_t a = 0; a < partitions.size(); ++a) {
    for (Scheme s : cfg.federation.schemes) {
      if (s == Scheme::kFlesdCc || s == Scheme::kMinLocal) {
        jobs.push_back({a, s, 1});
      } else {
        for (std::size_t t : cfg.federation.rounds) jobs.push_back({a, s, t});
      }
    }
  }

  std::vector<CellResult> done(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t i) {
    const Job& job = jobs[i];
    const auto start = std::chrono::steady_clock::now();
    FederationConfig fc;
    fc.scheme = job.scheme;
    fc.rounds = job.rounds;
    fc.local_epochs = cfg.federation.total_epochs / job.rounds;
    fc.total_epochs = cfg.federation.total_epochs;
    fc.sample_fraction = cfg.federation.sample_fraction;
    fc.prox_mu = cfg.federation.prox_mu;
    fc.seed = cfg.seed;
    fc.resend_public_data = cfg.federation.resend_public_data;
    fc = fc.normalized();

    FederationResult fr =
        run_scheme(fc, partitions[job.alpha_index], encoder_cfg, cfg.local, cfg.esd);

    CellResult cell;
    cell.scheme = job.scheme;
    cell.alpha = cfg.partition.alphas[job.alpha_index];
    cell.rounds = fc.rounds;
    cell.local_epochs = fc.local_epochs;
    for (const auto& [id, params] : fr.client_models) {
      ProbeResult pr = linear_probe(params, split.train, split.test, cfg.probe);
      cell.client_probe_acc[id] = pr.accuracy;
    }
    cell.mean_local_probe_acc = mean_of(cell.client_probe_acc);
    if (fr.global) {
      ProbeResult pr = linear_probe(*fr.global, split.train, split.test, cfg.probe);
      cell.final_probe_acc = pr.accuracy;
      for (const auto& w : pr.warnings) cell.warnings.push_back("probe: " + w);
    } else {
      cell.final_probe_acc = cell.mean_local_probe_acc;
    }
    cell.round_records = std::move(fr.rounds);
    cell.ledger = std::move(fr.ledger);
    for (auto& w : fr.warnings) cell.warnings.push_back(std::move(w));
    cell.global = std::move(fr.global);
    cell.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    done[i] = std::move(cell);
  });

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (jobs[i].scheme == Scheme::kMinLocal) {
      for (std::size_t t : cfg.federation.rounds) {
        CellResult row = done[i];
        row.rounds = t;
        result.cells.push_back(std::move(row));
      }
    } else {
      result.cells.push_back(std::move(done[i]));
    }
  }
  return result;
}

std::string metrics_csv(const ExperimentResult& r, bool wall_clock) {
  std::ostringstream out;
  out << "scheme,alpha,T,E_local,final_probe_acc,mean_local_probe_acc,uplink_bytes,downlink_bytes,"
         "wall_seconds\n";
  for (const auto& c : r.cells) {
    out << to_string(c.scheme) << ',' << format_alpha(c.alpha) << ',' << c.rounds << ','
        << c.local_epochs << ',' << format_real(c.final_probe_acc) << ','
        << format_real(c.mean_local_probe_acc) << ',' << c.ledger.uplink() << ','
        << c.ledger.downlink() << ',' << format_real(wall_clock ? c.wall_seconds : 0.0) << '\n';
  }
  return out.str();
}

std::string ledger_csv(const ExperimentResult& r) {
  std::ostringstream out;
  out << "scheme,alpha,T,round,client_id,direction,payload_kind,bytes\n";
  for (const auto& c : r.cells) {
    for (const auto& rec : c.ledger.records()) {
      out << to_string(c.scheme) << ',' << format_alpha(c.alpha) << ',' << c.rounds << ','
          << rec.round << ',' << rec.client_id << ',' << to_string(rec.direction) << ','
          << to_string(rec.kind) << ',' << rec.bytes << '\n';
    }
  }
  return out.str();
}

json metrics_json(const ExperimentResult& r) {
  json cells = json::array();
  for (const auto& c : r.cells) {
    json rounds = json::array();
    for (const auto& rr : c.round_records) {
      rounds.push_back({{"round", rr.round},
                        {"sampled_clients", rr.sampled_clients},
                        {"mean_local_losses", rr.mean_local_losses},
                        {"distill_losses", rr.distill_losses}});
    }
    json clients = json::object();
    for (const auto& [id, acc] : c.client_probe_acc) clients[std::to_string(id)] = acc;
    cells.push_back({{"scheme", to_string(c.scheme)},
                     {"alpha", c.alpha},
                     {"T", c.rounds},
                     {"E_local", c.local_epochs},
                     {"final_probe_acc", c.final_probe_acc},
                     {"mean_local_probe_acc", c.mean_local_probe_acc},
                     {"client_probe_acc", clients},
                     {"rounds", rounds},
                     {"uplink_bytes", c.ledger.uplink()},
                     {"downlink_bytes", c.ledger.downlink()},
                     {"wall_seconds", c.wall_seconds},
                     {"warnings", c.warnings}});
  }
  return json{{"cells", cells}};
}

void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& r,
                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "metrics.csv", metrics_csv(r, cfg.output.wall_clock));
  write_file(dir / "ledger.csv", ledger_csv(r));
  write_file(dir / "metrics.json", metrics_json(r).dump(2) + "\n");
  write_file(dir / "partition_report.json", r.partition_report.dump(2) + "\n");
  if (cfg.output.save_weights) {
    std::filesystem::create_directories(dir / "weights");
    for (const auto& c : r.cells) {
      if (!c.global) continue;
      save_snapshot(*c.global, dir / "weights" /
                                   (to_string(c.scheme) + "_alpha" + format_alpha(c.alpha) +
                                    "_T" + std::to_string(c.rounds) + ".bin"));
    }
  }
}

std::size_t threads_from_env() {
  const char* v = std::getenv("SIM_THREADS");
  if (!v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  return (end != v && *end == '\0' && n > 0) ? static_cast<std::size_t>(n) : 1;
}

}  // namespace flesd
