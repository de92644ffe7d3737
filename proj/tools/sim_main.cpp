#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "flesd/dataset.hpp"
#include "flesd/encoder.hpp"
#include "flesd/error.hpp"
#include "flesd/experiment.hpp"
#include "flesd/federation.hpp"
#include "flesd/probe.hpp"
#include "flesd/rng.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeFailure = 1;
constexpr int kConfigError = 2;

int report_config_error(const flesd::ConfigError& e) {
  std::cerr << "config error: " << e.what() << '\n';
  return kConfigError;
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            const std::string& out_dir) {
  flesd::ExperimentConfig cfg = flesd::load_config(config_path);
  if (seed) {
    cfg.seed = *seed;
    cfg.probe.seed = flesd::derive_seed({cfg.seed, flesd::tag(flesd::SeedTag::kProbe)});
  }
  if (!out_dir.empty()) cfg.output.dir = out_dir;
  const flesd::ExperimentResult result = flesd::run_grid(cfg, flesd::threads_from_env());
  flesd::write_outputs(cfg, result, cfg.output.dir);
  for (const auto& cell : result.cells) {
    for (const auto& w : cell.warnings) {
      std::cerr << "warning [" << flesd::to_string(cell.scheme) << " alpha=" << cell.alpha
                << " T=" << cell.rounds << "]: " << w << '\n';
    }
  }
  std::cout << flesd::metrics_csv(result, cfg.output.wall_clock);
  std::cerr << "wrote " << cfg.output.dir.string() << '\n';
  return kOk;
}

int cmd_probe(const std::string& weights, const std::string& data, bool labels_last,
              std::uint64_t seed, const flesd::ProbeConfig& base) {
  if (!labels_last) {
    std::cerr << "error: only the labels-in-last-column layout is supported; pass "
                 "--labels-in-last-column\n";
    return kConfigError;
  }
  const flesd::EncoderParams encoder = flesd::load_snapshot(weights);
  const flesd::Dataset ds = flesd::load_csv_dataset(data);
  if (ds.in_dim() != encoder.config().input_dim()) {
    std::cerr << "error: dataset has " << ds.in_dim() << " features but the encoder expects "
              << encoder.config().input_dim() << '\n';
    return kConfigError;
  }
  flesd::ProbeConfig cfg = base;
  cfg.seed = flesd::derive_seed({seed, flesd::tag(flesd::SeedTag::kProbe)});
  const auto split = flesd::train_test_split(
      ds, cfg.train_fraction, flesd::derive_seed({seed, flesd::tag(flesd::SeedTag::kSplit)}));
  const flesd::ProbeResult r = flesd::linear_probe(encoder, split.train, split.test, cfg);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
  std::printf("accuracy %.6f\n", r.accuracy);
  return kOk;
}

int cmd_partition_report(const std::string& config_path) {
  const flesd::ExperimentConfig cfg = flesd::load_config(config_path);
  std::cout << flesd::partition_report(cfg).dump(2) << '\n';
  return kOk;
}

int cmd_comm_check(double n, double dim, double params, double omega, double omega_prime) {
  const flesd::CommCostCheck c = flesd::comm_cost_check(omega, omega_prime, n, dim, params);
  std::printf("lhs %.6g\nrhs %.6g\nflesd_cheaper %s\n", c.lhs, c.rhs,
              c.flesd_cheaper ? "true" : "false");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated ensemble similarity distillation simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "Run the experiment grid of a config file");
  run->add_option("--config", config_path, "JSON config")->required();
  run->add_option("--seed", seed, "Override the config seed");
  run->add_option("--out", out_dir, "Override output.dir");

  std::string weights;
  std::string data;
  bool labels_last = false;
  std::uint64_t probe_seed = 0;
  flesd::ProbeConfig probe_cfg;
  auto* probe = app.add_subcommand("probe", "Linear-probe an encoder snapshot on a CSV dataset");
  probe->add_option("--weights", weights, "Encoder snapshot")->required();
  probe->add_option("--data", data, "CSV with features then an integer label")->required();
  probe->add_flag("--labels-in-last-column", labels_last, "Label is the last CSV column");
  probe->add_option("--seed", probe_seed, "Split and probe seed");
  probe->add_option("--epochs", probe_cfg.epochs, "Probe epochs")->capture_default_str();
  probe->add_option("--lr", probe_cfg.lr, "Probe learning rate")->capture_default_str();
  probe->add_option("--train-fraction", probe_cfg.train_fraction, "Train share of the rows")
      ->capture_default_str();

  std::string report_config;
  auto* report = app.add_subcommand("partition-report", "Print per-shard class histograms");
  report->add_option("--config", report_config, "JSON config")->required();

  double n = 0, dim = 0, params = 0, omega = 1, omega_prime = 1;
  auto* comm = app.add_subcommand("comm-check", "Compare representation and weight upload cost");
  comm->add_option("--n", n, "Public set size N")->required();
  comm->add_option("--dim", dim, "Representation dimension d")->required();
  comm->add_option("--params", params, "Model parameter count")->required();
  comm->add_option("--omega", omega, "Bytes per representation entry")->capture_default_str();
  comm->add_option("--omega-prime", omega_prime, "Bytes per parameter")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(config_path, seed, out_dir);
    if (*probe) return cmd_probe(weights, data, labels_last, probe_seed, probe_cfg);
    if (*report) return cmd_partition_report(report_config);
    if (*comm) return cmd_comm_check(n, dim, params, omega, omega_prime);
  } catch (const flesd::ConfigError& e) {
    return report_config_error(e);
  } catch (const flesd::ParameterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return kOk;
}
