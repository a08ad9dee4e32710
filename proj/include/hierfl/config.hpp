#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hierfl/bounds.hpp"
#include "hierfl/costmodel.hpp"
#include "hierfl/datasets.hpp"
#include "hierfl/hierfavg.hpp"
#include "hierfl/models.hpp"

namespace hierfl {

struct DatasetConfig {
  std::string source = "synthetic";  // synthetic | mnist
  int num_classes = 10;
  int dim = 20;
  int samples_per_class = 600;
  double cluster_radius = 3.0;
  double noise_std = 1.0;
  double noise_condition = 1.0;  // >1 gives correlated noise, see SyntheticOptions
  double test_fraction = 0.2;  // synthetic only
  std::string images;          // mnist training images
  std::string labels;
  std::string test_images;     // optional; otherwise a stratified split is held out
  std::string test_labels;
  std::optional<std::size_t> limit;
};

struct BoundsConfig {
  bool enabled = true;
  int probes = 8;  // random probes for smoothness/divergence, added to trajectory points
  HForm h_form = HForm::corrected;
};

/// Parameter grid for the `bounds` subcommand. K is B * kappa1 * kappa2 per point.
struct BoundsGridConfig {
  std::vector<long> kappa1 = {1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<long> kappa2 = {1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<double> eta = {0.01, 0.1};
  std::vector<double> delta = {0.0, 0.5, 1.0};
  std::vector<double> Delta = {0.0, 0.5, 1.0};
  double beta = 1.0;
  double rho = 1.0;
  double epsilon = 1.0;
  double omega = 1.0;
  long B = 10;
};

/// Cartesian grid for the `sweep` subcommand; empty lists inherit the base value.
struct SweepConfig {
  std::vector<long> kappa1;
  std::vector<long> kappa2;
  std::vector<double> eta;
  std::vector<std::string> scheme;
  unsigned jobs = 1;
};

/// Everything one experiment needs. Defaults follow the reference MNIST
/// setting: 50 clients, 5 edges, batch 20, eta 0.01 decaying by 0.995 per
/// epoch, with a synthetic 10-class dataset standing in for MNIST.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  DatasetConfig dataset;
  std::size_t num_clients = 50;
  std::size_t num_edges = 5;
  PartitionScheme scheme = PartitionScheme::edge_iid;
  ModelSpec model{ModelKind::logistic_regression, 0, 0, 32, 0.0};  // dims filled from data
  Schedule schedule{6, 10, 1200, StepPlan::exponential_decay(0.01, 0.995)};
  std::size_t batch_size = 20;
  UpdateMode mode = UpdateMode::minibatch_sgd;
  CostParams cost;
  AccountingOptions accounting;
  BoundsConfig bounds;
  BoundsGridConfig bounds_grid;
  SweepConfig sweep;
  std::vector<double> alphas = {0.85};
  unsigned threads = 1;
  std::string output_dir = "out";
};

/// Parses a config document. Unknown keys and type errors raise ConfigError
/// naming the offending field path (e.g. "schedule.kappa1").
ExperimentConfig config_from_json(const nlohmann::json& doc);
/// Fully resolved config, every default written out.
nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);

/// Reads a config file (or a run manifest, whose "config" member is used) and
/// applies "dotted.key=value" overrides; values parse as JSON, else as strings.
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides = {});

/// Cheap consistency checks that need no data: schedule divisibility,
/// topology shape, model and cost fields.
void validate_config(const ExperimentConfig& cfg);

}  // namespace hierfl
