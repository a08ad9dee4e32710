#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hierfl/config.hpp"
#include "hierfl/divergence.hpp"

namespace hierfl {

/// Dataset, partition and model resolved from a config.
struct PreparedExperiment {
  Dataset train;
  Dataset test;
  Partition part;
  ModelSpec spec;
};

/// Loads or generates data and partitions it. Fails with ConfigError when the
/// scheme cannot be realized, before any training happens.
PreparedExperiment prepare(const ExperimentConfig& cfg);

/// Constants for bound evaluation, estimated from random probes around w0
/// plus the given trajectory points.
struct EstimatedConstants {
  SmoothnessParams smoothness;
  DivergenceEstimate divergence;
};

EstimatedConstants estimate_constants(const PreparedExperiment& prep,
                                      std::span<const WeightVector> trajectory, int random_probes,
                                      std::uint64_t seed);

/// Artifact name -> sha256 of the file written under the output directory.
using ArtifactDigests = std::map<std::string, std::string>;

/// One HierFAVG run. Writes trace.csv, partition.csv, divergence.txt,
/// bounds.csv (deviation vs G_c per record), cost.csv, cost_summary.json and
/// manifest.json into `out_dir`.
ArtifactDigests run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// Grid over the sweep lists; one row per point in summary.csv, per-point
/// traces under points/. Failing points become rows with status "failed".
ArtifactDigests run_sweep(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

inline constexpr const char* kSweepHeader =
    "kappa1,kappa2,eta,scheme,status,final_accuracy,epochs_to_target,t_alpha,e_alpha,g_c_end,"
    "max_deviation";

/// Pure bound-grid evaluation into bounds_grid.csv.
ArtifactDigests run_bounds_grid(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

inline constexpr const char* kBoundsGridHeader =
    "kappa1,kappa2,eta,delta,Delta,beta,g_c_end,g_nc,theorem1,feasible";

/// Re-prices an existing trace CSV under the config's schedule and cost model.
ArtifactDigests run_cost(const ExperimentConfig& cfg, const std::filesystem::path& trace_csv,
                         const std::filesystem::path& out_dir);

/// Writes manifest.json: resolved config, its hash, seed, artifact digests.
void write_manifest(const ExperimentConfig& cfg, const std::string& command,
                    const ArtifactDigests& digests, const std::filesystem::path& out_dir);

/// Re-hashes the artifacts listed in a manifest. Returns mismatching names.
std::vector<std::string> verify_manifest(const std::filesystem::path& manifest_path);

}  // namespace hierfl
