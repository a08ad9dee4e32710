#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

namespace hierfl {

/// Labeled samples stored row-major. Features lie in [0, 1].
struct Dataset {
  std::size_t dim = 0;
  int num_classes = 0;
  std::vector<double> features;  // size() * dim
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * dim, dim};
  }
  // Throws StructuralError/DomainError if shapes or labels are inconsistent.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct SyntheticOptions {
  double cluster_radius = 3.0;  // distance of each class mean from the origin
  double noise_std = 1.0;       // per-coordinate std when isotropic
  // Ratio of largest to smallest noise std. Above 1 the noise is correlated:
  // stds spread geometrically from noise_std down to noise_std / condition
  // along a random orthonormal basis, so the nearest-mean direction is no
  // longer the best linear separator.
  double noise_condition = 1.0;
};

/// Gaussian mixture with one cluster per class, sharing one noise covariance. Class means are
/// drawn uniformly on a sphere of radius `cluster_radius`; features are then
/// min-max scaled per coordinate into [0, 1]. Samples are class-interleaved
/// (0, 1, ..., C-1, 0, 1, ...).
Dataset generate_synthetic(int num_classes, int dim, int samples_per_class,
                           std::uint64_t seed, const SyntheticOptions& opts = {});

/// Reads an MNIST IDX image/label file pair. Pixels are scaled to [0, 1].
Dataset load_mnist_idx(const std::filesystem::path& images_path,
                       const std::filesystem::path& labels_path,
                       std::optional<std::size_t> limit = std::nullopt);

/// Rows `indices` of `data`, in the given order.
Dataset subset(const Dataset& data, std::span<const std::size_t> indices);

/// Stratified split. Returns {train, test}; test takes
/// round(test_fraction * class_count) samples of every class.
std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double test_fraction,
                                             std::uint64_t seed);

// --- topology & partitioning ---

/// Client-edge hierarchy. Clients are indexed 0..N-1; each belongs to exactly
/// one edge.
struct Topology {
  std::size_t num_clients = 0;
  std::size_t num_edges = 0;
  std::vector<std::size_t> edge_of_client;
  std::vector<std::size_t> samples_per_client;  // |D_i|; empty until partitioned

  /// N clients split into L equal contiguous groups. Requires L | N.
  static Topology uniform(std::size_t num_clients, std::size_t num_edges);

  std::size_t clients_per_edge() const { return num_clients / num_edges; }
  std::vector<std::size_t> clients_of_edge(std::size_t edge) const;
  std::size_t edge_samples(std::size_t edge) const;  // |D^l|
  std::size_t total_samples() const;                 // |D|
  void validate() const;
};

enum class PartitionScheme { iid, simple_niid, edge_iid, edge_niid };

PartitionScheme parse_scheme(std::string_view name);
std::string_view to_string(PartitionScheme scheme);

struct Partition {
  std::vector<std::vector<std::size_t>> client_shards;  // sample indices
  std::vector<std::size_t> edge_of_client;
  std::size_t num_edges = 0;

  /// Topology carrying this partition's client->edge map and shard sizes.
  Topology topology() const;
  /// Disjointness and edge-map checks; throws StructuralError on violation.
  void validate(std::size_t dataset_size) const;
  /// Concatenation of all shards in client order.
  std::vector<std::size_t> all_indices() const;

  friend bool operator==(const Partition&, const Partition&) = default;
};

/// Splits `data` across the clients of `shape` (only N and L are read).
///
///  - iid:         shuffled, equal shards; clients keep contiguous edges.
///  - simple_niid: sorted by label, cut into 2N equal shards, two random
///                 shards per client; clients randomly assigned to edges.
///  - edge_iid:    one class per client; every edge holds one client of each
///                 class. Needs clients_per_edge == num_classes.
///  - edge_niid:   one class per client; every edge's clients span exactly
///                 ceil(num_classes / 2) classes.
///
/// Every client gets the same number of samples; leftovers are dropped.
/// Throws ConfigError if the scheme cannot be realized for this shape.
Partition partition(const Dataset& data, const Topology& shape, PartitionScheme scheme,
                    std::uint64_t seed);

/// Audit export. Format:
///   # hierfl-partition v1
///   samples <n> dim <d> classes <c> clients <N> edges <L>
///   index,label,edge,client
///   <one row per assigned sample, client-major>
void write_partition(std::ostream& out, const Dataset& data, const Partition& part);

}  // namespace hierfl
