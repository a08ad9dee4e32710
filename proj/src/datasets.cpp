#include "hierfl/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>
#include <string>

#include "hierfl/errors.hpp"
#include "hierfl/rng.hpp"

namespace hierfl {

void Dataset::validate() const {
  if (dim == 0) throw StructuralError("dataset: feature dimension must be positive");
  if (num_classes <= 0) throw DomainError("dataset: num_classes must be positive");
  if (features.size() != labels.size() * dim) {
    throw StructuralError("dataset: feature buffer does not match sample count");
  }
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw DomainError("dataset: label out of range");
  }
}

Dataset generate_synthetic(int num_classes, int dim, int samples_per_class, std::uint64_t seed,
                           const SyntheticOptions& opts) {
  if (num_classes <= 0 || dim <= 0 || samples_per_class <= 0) {
    throw DomainError("generate_synthetic: all size arguments must be positive");
  }
  if (!(opts.cluster_radius >= 0.0) || !(opts.noise_std >= 0.0)) {
    throw DomainError("generate_synthetic: radius and noise must be nonnegative");
  }
  if (!(opts.noise_condition >= 1.0)) {
    throw DomainError("generate_synthetic: noise_condition must be >= 1");
  }
  const auto d = static_cast<std::size_t>(dim);
  const auto classes = static_cast<std::size_t>(num_classes);
  Rng rng{seed, 0x5eed};

  std::vector<double> means(classes * d);
  for (std::size_t c = 0; c < classes; ++c) {
    double norm = 0.0;
    while (norm < 1e-12) {
      norm = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        means[c * d + j] = rng.normal();
        norm += means[c * d + j] * means[c * d + j];
      }
      norm = std::sqrt(norm);
    }
    for (std::size_t j = 0; j < d; ++j) means[c * d + j] *= opts.cluster_radius / norm;
  }

  // Correlated noise: std noise_std * condition^(-j/(d-1)) along the rows of
  // a random orthonormal basis.
  const bool correlated = opts.noise_condition > 1.0 && d > 1;
  std::vector<double> basis;
  std::vector<double> scales(d, opts.noise_std);
  if (correlated) {
    basis.resize(d * d);
    for (std::size_t r = 0; r < d; ++r) {
      double norm = 0.0;
      while (norm < 1e-8) {
        for (std::size_t j = 0; j < d; ++j) basis[r * d + j] = rng.normal();
        for (std::size_t p = 0; p < r; ++p) {
          double dot = 0.0;
          for (std::size_t j = 0; j < d; ++j) dot += basis[r * d + j] * basis[p * d + j];
          for (std::size_t j = 0; j < d; ++j) basis[r * d + j] -= dot * basis[p * d + j];
        }
        norm = 0.0;
        for (std::size_t j = 0; j < d; ++j) norm += basis[r * d + j] * basis[r * d + j];
        norm = std::sqrt(norm);
      }
      for (std::size_t j = 0; j < d; ++j) basis[r * d + j] /= norm;
      scales[r] = opts.noise_std *
                  std::pow(opts.noise_condition, -static_cast<double>(r) / static_cast<double>(d - 1));
    }
  }

  Dataset out;
  out.dim = d;
  out.num_classes = num_classes;
  const std::size_t n = classes * static_cast<std::size_t>(samples_per_class);
  out.features.resize(n * d);
  out.labels.resize(n);
  std::vector<double> z(d);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % classes;
    out.labels[i] = static_cast<int>(c);
    double* x = &out.features[i * d];
    if (!correlated) {
      for (std::size_t j = 0; j < d; ++j) x[j] = means[c * d + j] + opts.noise_std * rng.normal();
      continue;
    }
    for (std::size_t r = 0; r < d; ++r) z[r] = scales[r] * rng.normal();
    for (std::size_t j = 0; j < d; ++j) {
      double v = means[c * d + j];
      for (std::size_t r = 0; r < d; ++r) v += z[r] * basis[r * d + j];
      x[j] = v;
    }
  }

  for (std::size_t j = 0; j < d; ++j) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < n; ++i) {
      lo = std::min(lo, out.features[i * d + j]);
      hi = std::max(hi, out.features[i * d + j]);
    }
    const double span = hi - lo;
    for (std::size_t i = 0; i < n; ++i) {
      double& x = out.features[i * d + j];
      x = span > 0.0 ? (x - lo) / span : 0.0;
    }
  }
  return out;
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open file");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset,
                        const std::filesystem::path& path) {
  if (buf.size() < offset + 4) throw FormatError(path.string() + ": truncated header");
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

}  // namespace

Dataset load_mnist_idx(const std::filesystem::path& images_path,
                       const std::filesystem::path& labels_path,
                       std::optional<std::size_t> limit) {
  constexpr std::uint32_t kImagesMagic = 0x00000803;
  constexpr std::uint32_t kLabelsMagic = 0x00000801;

  const auto images = read_file(images_path);
  const auto labels = read_file(labels_path);

  if (read_be32(images, 0, images_path) != kImagesMagic) {
    throw FormatError(images_path.string() + ": bad magic number (expected 0x00000803)");
  }
  if (read_be32(labels, 0, labels_path) != kLabelsMagic) {
    throw FormatError(labels_path.string() + ": bad magic number (expected 0x00000801)");
  }
  const std::size_t image_count = read_be32(images, 4, images_path);
  const std::size_t rows = read_be32(images, 8, images_path);
  const std::size_t cols = read_be32(images, 12, images_path);
  const std::size_t label_count = read_be32(labels, 4, labels_path);
  const std::size_t pixels = rows * cols;
  if (pixels == 0) throw FormatError(images_path.string() + ": zero-sized images");

  if (images.size() < 16 + image_count * pixels) {
    throw FormatError(images_path.string() + ": truncated file (header declares " +
                      std::to_string(image_count) + " images)");
  }
  if (labels.size() < 8 + label_count) {
    throw FormatError(labels_path.string() + ": truncated file (header declares " +
                      std::to_string(label_count) + " labels)");
  }
  if (label_count != image_count) {
    throw FormatError(labels_path.string() + ": holds " + std::to_string(label_count) +
                      " labels but " + images_path.string() + " holds " +
                      std::to_string(image_count) + " images");
  }

  const std::size_t n = limit ? std::min(*limit, image_count) : image_count;
  Dataset out;
  out.dim = pixels;
  out.num_classes = 10;
  out.features.resize(n * pixels);
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char y = labels[8 + i];
    if (y > 9) {
      throw FormatError(labels_path.string() + ": label " + std::to_string(y) + " at index " +
                        std::to_string(i) + " outside 0-9");
    }
    out.labels[i] = y;
    for (std::size_t j = 0; j < pixels; ++j) {
      out.features[i * pixels + j] = images[16 + i * pixels + j] / 255.0;
    }
  }
  return out;
}

Dataset subset(const Dataset& data, std::span<const std::size_t> indices) {
  Dataset out;
  out.dim = data.dim;
  out.num_classes = data.num_classes;
  out.features.reserve(indices.size() * data.dim);
  out.labels.reserve(indices.size());
  for (std::size_t idx : indices) {
    if (idx >= data.size()) throw DomainError("subset: index out of range");
    const auto r = data.row(idx);
    out.features.insert(out.features.end(), r.begin(), r.end());
    out.labels.push_back(data.labels[idx]);
  }
  return out;
}

namespace {

std::vector<std::vector<std::size_t>> indices_by_class(const Dataset& data) {
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(data.num_classes));
  for (std::size_t i = 0; i < data.size(); ++i) {
    by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
  }
  return by_class;
}

}  // namespace

std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double test_fraction,
                                             std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw DomainError("train_test_split: test_fraction must be in (0, 1)");
  }
  Rng rng{seed, 0x5b117};
  std::vector<std::size_t> train_idx, test_idx;
  for (auto& members : indices_by_class(data)) {
    rng.shuffle(members);
    const auto n_test = static_cast<std::size_t>(std::lround(test_fraction * members.size()));
    test_idx.insert(test_idx.end(), members.begin(), members.begin() + n_test);
    train_idx.insert(train_idx.end(), members.begin() + n_test, members.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {subset(data, train_idx), subset(data, test_idx)};
}

// --- Topology ---

Topology Topology::uniform(std::size_t num_clients, std::size_t num_edges) {
  if (num_clients == 0 || num_edges == 0) {
    throw ConfigError("topology: N and L must be positive");
  }
  if (num_clients % num_edges != 0) {
    throw ConfigError("topology: N=" + std::to_string(num_clients) +
                      " clients cannot be split evenly over L=" + std::to_string(num_edges) +
                      " edges");
  }
  Topology t;
  t.num_clients = num_clients;
  t.num_edges = num_edges;
  t.edge_of_client.resize(num_clients);
  const std::size_t per_edge = num_clients / num_edges;
  for (std::size_t i = 0; i < num_clients; ++i) t.edge_of_client[i] = i / per_edge;
  return t;
}

std::vector<std::size_t> Topology::clients_of_edge(std::size_t edge) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < num_clients; ++i) {
    if (edge_of_client[i] == edge) out.push_back(i);
  }
  return out;
}

std::size_t Topology::edge_samples(std::size_t edge) const {
  std::size_t s = 0;
  for (std::size_t i = 0; i < num_clients; ++i) {
    if (edge_of_client[i] == edge) s += samples_per_client.at(i);
  }
  return s;
}

std::size_t Topology::total_samples() const {
  return std::accumulate(samples_per_client.begin(), samples_per_client.end(), std::size_t{0});
}

void Topology::validate() const {
  if (num_clients == 0 || num_edges == 0) throw ConfigError("topology: N and L must be positive");
  if (edge_of_client.size() != num_clients) {
    throw StructuralError("topology: edge map size differs from N");
  }
  std::vector<std::size_t> count(num_edges, 0);
  for (std::size_t e : edge_of_client) {
    if (e >= num_edges) throw StructuralError("topology: client mapped to nonexistent edge");
    ++count[e];
  }
  for (std::size_t c : count) {
    if (c == 0) throw ConfigError("topology: an edge has no clients");
  }
  if (!samples_per_client.empty()) {
    if (samples_per_client.size() != num_clients) {
      throw StructuralError("topology: per-client sample counts size differs from N");
    }
    if (total_samples() == 0) throw ConfigError("topology: |D| must be positive");
  }
}

// --- partitioning ---

PartitionScheme parse_scheme(std::string_view name) {
  if (name == "iid") return PartitionScheme::iid;
  if (name == "simple_niid") return PartitionScheme::simple_niid;
  if (name == "edge_iid") return PartitionScheme::edge_iid;
  if (name == "edge_niid") return PartitionScheme::edge_niid;
  throw ConfigError("unknown partition scheme '" + std::string(name) +
                    "' (expected iid, simple_niid, edge_iid or edge_niid)");
}

std::string_view to_string(PartitionScheme scheme) {
  switch (scheme) {
    case PartitionScheme::iid: return "iid";
    case PartitionScheme::simple_niid: return "simple_niid";
    case PartitionScheme::edge_iid: return "edge_iid";
    case PartitionScheme::edge_niid: return "edge_niid";
  }
  return "?";
}

Topology Partition::topology() const {
  Topology t;
  t.num_clients = client_shards.size();
  t.num_edges = num_edges;
  t.edge_of_client = edge_of_client;
  t.samples_per_client.reserve(client_shards.size());
  for (const auto& s : client_shards) t.samples_per_client.push_back(s.size());
  t.validate();
  return t;
}

void Partition::validate(std::size_t dataset_size) const {
  if (edge_of_client.size() != client_shards.size()) {
    throw StructuralError("partition: edge map size differs from client count");
  }
  std::vector<char> seen(dataset_size, 0);
  for (const auto& shard : client_shards) {
    for (std::size_t idx : shard) {
      if (idx >= dataset_size) throw StructuralError("partition: sample index out of range");
      if (seen[idx]) throw StructuralError("partition: shards overlap");
      seen[idx] = 1;
    }
  }
  for (std::size_t e : edge_of_client) {
    if (e >= num_edges) throw StructuralError("partition: client mapped to nonexistent edge");
  }
}

std::vector<std::size_t> Partition::all_indices() const {
  std::vector<std::size_t> out;
  for (const auto& s : client_shards) out.insert(out.end(), s.begin(), s.end());
  return out;
}

namespace {

// Max-flow (Edmonds-Karp) on a dense capacity matrix; graphs here have at most
// a few dozen nodes.
long max_flow(std::vector<std::vector<long>>& cap, std::size_t source, std::size_t sink) {
  const std::size_t n = cap.size();
  long total = 0;
  for (;;) {
    std::vector<std::size_t> parent(n, n);
    parent[source] = source;
    std::queue<std::size_t> frontier;
    frontier.push(source);
    while (!frontier.empty() && parent[sink] == n) {
      const std::size_t u = frontier.front();
      frontier.pop();
      for (std::size_t v = 0; v < n; ++v) {
        if (parent[v] == n && cap[u][v] > 0) {
          parent[v] = u;
          frontier.push(v);
        }
      }
    }
    if (parent[sink] == n) return total;
    long push = std::numeric_limits<long>::max();
    for (std::size_t v = sink; v != source; v = parent[v]) push = std::min(push, cap[parent[v]][v]);
    for (std::size_t v = sink; v != source; v = parent[v]) {
      cap[parent[v]][v] -= push;
      cap[v][parent[v]] += push;
    }
    total += push;
  }
}

// Per-edge list of client classes for the one-class-per-client schemes.
std::vector<std::vector<std::size_t>> edge_class_slots(std::size_t num_edges,
                                                       std::size_t per_edge,
                                                       std::size_t classes,
                                                       std::size_t clients_per_class,
                                                       PartitionScheme scheme, Rng& rng) {
  std::vector<std::vector<std::size_t>> slots(num_edges);
  if (scheme == PartitionScheme::edge_iid) {
    if (per_edge != classes) {
      throw ConfigError("edge_iid needs clients_per_edge == num_classes (got " +
                        std::to_string(per_edge) + " clients per edge, " +
                        std::to_string(classes) + " classes)");
    }
    for (auto& s : slots) {
      s.resize(classes);
      std::iota(s.begin(), s.end(), std::size_t{0});
    }
    return slots;
  }

  // edge_niid: edge l covers a cyclic window of ceil(C/2) classes starting at
  // floor(l*C/L) in a random relabeling; client counts per (edge, class) come
  // from a flow that gives every covered class at least one client.
  const std::size_t span = (classes + 1) / 2;
  if (per_edge < span) {
    throw ConfigError("edge_niid needs at least ceil(num_classes/2)=" + std::to_string(span) +
                      " clients per edge (got " + std::to_string(per_edge) + ")");
  }
  std::vector<std::size_t> relabel(classes);
  std::iota(relabel.begin(), relabel.end(), std::size_t{0});
  rng.shuffle(relabel);

  std::vector<std::vector<std::size_t>> covered(num_edges);
  std::vector<std::size_t> coverage(classes, 0);
  for (std::size_t e = 0; e < num_edges; ++e) {
    const std::size_t start = e * classes / num_edges;
    for (std::size_t j = 0; j < span; ++j) {
      const std::size_t c = relabel[(start + j) % classes];
      covered[e].push_back(c);
      ++coverage[c];
    }
  }
  for (std::size_t c = 0; c < classes; ++c) {
    if (coverage[c] == 0 || coverage[c] > clients_per_class) {
      throw ConfigError("edge_niid infeasible: " + std::to_string(num_edges) + " edges x " +
                        std::to_string(span) + " classes cannot cover " +
                        std::to_string(classes) + " classes with " +
                        std::to_string(clients_per_class) + " clients per class");
    }
  }

  const std::size_t source = 0, first_edge = 1, first_class = 1 + num_edges,
                    sink = 1 + num_edges + classes;
  std::vector<std::vector<long>> cap(sink + 1, std::vector<long>(sink + 1, 0));
  long needed = 0;
  for (std::size_t e = 0; e < num_edges; ++e) {
    cap[source][first_edge + e] = static_cast<long>(per_edge - span);
    for (std::size_t c : covered[e]) cap[first_edge + e][first_class + c] = static_cast<long>(per_edge);
  }
  for (std::size_t c = 0; c < classes; ++c) {
    cap[first_class + c][sink] = static_cast<long>(clients_per_class - coverage[c]);
    needed += cap[first_class + c][sink];
  }
  const auto original = cap;
  if (max_flow(cap, source, sink) != needed) {
    throw ConfigError("edge_niid infeasible: cannot balance clients per class across edges");
  }
  for (std::size_t e = 0; e < num_edges; ++e) {
    for (std::size_t c : covered[e]) {
      const long extra = original[first_edge + e][first_class + c] - cap[first_edge + e][first_class + c];
      slots[e].insert(slots[e].end(), static_cast<std::size_t>(1 + extra), c);
    }
    std::sort(slots[e].begin(), slots[e].end());
  }
  return slots;
}

Partition partition_by_class(const Dataset& data, const Topology& shape, PartitionScheme scheme,
                             Rng& rng) {
  const std::size_t classes = static_cast<std::size_t>(data.num_classes);
  const std::size_t n_clients = shape.num_clients;
  if (n_clients % classes != 0) {
    throw ConfigError(std::string(to_string(scheme)) + " needs N divisible by num_classes (N=" +
                      std::to_string(n_clients) + ", classes=" + std::to_string(classes) + ")");
  }
  const std::size_t per_class = n_clients / classes;
  const std::size_t per_edge = shape.clients_per_edge();

  auto by_class = indices_by_class(data);
  std::size_t shard = std::numeric_limits<std::size_t>::max();
  for (auto& members : by_class) {
    rng.shuffle(members);
    shard = std::min(shard, members.size() / per_class);
  }
  if (shard == 0) throw ConfigError("partition: not enough samples per class for one shard each");

  const auto slots = edge_class_slots(shape.num_edges, per_edge, classes, per_class, scheme, rng);

  Partition out;
  out.num_edges = shape.num_edges;
  std::vector<std::size_t> next_chunk(classes, 0);
  for (std::size_t e = 0; e < shape.num_edges; ++e) {
    std::vector<std::size_t> order = slots[e];
    rng.shuffle(order);
    for (std::size_t c : order) {
      const std::size_t chunk = next_chunk[c]++;
      std::vector<std::size_t> s(by_class[c].begin() + static_cast<std::ptrdiff_t>(chunk * shard),
                                 by_class[c].begin() + static_cast<std::ptrdiff_t>((chunk + 1) * shard));
      std::sort(s.begin(), s.end());
      out.client_shards.push_back(std::move(s));
      out.edge_of_client.push_back(e);
    }
  }
  return out;
}

}  // namespace

Partition partition(const Dataset& data, const Topology& shape, PartitionScheme scheme,
                    std::uint64_t seed) {
  data.validate();
  if (shape.num_clients == 0 || shape.num_edges == 0 ||
      shape.num_clients % shape.num_edges != 0) {
    throw ConfigError("partition: N must be a positive multiple of L");
  }
  Rng rng{seed, 0xd15717, static_cast<std::uint64_t>(scheme)};
  const std::size_t n_clients = shape.num_clients;
  const std::size_t per_edge = shape.clients_per_edge();

  Partition out;
  switch (scheme) {
    case PartitionScheme::iid: {
      std::vector<std::size_t> idx(data.size());
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      rng.shuffle(idx);
      const std::size_t shard = data.size() / n_clients;
      if (shard == 0) throw ConfigError("iid: fewer samples than clients");
      out.num_edges = shape.num_edges;
      for (std::size_t i = 0; i < n_clients; ++i) {
        std::vector<std::size_t> s(idx.begin() + static_cast<std::ptrdiff_t>(i * shard),
                                   idx.begin() + static_cast<std::ptrdiff_t>((i + 1) * shard));
        std::sort(s.begin(), s.end());
        out.client_shards.push_back(std::move(s));
        out.edge_of_client.push_back(i / per_edge);
      }
      break;
    }
    case PartitionScheme::simple_niid: {
      std::vector<std::size_t> idx(data.size());
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return data.labels[a] < data.labels[b];
      });
      const std::size_t shard = data.size() / (2 * n_clients);
      if (shard == 0) {
        throw ConfigError("simple_niid: need at least 2N=" + std::to_string(2 * n_clients) +
                          " samples to deal two shards per client");
      }
      std::vector<std::size_t> shard_order(2 * n_clients);
      std::iota(shard_order.begin(), shard_order.end(), std::size_t{0});
      rng.shuffle(shard_order);
      std::vector<std::size_t> client_slot(n_clients);
      std::iota(client_slot.begin(), client_slot.end(), std::size_t{0});
      rng.shuffle(client_slot);
      out.num_edges = shape.num_edges;
      for (std::size_t i = 0; i < n_clients; ++i) {
        std::vector<std::size_t> s;
        for (std::size_t k : {shard_order[2 * i], shard_order[2 * i + 1]}) {
          s.insert(s.end(), idx.begin() + static_cast<std::ptrdiff_t>(k * shard),
                   idx.begin() + static_cast<std::ptrdiff_t>((k + 1) * shard));
        }
        std::sort(s.begin(), s.end());
        out.client_shards.push_back(std::move(s));
        out.edge_of_client.push_back(client_slot[i] / per_edge);
      }
      break;
    }
    case PartitionScheme::edge_iid:
    case PartitionScheme::edge_niid:
      out = partition_by_class(data, shape, scheme, rng);
      break;
  }
  out.validate(data.size());
  return out;
}

void write_partition(std::ostream& out, const Dataset& data, const Partition& part) {
  out << "# hierfl-partition v1\n";
  out << "samples " << part.all_indices().size() << " dim " << data.dim << " classes "
      << data.num_classes << " clients " << part.client_shards.size() << " edges "
      << part.num_edges << "\n";
  out << "index,label,edge,client\n";
  for (std::size_t i = 0; i < part.client_shards.size(); ++i) {
    for (std::size_t idx : part.client_shards[i]) {
      out << idx << ',' << data.labels[idx] << ',' << part.edge_of_client[i] << ',' << i << '\n';
    }
  }
}

}  // namespace hierfl
