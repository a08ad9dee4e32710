#include "hierfl/divergence.hpp"

#include <algorithm>
#include <ostream>

#include "hierfl/errors.hpp"
#include "hierfl/hierfavg.hpp"

namespace hierfl {

DivergenceEstimate estimate_divergence(const Dataset& data, const Partition& part,
                                       const ModelSpec& spec,
                                       std::span<const WeightVector> probes) {
  if (probes.empty()) throw DomainError("estimate_divergence: empty probe set");
  part.validate(data.size());
  const Topology topo = part.topology();
  const std::size_t n = topo.num_clients;
  const std::vector<double> sizes(topo.samples_per_client.begin(), topo.samples_per_client.end());
  std::vector<std::vector<std::size_t>> edge_clients(topo.num_edges);
  for (std::size_t e = 0; e < topo.num_edges; ++e) edge_clients[e] = topo.clients_of_edge(e);

  DivergenceEstimate est;
  est.per_client.assign(n, 0.0);
  est.per_edge.assign(topo.num_edges, 0.0);
  est.probe_count = probes.size();

  for (const auto& w : probes) {
    std::vector<WeightVector> client_grads;
    client_grads.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      client_grads.push_back(gradient(spec, w, data, part.client_shards[i]));
    }
    const WeightVector global = weighted_average(client_grads, sizes);
    for (std::size_t e = 0; e < topo.num_edges; ++e) {
      std::vector<WeightVector> members;
      std::vector<double> member_sizes;
      for (std::size_t i : edge_clients[e]) {
        members.push_back(client_grads[i]);
        member_sizes.push_back(sizes[i]);
      }
      const WeightVector edge = weighted_average(members, member_sizes);
      est.per_edge[e] = std::max(est.per_edge[e], l2_distance(edge, global));
      for (std::size_t i : edge_clients[e]) {
        est.per_client[i] = std::max(est.per_client[i], l2_distance(client_grads[i], edge));
      }
    }
  }

  const double total = static_cast<double>(topo.total_samples());
  for (std::size_t i = 0; i < n; ++i) est.client_edge += sizes[i] * est.per_client[i];
  est.client_edge /= total;
  for (std::size_t e = 0; e < topo.num_edges; ++e) {
    est.edge_cloud += static_cast<double>(topo.edge_samples(e)) * est.per_edge[e];
  }
  est.edge_cloud /= total;
  return est;
}

DivergenceEstimate estimate_divergence(const Dataset& data, const Partition& part,
                                       const ModelSpec& spec, const WeightVector& center,
                                       int probes, std::uint64_t seed) {
  if (probes < 1) throw DomainError("estimate_divergence: probes must be positive");
  const auto points = random_probes(center, probes, seed);
  return estimate_divergence(data, part, spec, points);
}

void write_divergence(std::ostream& out, const DivergenceEstimate& est, const Partition& part) {
  out << "# hierfl-divergence v1 (empirical lower bounds of the definitional constants)\n";
  out << "probes " << est.probe_count << '\n';
  out << "client_edge " << format_double(est.client_edge) << '\n';
  out << "edge_cloud " << format_double(est.edge_cloud) << '\n';
  for (std::size_t i = 0; i < est.per_client.size(); ++i) {
    out << "client," << i << ',' << part.edge_of_client[i] << ','
        << format_double(est.per_client[i]) << '\n';
  }
  for (std::size_t e = 0; e < est.per_edge.size(); ++e) {
    out << "edge," << e << ',' << format_double(est.per_edge[e]) << '\n';
  }
}

}  // namespace hierfl
