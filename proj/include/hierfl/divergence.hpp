#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "hierfl/datasets.hpp"
#include "hierfl/models.hpp"
#include "hierfl/numcore.hpp"

namespace hierfl {

/// Empirical gradient divergences. The definitional constants are suprema
/// over all w; these are maxima over a finite probe set, hence lower bounds.
struct DivergenceEstimate {
  std::vector<double> per_client;  // delta_i: max ||grad F_i - grad F^l(i)||
  std::vector<double> per_edge;    // Delta_l: max ||grad F^l - grad F||
  double client_edge = 0.0;        // delta = Sum_i |D_i| delta_i / |D|
  double edge_cloud = 0.0;         // Delta = Sum_l |D^l| Delta_l / |D|
  std::size_t probe_count = 0;
};

/// Evaluates full-batch client, edge and global gradients at every probe
/// point and keeps the running maxima.
DivergenceEstimate estimate_divergence(const Dataset& data, const Partition& part,
                                       const ModelSpec& spec,
                                       std::span<const WeightVector> probes);

/// Random probe set: random_probes(center, probes, seed).
DivergenceEstimate estimate_divergence(const Dataset& data, const Partition& part,
                                       const ModelSpec& spec, const WeightVector& center,
                                       int probes, std::uint64_t seed);

/// Plain-text report:
///   # hierfl-divergence v1 (empirical lower bounds of the definitional constants)
///   probes <n>
///   client_edge <delta>
///   edge_cloud <Delta>
///   client,<i>,<edge>,<delta_i>   (one line per client)
///   edge,<l>,<Delta_l>            (one line per edge)
void write_divergence(std::ostream& out, const DivergenceEstimate& est, const Partition& part);

}  // namespace hierfl
