#pragma once

// Reference implementations shared by the unit tests and the acceptance
// suite. They reuse the model gradients and numcore primitives but not the
// simulator's control flow.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "hierfl/datasets.hpp"
#include "hierfl/hierfavg.hpp"
#include "hierfl/models.hpp"
#include "hierfl/numcore.hpp"
#include "hierfl/rng.hpp"

namespace hierfl::oracle {

struct ReferenceFavg {
  std::vector<TraceRecord> records;
  WeightVector final_weights = WeightVector::zeros(1);
};

// Flat FAVG: per-client shuffled mini-batches without replacement (stream
// keyed by seed, client, epoch; a short tail is skipped), then a weighted
// average over every client every `period` updates.
inline ReferenceFavg reference_favg(const Dataset& data, const Partition& part,
                                    const ModelSpec& spec, long period, long total, double eta,
                                    std::size_t batch, std::uint64_t seed) {
  const std::size_t n = part.client_shards.size();
  std::vector<std::vector<std::size_t>> order(n);
  std::vector<std::size_t> cursor(n, 0);
  std::vector<std::uint64_t> epoch(n, 0);
  std::vector<double> sizes(n);
  for (std::size_t i = 0; i < n; ++i) {
    order[i] = part.client_shards[i];
    std::sort(order[i].begin(), order[i].end());
    Rng{seed, i, 0}.shuffle(order[i]);
    sizes[i] = static_cast<double>(order[i].size());
  }
  std::vector<std::size_t> all;
  for (const auto& s : part.client_shards) all.insert(all.end(), s.begin(), s.end());
  const Dataset eval = subset(data, all);

  const WeightVector w0 = initial_weights(spec, seed);
  std::vector<WeightVector> w(n, w0);
  ReferenceFavg out;
  for (long k = 1; k <= total; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      if (cursor[i] + batch > order[i].size()) {
        std::sort(order[i].begin(), order[i].end());
        Rng{seed, i, ++epoch[i]}.shuffle(order[i]);
        cursor[i] = 0;
      }
      const std::span<const std::size_t> b(order[i].data() + cursor[i], batch);
      cursor[i] += batch;
      w[i] = axpy(w[i], gradient(spec, w[i], data, b), eta);
    }
    if (k % period == 0) {
      const WeightVector avg = weighted_average(w, sizes);
      for (auto& x : w) x = avg;
      const WeightVector global = weighted_average(w, sizes);
      TraceRecord r;
      r.k = k;
      r.event = TraceEvent::cloud_agg;
      r.eta = eta;
      r.global_loss = loss(spec, global, data, all);
      r.grad_norm_sq = squared_norm(gradient(spec, global, data, all));
      r.test_accuracy = accuracy(spec, global, eval);
      r.deviation = std::numeric_limits<double>::quiet_NaN();
      out.records.push_back(r);
    }
  }
  out.final_weights = weighted_average(w, sizes);
  return out;
}

// Centralized full-batch gradient descent on the given rows; returns w(1..steps).
inline std::vector<WeightVector> centralized_gd(const Dataset& data,
                                                std::span<const std::size_t> rows,
                                                const ModelSpec& spec, WeightVector w, double eta,
                                                long steps) {
  std::vector<WeightVector> path;
  path.reserve(static_cast<std::size_t>(steps));
  for (long k = 0; k < steps; ++k) {
    w = axpy(w, gradient(spec, w, data, rows), eta);
    path.push_back(w);
  }
  return path;
}

}  // namespace hierfl::oracle
