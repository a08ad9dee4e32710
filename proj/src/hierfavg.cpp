#include "hierfl/hierfavg.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <thread>

#include "hierfl/errors.hpp"

namespace hierfl {

StepPlan StepPlan::fixed(double eta) {
  StepPlan p;
  p.kind = StepPlanKind::fixed;
  p.eta = eta;
  return p;
}

StepPlan StepPlan::exponential_decay(double eta0, double rate) {
  StepPlan p;
  p.kind = StepPlanKind::exponential_decay;
  p.eta = eta0;
  p.decay_rate = rate;
  return p;
}

StepPlan StepPlan::per_cloud_interval(std::vector<double> etas) {
  StepPlan p;
  p.kind = StepPlanKind::per_cloud_interval;
  p.interval_etas = std::move(etas);
  return p;
}

void Schedule::validate() const {
  if (kappa1 <= 0 || kappa2 <= 0) throw ConfigError("schedule: kappa1 and kappa2 must be positive");
  if (total_updates <= 0) throw ConfigError("schedule: K must be positive");
  if (total_updates % cloud_period() != 0) {
    throw ConfigError("schedule: K=" + std::to_string(total_updates) +
                      " is not a multiple of kappa1*kappa2=" + std::to_string(cloud_period()));
  }
  switch (step_plan.kind) {
    case StepPlanKind::fixed:
      if (!(step_plan.eta > 0.0)) throw ConfigError("schedule: eta must be positive");
      break;
    case StepPlanKind::exponential_decay:
      if (!(step_plan.eta > 0.0)) throw ConfigError("schedule: eta must be positive");
      if (!(step_plan.decay_rate > 0.0 && step_plan.decay_rate <= 1.0)) {
        throw ConfigError("schedule: decay rate must be in (0, 1]");
      }
      break;
    case StepPlanKind::per_cloud_interval:
      if (static_cast<long>(step_plan.interval_etas.size()) != num_cloud_intervals()) {
        throw ConfigError("schedule: per-interval step list has " +
                          std::to_string(step_plan.interval_etas.size()) + " entries, B=" +
                          std::to_string(num_cloud_intervals()));
      }
      for (double e : step_plan.interval_etas) {
        if (!(e > 0.0)) throw ConfigError("schedule: step sizes must be positive");
      }
      break;
  }
}

double Schedule::eta_at(long k, long steps_per_epoch) const {
  switch (step_plan.kind) {
    case StepPlanKind::fixed:
      return step_plan.eta;
    case StepPlanKind::exponential_decay: {
      const long epoch = (k - 1) / std::max(1L, steps_per_epoch);
      return step_plan.eta * std::pow(step_plan.decay_rate, static_cast<double>(epoch));
    }
    case StepPlanKind::per_cloud_interval:
      return step_plan.interval_etas.at(static_cast<std::size_t>(interval_of(k) - 1));
  }
  return step_plan.eta;
}

UpdateMode parse_update_mode(std::string_view name) {
  if (name == "minibatch_sgd") return UpdateMode::minibatch_sgd;
  if (name == "full_gradient") return UpdateMode::full_gradient;
  throw ConfigError("unknown mode '" + std::string(name) +
                    "' (expected minibatch_sgd or full_gradient)");
}

std::string_view to_string(UpdateMode mode) {
  return mode == UpdateMode::full_gradient ? "full_gradient" : "minibatch_sgd";
}

TraceEvent parse_trace_event(std::string_view name) {
  if (name == "local_step") return TraceEvent::local_step;
  if (name == "edge_agg") return TraceEvent::edge_agg;
  if (name == "cloud_agg") return TraceEvent::cloud_agg;
  throw FormatError("unknown trace event '" + std::string(name) + "'");
}

std::string_view to_string(TraceEvent event) {
  switch (event) {
    case TraceEvent::local_step: return "local_step";
    case TraceEvent::edge_agg: return "edge_agg";
    case TraceEvent::cloud_agg: return "cloud_agg";
  }
  return "?";
}

// --- ClientSampler ---

ClientSampler::ClientSampler(std::vector<std::size_t> shard, std::size_t batch_size,
                             std::uint64_t seed, std::size_t client)
    : order_(std::move(shard)), batch_size_(batch_size), seed_(seed), client_(client) {
  if (batch_size_ == 0) throw ConfigError("batch_size must be positive");
  if (order_.size() < batch_size_) {
    throw ConfigError("client " + std::to_string(client) + " holds " +
                      std::to_string(order_.size()) + " samples, fewer than batch_size " +
                      std::to_string(batch_size_));
  }
  reshuffle();
}

void ClientSampler::reshuffle() {
  std::sort(order_.begin(), order_.end());
  Rng rng{seed_, client_, static_cast<std::uint64_t>(epoch_)};
  rng.shuffle(order_);
  cursor_ = 0;
}

std::span<const std::size_t> ClientSampler::next_batch() {
  if (cursor_ + batch_size_ > order_.size()) {
    ++epoch_;
    reshuffle();
  }
  std::span<const std::size_t> out(order_.data() + cursor_, batch_size_);
  cursor_ += batch_size_;
  return out;
}

// --- VirtualCentralized ---

VirtualCentralized::VirtualCentralized(const ModelSpec& spec, const Dataset& data,
                                       std::vector<std::size_t> indices, WeightVector start)
    : spec_(spec), data_(data), indices_(std::move(indices)), u_(std::move(start)) {}

void VirtualCentralized::step(double eta) {
  u_ = axpy(u_, gradient(spec_, u_, data_, indices_), eta);
}

// --- run_hierfavg ---

namespace {

template <typename F>
void for_each_client(std::size_t n, unsigned threads, F&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(threads, n);
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += workers) fn(i);
    });
  }
}

}  // namespace

RunTrace run_hierfavg(const Dataset& data, const Partition& part, const ModelSpec& spec,
                      const Schedule& schedule, const RunOptions& options) {
  schedule.validate();
  spec.validate();
  part.validate(data.size());
  const Topology topo = part.topology();
  const std::size_t n_clients = topo.num_clients;
  for (std::size_t i = 0; i < n_clients; ++i) {
    if (topo.samples_per_client[i] == 0) {
      throw ConfigError("client " + std::to_string(i) + " has an empty shard");
    }
  }

  std::vector<double> client_sizes(topo.samples_per_client.begin(), topo.samples_per_client.end());
  std::vector<std::vector<std::size_t>> edge_clients(topo.num_edges);
  for (std::size_t e = 0; e < topo.num_edges; ++e) edge_clients[e] = topo.clients_of_edge(e);

  const WeightVector w0 = options.initial ? *options.initial : initial_weights(spec, options.seed);
  if (w0.dim() != spec.param_dim()) throw StructuralError("initial weights have wrong dimension");

  std::vector<ClientSampler> samplers;
  long steps_per_epoch = 1;
  if (options.mode == UpdateMode::minibatch_sgd) {
    steps_per_epoch = std::numeric_limits<long>::max();
    for (std::size_t i = 0; i < n_clients; ++i) {
      samplers.emplace_back(part.client_shards[i], options.batch_size, options.seed, i);
      steps_per_epoch = std::min(
          steps_per_epoch, static_cast<long>(part.client_shards[i].size() / options.batch_size));
    }
  }

  const std::vector<std::size_t> all_indices = part.all_indices();
  const Dataset* eval_set = options.eval_set;
  Dataset union_set;
  if (eval_set == nullptr) {
    union_set = subset(data, all_indices);
    eval_set = &union_set;
  }

  std::vector<WeightVector> clients(n_clients, w0);
  std::vector<std::optional<WeightVector>> edges(topo.num_edges);
  WeightVector global = w0;
  std::optional<VirtualCentralized> virt;
  if (options.track_virtual) virt.emplace(spec, data, all_indices, w0);

  RunTrace trace;
  trace.initial_weights = w0;
  trace.steps_per_epoch = steps_per_epoch;
  trace.total_updates = schedule.total_updates;

  for (long k = 1; k <= schedule.total_updates; ++k) {
    const double eta = schedule.eta_at(k, steps_per_epoch);

    for_each_client(n_clients, options.threads, [&](std::size_t i) {
      const WeightVector g =
          options.mode == UpdateMode::full_gradient
              ? gradient(spec, clients[i], data, part.client_shards[i])
              : gradient(spec, clients[i], data, samplers[i].next_batch());
      clients[i] = axpy(clients[i], g, eta);
    });
    if (virt) virt->step(eta);

    TraceEvent event = TraceEvent::local_step;
    const bool cloud_due = k % schedule.cloud_period() == 0;
    if (k % schedule.kappa1 == 0) {
      event = TraceEvent::edge_agg;
      for (std::size_t e = 0; e < topo.num_edges; ++e) {
        std::vector<WeightVector> members;
        std::vector<double> sizes;
        for (std::size_t i : edge_clients[e]) {
          members.push_back(clients[i]);
          sizes.push_back(client_sizes[i]);
        }
        edges[e] = weighted_average(members, sizes);
        if (!cloud_due) {
          for (std::size_t i : edge_clients[e]) clients[i] = *edges[e];
        }
      }
    }
    double deviation = std::numeric_limits<double>::quiet_NaN();
    if (cloud_due) {
      event = TraceEvent::cloud_agg;
      // Sum_l |D^l| w^l / |D| expanded over clients; same value as averaging
      // the edge models, with a single fixed reduction order.
      const WeightVector cloud = weighted_average(clients, client_sizes);
      for (auto& w : clients) w = cloud;
      global = cloud;
      // the record belongs to the restarted sequence, so this is exactly 0;
      // ||w(k) - u_q(k)|| before the restart is not kept
      if (virt) virt->reset(cloud);
    } else {
      global = weighted_average(clients, client_sizes);
    }
    if (virt) deviation = virt->deviation(global);

    if (options.observer) {
      RunState state;
      state.k = k;
      state.event = event;
      state.client_weights = clients;
      state.edge_weights = edges;
      state.global_weights = &global;
      state.virtual_weights = virt ? &virt->weights() : nullptr;
      options.observer(state);
    }

    if (event != TraceEvent::local_step || options.record_local_steps) {
      TraceRecord rec;
      rec.k = k;
      rec.event = event;
      rec.eta = eta;
      rec.global_loss = loss(spec, global, data, all_indices);
      rec.grad_norm_sq = squared_norm(gradient(spec, global, data, all_indices));
      rec.test_accuracy = accuracy(spec, global, *eval_set);
      rec.deviation = deviation;
      trace.records.push_back(rec);
      if (options.keep_checkpoints) trace.checkpoints.push_back(global);
    }
  }
  trace.final_weights = global;
  return trace;
}

Evaluation evaluate(const ModelSpec& spec, const WeightVector& w, const Dataset& test) {
  if (test.size() == 0) throw DomainError("evaluate: empty test set");
  return {loss(spec, w, test), accuracy(spec, w, test)};
}

}  // namespace hierfl
