#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "hierfl/datasets.hpp"
#include "hierfl/models.hpp"
#include "hierfl/numcore.hpp"
#include "hierfl/rng.hpp"

namespace hierfl {

enum class StepPlanKind { fixed, exponential_decay, per_cloud_interval };

/// How the step size evolves over local updates k = 1..K.
struct StepPlan {
  StepPlanKind kind = StepPlanKind::fixed;
  double eta = 0.01;                  // fixed value, or initial value for decay
  double decay_rate = 1.0;            // multiplier applied at each epoch boundary
  std::vector<double> interval_etas;  // eta_q for q = 1..B

  static StepPlan fixed(double eta);
  static StepPlan exponential_decay(double eta0, double rate);
  static StepPlan per_cloud_interval(std::vector<double> etas);
};

/// Aggregation periods and update budget: edges aggregate every kappa1 local
/// updates, the cloud every kappa1*kappa2. K must be a multiple of kappa1*kappa2.
struct Schedule {
  long kappa1 = 1;
  long kappa2 = 1;
  long total_updates = 1;  // K
  StepPlan step_plan;

  long cloud_period() const { return kappa1 * kappa2; }
  long num_cloud_intervals() const { return total_updates / cloud_period(); }  // B
  /// Cloud interval q (1-based) containing update k >= 1.
  long interval_of(long k) const { return (k + cloud_period() - 1) / cloud_period(); }
  /// Throws ConfigError when an invariant fails.
  void validate() const;
  /// Step size used by update k. `steps_per_epoch` drives the decay plan.
  double eta_at(long k, long steps_per_epoch) const;
};

enum class UpdateMode { minibatch_sgd, full_gradient };
enum class TraceEvent { local_step, edge_agg, cloud_agg };

UpdateMode parse_update_mode(std::string_view name);
std::string_view to_string(UpdateMode mode);
TraceEvent parse_trace_event(std::string_view name);
std::string_view to_string(TraceEvent event);

struct TraceRecord {
  long k = 0;
  TraceEvent event = TraceEvent::local_step;
  double global_loss = 0.0;    // F(w(k)) on the union of client shards
  double test_accuracy = 0.0;  // accuracy of w(k) on the evaluation set
  double deviation = 0.0;      // ||w(k) - u_q(k)||; NaN when not tracked
  double grad_norm_sq = 0.0;   // ||grad F(w(k))||^2
  double eta = 0.0;            // step size of update k

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct RunTrace {
  std::vector<TraceRecord> records;
  std::vector<WeightVector> checkpoints;  // w(k) per record, if requested
  std::optional<WeightVector> final_weights;
  WeightVector initial_weights = WeightVector::zeros(1);
  long steps_per_epoch = 1;
  long total_updates = 0;

  double epoch_of(long k) const {
    return static_cast<double>(k) / static_cast<double>(steps_per_epoch);
  }
};

/// Snapshot handed to RunOptions::observer after every local update.
struct RunState {
  long k = 0;
  TraceEvent event = TraceEvent::local_step;
  std::span<const WeightVector> client_weights;
  std::span<const std::optional<WeightVector>> edge_weights;  // set at edge aggregations
  const WeightVector* global_weights = nullptr;
  const WeightVector* virtual_weights = nullptr;  // null when not tracked; restarted at cloud events
};

struct RunOptions {
  std::size_t batch_size = 20;
  UpdateMode mode = UpdateMode::minibatch_sgd;
  std::uint64_t seed = 0;
  bool track_virtual = true;       // maintain u_q(k) and the deviation column
  bool record_local_steps = false;  // also emit a record after every local update
  bool keep_checkpoints = false;
  unsigned threads = 1;            // client updates run on this many threads
  const Dataset* eval_set = nullptr;  // defaults to the union of client shards
  std::optional<WeightVector> initial;  // defaults to initial_weights(spec, seed)
  std::function<void(const RunState&)> observer;
};

/// Mini-batch sampler for one client: sampling without replacement within an
/// epoch, reshuffled every epoch from the stream keyed (seed, client, epoch).
/// A tail shorter than batch_size is skipped.
class ClientSampler {
 public:
  ClientSampler(std::vector<std::size_t> shard, std::size_t batch_size, std::uint64_t seed,
                std::size_t client);
  std::span<const std::size_t> next_batch();
  long epoch() const { return epoch_; }

 private:
  void reshuffle();

  std::vector<std::size_t> order_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::size_t client_;
  long epoch_ = 0;
  std::size_t cursor_ = 0;
};

/// Centralized full-batch gradient descent restarted from w at every cloud
/// aggregation; the reference the distributed weights are compared against.
class VirtualCentralized {
 public:
  VirtualCentralized(const ModelSpec& spec, const Dataset& data,
                     std::vector<std::size_t> indices, WeightVector start);
  void reset(const WeightVector& w) { u_ = w; }
  void step(double eta);
  const WeightVector& weights() const { return u_; }
  double deviation(const WeightVector& w) const { return l2_distance(w, u_); }

 private:
  const ModelSpec& spec_;
  const Dataset& data_;
  std::vector<std::size_t> indices_;
  WeightVector u_;
};

/// Runs hierarchical federated averaging for schedule.total_updates local
/// updates. Clients step in parallel; every kappa1 updates each edge averages
/// its clients weighted by |D_i| and (unless a cloud aggregation is due)
/// sends the average back; every kappa1*kappa2 updates the cloud averages all
/// clients weighted by |D_i| and broadcasts. A record is emitted at every
/// aggregation. Deterministic in (inputs, seed) for any thread count.
RunTrace run_hierfavg(const Dataset& data, const Partition& part, const ModelSpec& spec,
                      const Schedule& schedule, const RunOptions& options);

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

Evaluation evaluate(const ModelSpec& spec, const WeightVector& w, const Dataset& test);

// --- trace CSV ---

inline constexpr std::string_view kTraceHeader =
    "k,event,global_loss,test_accuracy,deviation,grad_norm_sq,eta";

void write_trace_csv(std::ostream& out, const RunTrace& trace);
/// Parses and self-validates a trace CSV (header, column count, increasing k).
std::vector<TraceRecord> read_trace_csv(std::istream& in);

/// Shortest round-trip decimal for a double ("nan", "inf" for non-finite).
std::string format_double(double v);

}  // namespace hierfl
