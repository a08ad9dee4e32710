#pragma once

#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "hierfl/hierfavg.hpp"

namespace hierfl {

/// Wireless upload and local computation constants. Defaults are the MNIST
/// setting: 20 cycles/bit, 1 GHz, capacitance 2e-28, 0.5 W transmit power,
/// 1e-10 W noise, 1 MHz bandwidth, channel gain 1e-8, a 21840-parameter
/// float32 model, 1.2e6 bits of data per local iteration, cloud uploads 10x
/// slower than edge uploads.
struct CostParams {
  double cycles_per_bit = 20.0;
  double cpu_freq = 1e9;
  double capacitance = 2e-28;
  double tx_power = 0.5;
  double noise_power = 1e-10;
  double bandwidth = 1e6;
  double channel_gain = 1e-8;
  double model_bits = 21840.0 * 32.0;
  double data_bits_per_iteration = 1.2e6;
  double cloud_latency_multiplier = 10.0;

  void validate() const;
};

struct UnitCosts {
  double t_comp = 0.0;        // c D / f
  double e_comp = 0.0;        // (alpha/2) c D f^2
  double t_comm_edge = 0.0;   // M / (B log2(1 + g p / sigma))
  double e_comm_edge = 0.0;   // p T_comm
  double t_comm_cloud = 0.0;  // multiplier * T_comm
};

UnitCosts unit_costs(const CostParams& params);

/// per_client: one client's energy. fleet: summed over all N clients.
enum class EnergyScope { per_client, fleet };

EnergyScope parse_energy_scope(std::string_view name);

struct AccountingOptions {
  EnergyScope scope = EnergyScope::per_client;
  std::size_t num_clients = 1;     // used by the fleet scope
  bool charge_cloud_hop = false;   // also bill clients p * T_cloud per cloud round
};

struct CostPoint {
  long k = 0;
  double seconds = 0.0;  // cumulative wall clock
  double joules = 0.0;   // cumulative energy under the chosen scope
  double accuracy = 0.0;
};

struct AlphaCost {
  double alpha = 0.0;
  bool reached = false;
  long k = 0;
  double seconds = 0.0;  // T_alpha
  double joules = 0.0;   // E_alpha
};

/// Cumulative time/energy at every trace record.
///
/// Clients compute in parallel, so wall clock per cloud round is
/// k1 k2 T_comp + k2 T_comm_edge + T_comm_cloud. Clients pay for their local
/// iterations and client->edge uploads; the edge->cloud hop costs time only
/// unless charge_cloud_hop is set. Downloads are free.
struct CostReport {
  std::vector<CostPoint> points;
  double per_round_latency = 0.0;
  double per_round_energy = 0.0;

  /// First record with accuracy >= alpha; not reached if none.
  AlphaCost cost_to_reach(double alpha) const;
};

CostReport accumulate(std::span<const TraceRecord> trace, const Schedule& schedule,
                      const CostParams& params, const AccountingOptions& options = {});

/// CSV with header k,cumulative_seconds,cumulative_joules,accuracy
void write_cost_csv(std::ostream& out, const CostReport& report);

/// JSON summary: unit costs, per-round costs and T/E per requested alpha.
void write_cost_summary(std::ostream& out, const CostReport& report, const UnitCosts& units,
                        std::span<const double> alphas);

}  // namespace hierfl
