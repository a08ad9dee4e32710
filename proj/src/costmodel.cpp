#include "hierfl/costmodel.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include <json.hpp>

#include "hierfl/errors.hpp"

namespace hierfl {

void CostParams::validate() const {
  const double fields[] = {cycles_per_bit, cpu_freq,     capacitance, tx_power,
                           noise_power,    bandwidth,    channel_gain, model_bits,
                           data_bits_per_iteration};
  for (double v : fields) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("cost: parameters must be positive and finite");
  }
  if (!(cloud_latency_multiplier >= 1.0)) {
    throw ConfigError("cost: cloud_latency_multiplier must be >= 1");
  }
}

UnitCosts unit_costs(const CostParams& p) {
  p.validate();
  UnitCosts u;
  const double cycles = p.cycles_per_bit * p.data_bits_per_iteration;
  u.t_comp = cycles / p.cpu_freq;
  u.e_comp = 0.5 * p.capacitance * cycles * p.cpu_freq * p.cpu_freq;
  const double rate = p.bandwidth * std::log2(1.0 + p.channel_gain * p.tx_power / p.noise_power);
  u.t_comm_edge = p.model_bits / rate;
  u.e_comm_edge = p.tx_power * u.t_comm_edge;
  u.t_comm_cloud = p.cloud_latency_multiplier * u.t_comm_edge;
  return u;
}

EnergyScope parse_energy_scope(std::string_view name) {
  if (name == "per_client") return EnergyScope::per_client;
  if (name == "fleet") return EnergyScope::fleet;
  throw ConfigError("unknown energy scope '" + std::string(name) + "' (expected per_client or fleet)");
}

CostReport accumulate(std::span<const TraceRecord> trace, const Schedule& schedule,
                      const CostParams& params, const AccountingOptions& options) {
  schedule.validate();
  const UnitCosts u = unit_costs(params);
  const double clients =
      options.scope == EnergyScope::fleet ? static_cast<double>(options.num_clients) : 1.0;
  const double cloud_hop_energy = options.charge_cloud_hop ? params.tx_power * u.t_comm_cloud : 0.0;
  const double k1 = static_cast<double>(schedule.kappa1);
  const double k2 = static_cast<double>(schedule.kappa2);

  CostReport report;
  report.per_round_latency = k1 * k2 * u.t_comp + k2 * u.t_comm_edge + u.t_comm_cloud;
  report.per_round_energy =
      clients * (k1 * k2 * u.e_comp + k2 * u.e_comm_edge + cloud_hop_energy);

  long prev_k = 0;
  double seconds = 0.0;
  double joules = 0.0;
  for (const auto& r : trace) {
    if (r.k < prev_k) throw FormatError("cost: trace is not ordered by k");
    const double steps = static_cast<double>(r.k - prev_k);
    const double edge_uploads =
        static_cast<double>(r.k / schedule.kappa1 - prev_k / schedule.kappa1);
    const double cloud_uploads =
        static_cast<double>(r.k / schedule.cloud_period() - prev_k / schedule.cloud_period());
    seconds += steps * u.t_comp + edge_uploads * u.t_comm_edge + cloud_uploads * u.t_comm_cloud;
    joules += clients * (steps * u.e_comp + edge_uploads * u.e_comm_edge +
                         cloud_uploads * cloud_hop_energy);
    report.points.push_back({r.k, seconds, joules, r.test_accuracy});
    prev_k = r.k;
  }
  return report;
}

AlphaCost CostReport::cost_to_reach(double alpha) const {
  AlphaCost out;
  out.alpha = alpha;
  for (const auto& p : points) {
    if (p.accuracy >= alpha) {
      out.reached = true;
      out.k = p.k;
      out.seconds = p.seconds;
      out.joules = p.joules;
      break;
    }
  }
  return out;
}

void write_cost_csv(std::ostream& out, const CostReport& report) {
  out << "k,cumulative_seconds,cumulative_joules,accuracy\n";
  for (const auto& p : report.points) {
    out << p.k << ',' << format_double(p.seconds) << ',' << format_double(p.joules) << ','
        << format_double(p.accuracy) << '\n';
  }
}

void write_cost_summary(std::ostream& out, const CostReport& report, const UnitCosts& units,
                        std::span<const double> alphas) {
  nlohmann::ordered_json j;
  j["unit_costs"] = {{"t_comp", units.t_comp},
                     {"e_comp", units.e_comp},
                     {"t_comm_edge", units.t_comm_edge},
                     {"e_comm_edge", units.e_comm_edge},
                     {"t_comm_cloud", units.t_comm_cloud}};
  j["per_round_latency"] = report.per_round_latency;
  j["per_round_energy"] = report.per_round_energy;
  j["targets"] = nlohmann::ordered_json::array();
  for (double a : alphas) {
    const AlphaCost c = report.cost_to_reach(a);
    nlohmann::ordered_json t;
    t["alpha"] = a;
    t["reached"] = c.reached;
    if (c.reached) {
      t["k"] = c.k;
      t["t_alpha"] = c.seconds;
      t["e_alpha"] = c.joules;
    }
    j["targets"].push_back(t);
  }
  out << j.dump(2) << '\n';
}

}  // namespace hierfl
