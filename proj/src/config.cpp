#include "hierfl/config.hpp"

#include <fstream>
#include <set>

#include "hierfl/errors.hpp"

namespace hierfl {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Reads members of one JSON object, remembering which keys were consumed so
// leftovers can be reported as unknown fields.
class Section {
 public:
  Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end() || it->is_null()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw ConfigError(field(key) + ": wrong type (" + std::string(it->type_name()) + ")");
    }
  }

  template <typename T>
  void read(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end() || it->is_null()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw ConfigError(field(key) + ": wrong type (" + std::string(it->type_name()) + ")");
    }
  }

  template <typename Parse>
  void read_enum(const char* key, Parse parse) {
    std::string name;
    read(key, name);
    if (name.empty()) return;
    try {
      parse(name);
    } catch (const ConfigError& e) {
      throw ConfigError(field(key) + ": " + e.what());
    }
  }

  Section child(const char* key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    static const json kEmpty = json::object();
    return Section(it == obj_.end() || it->is_null() ? kEmpty : *it, field(key));
  }

  void finish() const {
    for (const auto& [k, v] : obj_.items()) {
      if (!seen_.count(k)) throw ConfigError(field(k.c_str()) + ": unknown field");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }
  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

HForm parse_h_form(const std::string& s) {
  if (s == "corrected") return HForm::corrected;
  if (s == "as_printed") return HForm::as_printed;
  throw ConfigError("unknown h_form '" + s + "' (expected corrected or as_printed)");
}

StepPlanKind parse_plan(const std::string& s) {
  if (s == "fixed") return StepPlanKind::fixed;
  if (s == "exponential_decay") return StepPlanKind::exponential_decay;
  if (s == "per_cloud_interval") return StepPlanKind::per_cloud_interval;
  throw ConfigError("unknown step_plan '" + s +
                    "' (expected fixed, exponential_decay or per_cloud_interval)");
}

const char* plan_name(StepPlanKind k) {
  switch (k) {
    case StepPlanKind::fixed: return "fixed";
    case StepPlanKind::exponential_decay: return "exponential_decay";
    case StepPlanKind::per_cloud_interval: return "per_cloud_interval";
  }
  return "?";
}

}  // namespace

ExperimentConfig config_from_json(const json& doc) {
  ExperimentConfig cfg;
  Section root(doc, "");
  root.read("seed", cfg.seed);
  root.read("threads", cfg.threads);
  root.read("output_dir", cfg.output_dir);
  root.read("alphas", cfg.alphas);

  {
    Section s = root.child("dataset");
    auto& d = cfg.dataset;
    s.read("source", d.source);
    s.read("num_classes", d.num_classes);
    s.read("dim", d.dim);
    s.read("samples_per_class", d.samples_per_class);
    s.read("cluster_radius", d.cluster_radius);
    s.read("noise_std", d.noise_std);
    s.read("noise_condition", d.noise_condition);
    s.read("test_fraction", d.test_fraction);
    s.read("images", d.images);
    s.read("labels", d.labels);
    s.read("test_images", d.test_images);
    s.read("test_labels", d.test_labels);
    s.read("limit", d.limit);
    if (d.source != "synthetic" && d.source != "mnist") {
      throw ConfigError("dataset.source: expected synthetic or mnist, got '" + d.source + "'");
    }
    s.finish();
  }
  {
    Section s = root.child("topology");
    s.read("num_clients", cfg.num_clients);
    s.read("num_edges", cfg.num_edges);
    s.finish();
  }
  {
    Section s = root.child("partition");
    s.read_enum("scheme", [&](const std::string& n) { cfg.scheme = parse_scheme(n); });
    s.finish();
  }
  {
    Section s = root.child("model");
    s.read_enum("kind", [&](const std::string& n) { cfg.model.kind = parse_model_kind(n); });
    s.read("hidden_dim", cfg.model.hidden_dim);
    s.read("l2_reg", cfg.model.l2_reg);
    s.finish();
  }
  {
    Section s = root.child("schedule");
    auto& sch = cfg.schedule;
    s.read("kappa1", sch.kappa1);
    s.read("kappa2", sch.kappa2);
    s.read("total_updates", sch.total_updates);
    s.read_enum("step_plan", [&](const std::string& n) { sch.step_plan.kind = parse_plan(n); });
    s.read("eta", sch.step_plan.eta);
    s.read("decay", sch.step_plan.decay_rate);
    s.read("interval_etas", sch.step_plan.interval_etas);
    s.read("batch_size", cfg.batch_size);
    s.read_enum("mode", [&](const std::string& n) { cfg.mode = parse_update_mode(n); });
    s.finish();
  }
  {
    Section s = root.child("cost");
    auto& c = cfg.cost;
    s.read("cycles_per_bit", c.cycles_per_bit);
    s.read("cpu_freq", c.cpu_freq);
    s.read("capacitance", c.capacitance);
    s.read("tx_power", c.tx_power);
    s.read("noise_power", c.noise_power);
    s.read("bandwidth", c.bandwidth);
    s.read("channel_gain", c.channel_gain);
    s.read("model_bits", c.model_bits);
    s.read("data_bits_per_iteration", c.data_bits_per_iteration);
    s.read("cloud_latency_multiplier", c.cloud_latency_multiplier);
    s.read_enum("energy_scope",
                [&](const std::string& n) { cfg.accounting.scope = parse_energy_scope(n); });
    s.read("charge_cloud_hop", cfg.accounting.charge_cloud_hop);
    s.finish();
  }
  {
    Section s = root.child("bounds");
    s.read("enabled", cfg.bounds.enabled);
    s.read("probes", cfg.bounds.probes);
    s.read_enum("h_form", [&](const std::string& n) { cfg.bounds.h_form = parse_h_form(n); });
    s.finish();
  }
  {
    Section s = root.child("bounds_grid");
    auto& g = cfg.bounds_grid;
    s.read("kappa1", g.kappa1);
    s.read("kappa2", g.kappa2);
    s.read("eta", g.eta);
    s.read("delta", g.delta);
    s.read("Delta", g.Delta);
    s.read("beta", g.beta);
    s.read("rho", g.rho);
    s.read("epsilon", g.epsilon);
    s.read("omega", g.omega);
    s.read("B", g.B);
    s.finish();
  }
  {
    Section s = root.child("sweep");
    s.read("kappa1", cfg.sweep.kappa1);
    s.read("kappa2", cfg.sweep.kappa2);
    s.read("eta", cfg.sweep.eta);
    s.read("scheme", cfg.sweep.scheme);
    s.read("jobs", cfg.sweep.jobs);
    s.finish();
  }
  root.finish();
  return cfg;
}

ordered_json config_to_json(const ExperimentConfig& cfg) {
  ordered_json j;
  j["seed"] = cfg.seed;
  const auto& d = cfg.dataset;
  j["dataset"] = {{"source", d.source},
                  {"num_classes", d.num_classes},
                  {"dim", d.dim},
                  {"samples_per_class", d.samples_per_class},
                  {"cluster_radius", d.cluster_radius},
                  {"noise_std", d.noise_std},
                  {"noise_condition", d.noise_condition},
                  {"test_fraction", d.test_fraction},
                  {"images", d.images},
                  {"labels", d.labels},
                  {"test_images", d.test_images},
                  {"test_labels", d.test_labels},
                  {"limit", d.limit ? ordered_json(*d.limit) : ordered_json(nullptr)}};
  j["topology"] = {{"num_clients", cfg.num_clients}, {"num_edges", cfg.num_edges}};
  j["partition"] = {{"scheme", std::string(to_string(cfg.scheme))}};
  j["model"] = {{"kind", std::string(to_string(cfg.model.kind))},
                {"hidden_dim", cfg.model.hidden_dim},
                {"l2_reg", cfg.model.l2_reg}};
  const auto& s = cfg.schedule;
  j["schedule"] = {{"kappa1", s.kappa1},
                   {"kappa2", s.kappa2},
                   {"total_updates", s.total_updates},
                   {"step_plan", plan_name(s.step_plan.kind)},
                   {"eta", s.step_plan.eta},
                   {"decay", s.step_plan.decay_rate},
                   {"interval_etas", s.step_plan.interval_etas},
                   {"batch_size", cfg.batch_size},
                   {"mode", std::string(to_string(cfg.mode))}};
  const auto& c = cfg.cost;
  j["cost"] = {{"cycles_per_bit", c.cycles_per_bit},
               {"cpu_freq", c.cpu_freq},
               {"capacitance", c.capacitance},
               {"tx_power", c.tx_power},
               {"noise_power", c.noise_power},
               {"bandwidth", c.bandwidth},
               {"channel_gain", c.channel_gain},
               {"model_bits", c.model_bits},
               {"data_bits_per_iteration", c.data_bits_per_iteration},
               {"cloud_latency_multiplier", c.cloud_latency_multiplier},
               {"energy_scope", cfg.accounting.scope == EnergyScope::fleet ? "fleet" : "per_client"},
               {"charge_cloud_hop", cfg.accounting.charge_cloud_hop}};
  j["bounds"] = {{"enabled", cfg.bounds.enabled},
                 {"probes", cfg.bounds.probes},
                 {"h_form", cfg.bounds.h_form == HForm::corrected ? "corrected" : "as_printed"}};
  const auto& g = cfg.bounds_grid;
  j["bounds_grid"] = {{"kappa1", g.kappa1}, {"kappa2", g.kappa2}, {"eta", g.eta},
                      {"delta", g.delta},   {"Delta", g.Delta},   {"beta", g.beta},
                      {"rho", g.rho},       {"epsilon", g.epsilon}, {"omega", g.omega},
                      {"B", g.B}};
  j["sweep"] = {{"kappa1", cfg.sweep.kappa1},
                {"kappa2", cfg.sweep.kappa2},
                {"eta", cfg.sweep.eta},
                {"scheme", cfg.sweep.scheme},
                {"jobs", cfg.sweep.jobs}};
  j["alphas"] = cfg.alphas;
  j["threads"] = cfg.threads;
  j["output_dir"] = cfg.output_dir;
  return j;
}

namespace {

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("--set '" + assignment + "': expected key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("--set '" + assignment + "': empty key segment");
    if (!node->is_object()) *node = json::object();
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = std::move(value);
}

}  // namespace

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (doc.is_object() && doc.contains("artifacts") && doc.contains("config")) {
    doc = doc["config"];  // a run manifest
  }
  for (const auto& o : overrides) apply_override(doc, o);
  try {
    return config_from_json(doc);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void validate_config(const ExperimentConfig& cfg) {
  const auto& d = cfg.dataset;
  if (d.source == "synthetic") {
    if (d.num_classes < 2 || d.dim <= 0 || d.samples_per_class <= 0) {
      throw ConfigError("dataset: num_classes >= 2, dim > 0 and samples_per_class > 0 required");
    }
    if (!(d.noise_condition >= 1.0)) throw ConfigError("dataset.noise_condition must be >= 1");
    if (!(d.test_fraction > 0.0 && d.test_fraction < 1.0)) {
      throw ConfigError("dataset.test_fraction must be in (0, 1)");
    }
  } else if (d.images.empty() || d.labels.empty()) {
    throw ConfigError("dataset: mnist source needs images and labels paths");
  }
  if (cfg.num_clients == 0 || cfg.num_edges == 0 || cfg.num_clients % cfg.num_edges != 0) {
    throw ConfigError("topology: num_clients must be a positive multiple of num_edges");
  }
  cfg.schedule.validate();
  if (cfg.batch_size == 0) throw ConfigError("schedule.batch_size must be positive");
  if (cfg.model.kind == ModelKind::mlp && cfg.model.hidden_dim == 0) {
    throw ConfigError("model.hidden_dim must be positive for mlp");
  }
  if (!(cfg.model.l2_reg >= 0.0)) throw ConfigError("model.l2_reg must be nonnegative");
  cfg.cost.validate();
  if (cfg.bounds.probes < 1) throw ConfigError("bounds.probes must be positive");
  for (double a : cfg.alphas) {
    if (!(a > 0.0 && a <= 1.0)) throw ConfigError("alphas: accuracy targets must be in (0, 1]");
  }
}

}  // namespace hierfl
