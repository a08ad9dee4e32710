#include "hierfl/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "hierfl/checksum.hpp"
#include "hierfl/errors.hpp"

namespace hierfl {

using nlohmann::ordered_json;

PreparedExperiment prepare(const ExperimentConfig& cfg) {
  validate_config(cfg);
  PreparedExperiment prep;
  const auto& d = cfg.dataset;
  if (d.source == "synthetic") {
    const Dataset full = generate_synthetic(d.num_classes, d.dim, d.samples_per_class, cfg.seed,
                                            {d.cluster_radius, d.noise_std, d.noise_condition});
    std::tie(prep.train, prep.test) = train_test_split(full, d.test_fraction, cfg.seed);
  } else {
    Dataset all = load_mnist_idx(d.images, d.labels, d.limit);
    if (!d.test_images.empty()) {
      prep.train = std::move(all);
      prep.test = load_mnist_idx(d.test_images, d.test_labels, d.limit);
    } else {
      std::tie(prep.train, prep.test) = train_test_split(all, d.test_fraction, cfg.seed);
    }
  }
  prep.spec = cfg.model;
  prep.spec.input_dim = prep.train.dim;
  prep.spec.num_classes = prep.train.num_classes;
  prep.spec.validate();
  prep.part = partition(prep.train, Topology::uniform(cfg.num_clients, cfg.num_edges), cfg.scheme,
                        cfg.seed);
  return prep;
}

EstimatedConstants estimate_constants(const PreparedExperiment& prep,
                                      std::span<const WeightVector> trajectory, int probes,
                                      std::uint64_t seed) {
  std::vector<WeightVector> points = random_probes(initial_weights(prep.spec, seed), probes, seed);
  points.insert(points.end(), trajectory.begin(), trajectory.end());
  const auto all = prep.part.all_indices();
  EstimatedConstants out;
  out.smoothness = estimate_smoothness(full_batch_objective(prep.spec, prep.train, all), points);
  out.divergence = estimate_divergence(prep.train, prep.part, prep.spec, points);
  return out;
}

namespace {

std::string write_artifact(const std::filesystem::path& dir, const std::string& name,
                           const std::string& content) {
  const auto path = dir / name;
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path.string() + ": cannot write");
  out << content;
  return sha256_hex(content);
}

RunOptions run_options(const ExperimentConfig& cfg, const PreparedExperiment& prep) {
  RunOptions opt;
  opt.batch_size = cfg.batch_size;
  opt.mode = cfg.mode;
  opt.seed = cfg.seed;
  opt.track_virtual = true;
  opt.keep_checkpoints = cfg.bounds.enabled;
  opt.threads = cfg.threads;
  opt.eval_set = &prep.test;
  return opt;
}

BoundParams bound_params(const ExperimentConfig& cfg, const EstimatedConstants& c, double eta) {
  BoundParams p;
  p.beta = std::max(c.smoothness.beta, std::numeric_limits<double>::min());
  p.rho = c.smoothness.rho;
  p.delta = c.divergence.client_edge;
  p.Delta = c.divergence.edge_cloud;
  p.eta = eta;
  p.kappa1 = cfg.schedule.kappa1;
  p.kappa2 = cfg.schedule.kappa2;
  p.K = cfg.schedule.total_updates;
  p.h_form = cfg.bounds.h_form;
  return p;
}

std::string hashed_config(const ExperimentConfig& cfg) {
  ordered_json j = config_to_json(cfg);
  j.erase("output_dir");
  return j.dump();
}

}  // namespace

void write_manifest(const ExperimentConfig& cfg, const std::string& command,
                    const ArtifactDigests& digests, const std::filesystem::path& out_dir) {
  ordered_json m;
  m["command"] = command;
  m["seed"] = cfg.seed;
  m["config_sha256"] = sha256_hex(hashed_config(cfg));
  m["config"] = config_to_json(cfg);
  m["artifacts"] = ordered_json::object();
  for (const auto& [name, digest] : digests) m["artifacts"][name] = digest;
  write_artifact(out_dir, "manifest.json", m.dump(2) + "\n");
}

std::vector<std::string> verify_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw ConfigError(manifest_path.string() + ": cannot open manifest");
  const auto m = nlohmann::json::parse(in);
  std::vector<std::string> bad;
  for (const auto& [name, digest] : m.at("artifacts").items()) {
    const auto path = manifest_path.parent_path() / name;
    if (!std::filesystem::exists(path) || sha256_file(path) != digest.get<std::string>()) {
      bad.push_back(name);
    }
  }
  return bad;
}

ArtifactDigests run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  const PreparedExperiment prep = prepare(cfg);
  const RunTrace trace = run_hierfavg(prep.train, prep.part, prep.spec, cfg.schedule,
                                      run_options(cfg, prep));
  ArtifactDigests digests;

  {
    std::ostringstream s;
    write_trace_csv(s, trace);
    digests["trace.csv"] = write_artifact(out_dir, "trace.csv", s.str());
  }
  {
    std::ostringstream s;
    write_partition(s, prep.train, prep.part);
    digests["partition.csv"] = write_artifact(out_dir, "partition.csv", s.str());
  }

  if (cfg.bounds.enabled) {
    std::vector<WeightVector> trajectory{trace.initial_weights};
    trajectory.insert(trajectory.end(), trace.checkpoints.begin(), trace.checkpoints.end());
    const EstimatedConstants c = estimate_constants(prep, trajectory, cfg.bounds.probes, cfg.seed);
    {
      std::ostringstream s;
      write_divergence(s, c.divergence, prep.part);
      s << "beta " << format_double(c.smoothness.beta) << '\n';
      s << "rho " << format_double(c.smoothness.rho) << '\n';
      digests["divergence.txt"] = write_artifact(out_dir, "divergence.txt", s.str());
    }
    std::ostringstream s;
    s << "k,q,deviation,g_c,g_c_end,g_nc,within_g_c\n";
    for (const auto& r : trace.records) {
      const BoundParams p = bound_params(cfg, c, r.eta);
      const long q = cfg.schedule.interval_of(r.k);
      const double gc = g_c(r.k, q, p);
      s << r.k << ',' << q << ',' << format_double(r.deviation) << ',' << format_double(gc) << ','
        << format_double(g_c_end(p)) << ',' << format_double(g_nc(p)) << ','
        << (r.deviation <= gc ? 1 : 0) << '\n';
    }
    digests["bounds.csv"] = write_artifact(out_dir, "bounds.csv", s.str());
  }

  AccountingOptions acct = cfg.accounting;
  acct.num_clients = cfg.num_clients;
  const CostReport report = accumulate(trace.records, cfg.schedule, cfg.cost, acct);
  {
    std::ostringstream s;
    write_cost_csv(s, report);
    digests["cost.csv"] = write_artifact(out_dir, "cost.csv", s.str());
  }
  {
    std::ostringstream s;
    write_cost_summary(s, report, unit_costs(cfg.cost), cfg.alphas);
    digests["cost_summary.json"] = write_artifact(out_dir, "cost_summary.json", s.str());
  }
  write_manifest(cfg, "run", digests, out_dir);
  return digests;
}

namespace {

struct SweepPoint {
  long kappa1;
  long kappa2;
  double eta;
  std::string scheme;
};

std::string point_name(std::size_t idx, const SweepPoint& p) {
  std::ostringstream s;
  s << "points/p" << idx << "_k1-" << p.kappa1 << "_k2-" << p.kappa2 << "_eta-"
    << format_double(p.eta) << '_' << p.scheme << ".csv";
  return s.str();
}

std::string sanitize(std::string msg) {
  std::replace(msg.begin(), msg.end(), ',', ';');
  std::replace(msg.begin(), msg.end(), '\n', ' ');
  return msg;
}

}  // namespace

ArtifactDigests run_sweep(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  validate_config(cfg);
  const auto& sw = cfg.sweep;
  const std::vector<long> k1s = sw.kappa1.empty() ? std::vector<long>{cfg.schedule.kappa1} : sw.kappa1;
  const std::vector<long> k2s = sw.kappa2.empty() ? std::vector<long>{cfg.schedule.kappa2} : sw.kappa2;
  const std::vector<double> etas =
      sw.eta.empty() ? std::vector<double>{cfg.schedule.step_plan.eta} : sw.eta;
  const std::vector<std::string> schemes =
      sw.scheme.empty() ? std::vector<std::string>{std::string(to_string(cfg.scheme))} : sw.scheme;
  if (k1s.empty() || k2s.empty() || etas.empty() || schemes.empty()) {
    throw ConfigError("sweep: empty grid");
  }

  std::vector<SweepPoint> points;
  for (long k1 : k1s)
    for (long k2 : k2s)
      for (double eta : etas)
        for (const auto& sc : schemes) points.push_back({k1, k2, eta, sc});

  std::vector<std::string> rows(points.size());
  std::vector<std::pair<std::string, std::string>> traces(points.size());
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      const SweepPoint& pt = points[i];
      std::ostringstream row;
      row << pt.kappa1 << ',' << pt.kappa2 << ',' << format_double(pt.eta) << ',' << pt.scheme << ',';
      try {
        ExperimentConfig pc = cfg;
        pc.schedule.kappa1 = pt.kappa1;
        pc.schedule.kappa2 = pt.kappa2;
        pc.schedule.step_plan.eta = pt.eta;
        pc.scheme = parse_scheme(pt.scheme);
        pc.threads = 1;
        const PreparedExperiment prep = prepare(pc);
        const RunTrace trace = run_hierfavg(prep.train, prep.part, prep.spec, pc.schedule,
                                            run_options(pc, prep));
        std::ostringstream ts;
        write_trace_csv(ts, trace);
        traces[i] = {point_name(i, pt), ts.str()};

        const double target = cfg.alphas.empty() ? 1.0 : cfg.alphas.front();
        AccountingOptions acct = pc.accounting;
        acct.num_clients = pc.num_clients;
        const CostReport report = accumulate(trace.records, pc.schedule, pc.cost, acct);
        const AlphaCost reach = report.cost_to_reach(target);
        double max_dev = 0.0;
        for (const auto& r : trace.records) max_dev = std::max(max_dev, r.deviation);

        row << "ok," << format_double(trace.records.back().test_accuracy) << ',';
        if (reach.reached) {
          row << format_double(trace.epoch_of(reach.k)) << ',' << format_double(reach.seconds)
              << ',' << format_double(reach.joules) << ',';
        } else {
          row << ",,,";
        }
        if (pc.bounds.enabled) {
          std::vector<WeightVector> traj{trace.initial_weights};
          traj.insert(traj.end(), trace.checkpoints.begin(), trace.checkpoints.end());
          const auto c = estimate_constants(prep, traj, pc.bounds.probes, pc.seed);
          row << format_double(g_c_end(bound_params(pc, c, pt.eta)));
        }
        row << ',' << format_double(max_dev);
      } catch (const std::exception& e) {
        row << "failed: " << sanitize(e.what()) << ",,,,,,";
      }
      rows[i] = row.str();
    }
  };

  const unsigned jobs = std::max(1u, std::min<unsigned>(sw.jobs, static_cast<unsigned>(points.size())));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(work);
    work();
  }

  ArtifactDigests digests;
  std::string summary = std::string(kSweepHeader) + "\n";
  for (const auto& r : rows) summary += r + "\n";
  digests["summary.csv"] = write_artifact(out_dir, "summary.csv", summary);
  for (const auto& [name, content] : traces) {
    if (!name.empty()) digests[name] = write_artifact(out_dir, name, content);
  }
  write_manifest(cfg, "sweep", digests, out_dir);
  return digests;
}

ArtifactDigests run_bounds_grid(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  const auto& g = cfg.bounds_grid;
  if (g.kappa1.empty() || g.kappa2.empty() || g.eta.empty() || g.delta.empty() || g.Delta.empty()) {
    throw ConfigError("bounds_grid: empty grid");
  }
  if (g.B <= 0) throw ConfigError("bounds_grid.B must be positive");
  std::ostringstream s;
  s << kBoundsGridHeader << '\n';
  for (long k1 : g.kappa1)
    for (long k2 : g.kappa2)
      for (double eta : g.eta)
        for (double dl : g.delta)
          for (double Dl : g.Delta) {
            BoundParams p;
            p.beta = g.beta;
            p.rho = g.rho;
            p.delta = dl;
            p.Delta = Dl;
            p.eta = eta;
            p.kappa1 = k1;
            p.kappa2 = k2;
            p.K = g.B * k1 * k2;
            p.epsilon = g.epsilon;
            p.omega = g.omega;
            p.h_form = cfg.bounds.h_form;
            const ConvergenceBound t1 = theorem1_bound(p);
            s << k1 << ',' << k2 << ',' << format_double(eta) << ',' << format_double(dl) << ','
              << format_double(Dl) << ',' << format_double(g.beta) << ','
              << format_double(g_c_end(p)) << ',' << format_double(g_nc(p)) << ','
              << (t1.feasible ? format_double(t1.value) : "") << ',' << (t1.feasible ? 1 : 0)
              << '\n';
          }
  ArtifactDigests digests;
  digests["bounds_grid.csv"] = write_artifact(out_dir, "bounds_grid.csv", s.str());
  write_manifest(cfg, "bounds", digests, out_dir);
  return digests;
}

ArtifactDigests run_cost(const ExperimentConfig& cfg, const std::filesystem::path& trace_csv,
                         const std::filesystem::path& out_dir) {
  validate_config(cfg);
  std::ifstream in(trace_csv);
  if (!in) throw ConfigError(trace_csv.string() + ": cannot open trace");
  std::vector<TraceRecord> records;
  try {
    records = read_trace_csv(in);
  } catch (const FormatError& e) {
    throw FormatError(trace_csv.string() + ": " + e.what());
  }
  AccountingOptions acct = cfg.accounting;
  acct.num_clients = cfg.num_clients;
  const CostReport report = accumulate(records, cfg.schedule, cfg.cost, acct);
  ArtifactDigests digests;
  {
    std::ostringstream s;
    write_cost_csv(s, report);
    digests["cost.csv"] = write_artifact(out_dir, "cost.csv", s.str());
  }
  {
    std::ostringstream s;
    write_cost_summary(s, report, unit_costs(cfg.cost), cfg.alphas);
    digests["cost_summary.json"] = write_artifact(out_dir, "cost_summary.json", s.str());
  }
  write_manifest(cfg, "cost", digests, out_dir);
  return digests;
}

}  // namespace hierfl
