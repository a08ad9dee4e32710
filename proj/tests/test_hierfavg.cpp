#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <vector>

#include "hierfl/datasets.hpp"
#include "hierfl/errors.hpp"
#include "hierfl/hierfavg.hpp"
#include "hierfl/models.hpp"
#include "hierfl/rng.hpp"
#include "oracles.hpp"

using namespace hierfl;
using namespace hierfl::oracle;

namespace {

struct Fixture {
  Dataset data;
  Partition part;
  ModelSpec spec;
};

Fixture make_fixture(PartitionScheme scheme = PartitionScheme::iid, std::size_t n = 8,
                     std::size_t l = 2) {
  Fixture f;
  f.data = generate_synthetic(4, 5, 60, 21);
  f.part = partition(f.data, Topology::uniform(n, l), scheme, 4);
  f.spec = {ModelKind::logistic_regression, 5, 4, 0, 0.001};
  return f;
}

Schedule fixed_schedule(long k1, long k2, long total, double eta) {
  return Schedule{k1, k2, total, StepPlan::fixed(eta)};
}

bool same_bits(double a, double b) {
  return std::memcmp(&a, &b, sizeof a) == 0;
}

}  // namespace

TEST_CASE("kappa2 = 1 reproduces flat FAVG bit for bit") {
  const Fixture f = make_fixture();
  for (long k1 : {1L, 4L, 10L}) {
    RunOptions opt;
    opt.batch_size = 10;
    opt.seed = 17;
    opt.track_virtual = false;
    const RunTrace t = run_hierfavg(f.data, f.part, f.spec, fixed_schedule(k1, 1, 200, 0.1), opt);
    const ReferenceFavg ref = reference_favg(f.data, f.part, f.spec, k1, 200, 0.1, 10, 17);
    REQUIRE(t.records.size() == ref.records.size());
    for (std::size_t r = 0; r < ref.records.size(); ++r) {
      CHECK(t.records[r].k == ref.records[r].k);
      CHECK(same_bits(t.records[r].global_loss, ref.records[r].global_loss));
      CHECK(same_bits(t.records[r].grad_norm_sq, ref.records[r].grad_norm_sq));
      CHECK(t.records[r].test_accuracy == ref.records[r].test_accuracy);
    }
    CHECK(*t.final_weights == ref.final_weights);
  }
}

TEST_CASE("kappa1 = kappa2 = 1 full gradient tracks centralized GD") {
  const Fixture f = make_fixture();
  const auto all = f.part.all_indices();
  const auto path = centralized_gd(f.data, all, f.spec, initial_weights(f.spec, 0), 0.2, 50);
  double worst = 0.0;
  RunOptions opt;
  opt.mode = UpdateMode::full_gradient;
  opt.observer = [&](const RunState& s) {
    const auto& u = path[static_cast<std::size_t>(s.k - 1)];
    for (std::size_t j = 0; j < u.dim(); ++j) {
      worst = std::max(worst, std::abs((*s.global_weights)[j] - u[j]));
    }
  };
  const RunTrace t = run_hierfavg(f.data, f.part, f.spec, fixed_schedule(1, 1, 50, 0.2), opt);
  CHECK(worst <= 1e-9);
  for (const auto& r : t.records) CHECK(r.deviation == 0.0);
}

TEST_CASE("deviation column matches a restarted centralized GD oracle") {
  const Fixture f = make_fixture(PartitionScheme::simple_niid);
  RunOptions opt;
  opt.mode = UpdateMode::full_gradient;
  opt.record_local_steps = true;
  opt.keep_checkpoints = true;
  const RunTrace t = run_hierfavg(f.data, f.part, f.spec, fixed_schedule(2, 3, 24, 0.3), opt);
  REQUIRE(t.records.size() == 24);
  const auto rows = f.part.all_indices();
  WeightVector start = t.initial_weights;
  for (long q = 1; q <= 4; ++q) {
    const auto u = oracle::centralized_gd(f.data, rows, f.spec, start, 0.3, 6);
    for (long s = 1; s <= 6; ++s) {
      const std::size_t idx = static_cast<std::size_t>((q - 1) * 6 + s - 1);
      const double expect = l2_distance(t.checkpoints[idx], u[static_cast<std::size_t>(s - 1)]);
      if (s < 6) {
        CHECK(t.records[idx].deviation == doctest::Approx(expect).epsilon(1e-9));
      } else {
        CHECK(t.records[idx].deviation == 0.0);  // already measured against u_{q+1}
        CHECK(expect > 1e-6);
      }
    }
    start = t.checkpoints[static_cast<std::size_t>(q * 6 - 1)];
  }
}

TEST_CASE("single client on a single edge equals plain local SGD") {
  Fixture f;
  f.data = generate_synthetic(3, 4, 20, 2);
  f.part = partition(f.data, Topology::uniform(1, 1), PartitionScheme::iid, 1);
  f.spec = {ModelKind::logistic_regression, 4, 3, 0, 0.0};
  RunOptions opt;
  opt.batch_size = 7;
  opt.seed = 5;
  const RunTrace t = run_hierfavg(f.data, f.part, f.spec, fixed_schedule(3, 2, 60, 0.3), opt);

  ClientSampler sampler(f.part.client_shards[0], 7, 5, 0);
  WeightVector w = initial_weights(f.spec, 5);
  for (int k = 0; k < 60; ++k) w = axpy(w, gradient(f.spec, w, f.data, sampler.next_batch()), 0.3);
  CHECK(*t.final_weights == w);
}

TEST_CASE("aggregation events follow the schedule") {
  const Fixture f = make_fixture();
  RunOptions opt;
  opt.batch_size = 5;
  opt.record_local_steps = true;
  const RunTrace t = run_hierfavg(f.data, f.part, f.spec, fixed_schedule(3, 4, 120, 0.05), opt);
  REQUIRE(t.records.size() == 120);
  long edges = 0;
  long clouds = 0;
  for (const auto& r : t.records) {
    if (r.k % 12 == 0) {
      CHECK(r.event == TraceEvent::cloud_agg);
      CHECK(r.deviation == 0.0);
      ++clouds;
    } else if (r.k % 3 == 0) {
      CHECK(r.event == TraceEvent::edge_agg);
    } else {
      CHECK(r.event == TraceEvent::local_step);
    }
    if (r.event != TraceEvent::local_step) ++edges;
  }
  CHECK(edges == 120 / 3);
  CHECK(clouds == 120 / 12);
}

TEST_CASE("run state invariants") {
  const Fixture f = make_fixture(PartitionScheme::simple_niid, 8, 4);
  const auto topo = f.part.topology();
  std::vector<double> sizes(topo.samples_per_client.begin(), topo.samples_per_client.end());
  RunOptions opt;
  opt.batch_size = 5;
  int checked = 0;
  opt.observer = [&](const RunState& s) {
    const auto avg = weighted_average(s.client_weights, sizes);
    CHECK(avg == *s.global_weights);
    if (s.event == TraceEvent::cloud_agg) {
      for (const auto& w : s.client_weights) CHECK(w == *s.global_weights);
      REQUIRE(s.virtual_weights != nullptr);
      CHECK(*s.virtual_weights == *s.global_weights);
      ++checked;
    } else if (s.event == TraceEvent::edge_agg) {
      for (std::size_t e = 0; e < topo.num_edges; ++e) {
        const auto members = topo.clients_of_edge(e);
        for (std::size_t i : members) {
          CHECK(s.client_weights[i] == s.client_weights[members.front()]);
          CHECK(s.client_weights[i] == *s.edge_weights[e]);
        }
      }
      ++checked;
    }
  };
  run_hierfavg(f.data, f.part, f.spec, fixed_schedule(2, 3, 60, 0.1), opt);
  CHECK(checked == 30);
}

TEST_CASE("edge redistribution preserves the mean for equal shard sizes") {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t edges = 1 + rng.below(4);
    const std::size_t per_edge = 1 + rng.below(4);
    std::vector<WeightVector> clients;
    for (std::size_t i = 0; i < edges * per_edge; ++i) {
      clients.push_back(WeightVector({rng.normal(), rng.normal(), rng.normal()}));
    }
    const std::vector<double> ones(clients.size(), 1.0);
    const WeightVector before = weighted_average(clients, ones);
    for (std::size_t e = 0; e < edges; ++e) {
      const std::span<WeightVector> members(clients.data() + e * per_edge, per_edge);
      const std::vector<double> w(per_edge, 1.0);
      const WeightVector avg = weighted_average(members, w);
      for (auto& m : members) m = avg;
    }
    const WeightVector after = weighted_average(clients, ones);
    for (std::size_t j = 0; j < 3; ++j) CHECK(after[j] == doctest::Approx(before[j]).epsilon(1e-12));
  }
}

TEST_CASE("traces are identical for any thread count") {
  const Fixture f = make_fixture(PartitionScheme::simple_niid, 8, 4);
  RunOptions opt;
  opt.batch_size = 5;
  opt.seed = 3;
  const Schedule s{2, 2, 40, StepPlan::exponential_decay(0.2, 0.9)};
  const RunTrace a = run_hierfavg(f.data, f.part, f.spec, s, opt);
  opt.threads = 4;
  const RunTrace b = run_hierfavg(f.data, f.part, f.spec, s, opt);
  std::ostringstream ca, cb;
  write_trace_csv(ca, a);
  write_trace_csv(cb, b);
  CHECK(ca.str() == cb.str());
  CHECK(*a.final_weights == *b.final_weights);
}

TEST_CASE("replicated client datasets give zero deviation") {
  const Dataset base = generate_synthetic(3, 4, 10, 8);
  Dataset data = base;
  const std::size_t copies = 6;
  for (std::size_t c = 1; c < copies; ++c) {
    data.features.insert(data.features.end(), base.features.begin(), base.features.end());
    data.labels.insert(data.labels.end(), base.labels.begin(), base.labels.end());
  }
  Partition part;
  part.num_edges = 3;
  for (std::size_t c = 0; c < copies; ++c) {
    std::vector<std::size_t> shard(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) shard[i] = c * base.size() + i;
    part.client_shards.push_back(shard);
    part.edge_of_client.push_back(c / 2);
  }
  const ModelSpec spec{ModelKind::logistic_regression, 4, 3, 0, 0.0};
  RunOptions opt;
  opt.mode = UpdateMode::full_gradient;
  opt.record_local_steps = true;
  const RunTrace t = run_hierfavg(data, part, spec, fixed_schedule(2, 3, 30, 0.5), opt);
  for (const auto& r : t.records) CHECK(r.deviation <= 1e-12);
}

TEST_CASE("evaluate") {
  const Dataset test = generate_synthetic(10, 6, 20, 4);
  const ModelSpec spec{ModelKind::logistic_regression, 6, 10, 0, 0.0};
  const auto w0 = initial_weights(spec, 0);
  const Evaluation e = evaluate(spec, w0, test);
  long hits = 0;
  for (std::size_t i = 0; i < test.size(); ++i) hits += predict(spec, w0, test.row(i)) == test.labels[i];
  CHECK(e.accuracy == static_cast<double>(hits) / test.size());
  CHECK(e.accuracy >= 0.05);
  CHECK(e.accuracy <= 0.15);
  CHECK(e.loss == loss(spec, w0, test));
  CHECK_THROWS_AS(evaluate(spec, w0, Dataset{6, 10, {}, {}}), DomainError);

  // well separated clusters: trained weights classify everything
  SyntheticOptions sep;
  sep.cluster_radius = 10.0;
  sep.noise_std = 0.2;
  const Dataset easy = generate_synthetic(2, 3, 40, 6, sep);
  const Partition p = partition(easy, Topology::uniform(2, 1), PartitionScheme::iid, 1);
  const ModelSpec s2{ModelKind::logistic_regression, 3, 2, 0, 0.0};
  RunOptions opt;
  opt.mode = UpdateMode::full_gradient;
  const RunTrace t = run_hierfavg(easy, p, s2, fixed_schedule(5, 1, 400, 1.0), opt);
  CHECK(evaluate(s2, *t.final_weights, easy).accuracy == 1.0);
}

TEST_CASE("schedule validation and step plans") {
  CHECK_THROWS_AS(fixed_schedule(3, 2, 10, 0.1).validate(), ConfigError);
  CHECK_THROWS_AS(fixed_schedule(0, 2, 10, 0.1).validate(), ConfigError);
  CHECK_THROWS_AS(fixed_schedule(1, 1, 10, 0.0).validate(), ConfigError);
  Schedule per{2, 2, 12, StepPlan::per_cloud_interval({0.1, 0.2})};
  CHECK_THROWS_AS(per.validate(), ConfigError);
  per.step_plan.interval_etas.push_back(0.3);
  per.validate();
  CHECK(per.eta_at(4, 1) == 0.1);
  CHECK(per.eta_at(5, 1) == 0.2);
  CHECK(per.eta_at(12, 1) == 0.3);
  const Schedule decay{1, 1, 100, StepPlan::exponential_decay(1.0, 0.5)};
  CHECK(decay.eta_at(1, 10) == 1.0);
  CHECK(decay.eta_at(10, 10) == 1.0);
  CHECK(decay.eta_at(11, 10) == 0.5);
  CHECK(decay.eta_at(21, 10) == 0.25);
}

TEST_CASE("client sampler") {
  std::vector<std::size_t> shard{9, 3, 5, 1, 7};
  ClientSampler s(shard, 2, 1, 0);
  std::vector<std::size_t> seen;
  for (int b = 0; b < 2; ++b) {
    const auto batch = s.next_batch();
    seen.insert(seen.end(), batch.begin(), batch.end());
  }
  std::sort(seen.begin(), seen.end());
  CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
  CHECK(s.epoch() == 0);
  s.next_batch();
  CHECK(s.epoch() == 1);
  CHECK_THROWS_AS(ClientSampler(shard, 6, 1, 0), ConfigError);
}

TEST_CASE("trace CSV round trip") {
  const Fixture f = make_fixture();
  RunOptions opt;
  opt.batch_size = 5;
  const RunTrace t = run_hierfavg(f.data, f.part, f.spec, fixed_schedule(2, 2, 20, 0.1), opt);
  std::stringstream csv;
  write_trace_csv(csv, t);
  std::string header;
  std::getline(std::istringstream(csv.str()) >> std::ws, header);
  CHECK(header == kTraceHeader);
  const auto back = read_trace_csv(csv);
  REQUIRE(back.size() == t.records.size());
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(back[i] == t.records[i]);

  std::istringstream bad_header("k,event\n");
  CHECK_THROWS_AS(read_trace_csv(bad_header), FormatError);
  std::istringstream bad_order(std::string(kTraceHeader) +
                               "\n2,edge_agg,1,0.5,0,1,0.1\n1,edge_agg,1,0.5,0,1,0.1\n");
  CHECK_THROWS_AS(read_trace_csv(bad_order), FormatError);

  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(std::nan("")) == "nan");
}
