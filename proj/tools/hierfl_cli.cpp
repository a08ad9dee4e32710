// Command-line front end: run, sweep, bounds, cost, validate.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hierfl/errors.hpp"
#include "hierfl/experiment.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;
  std::string check_manifest;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("config", args.config, "experiment config (JSON) or a run manifest")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", args.seed, "override the config seed");
  cmd->add_option("--out", args.out, "output directory (default: config output_dir)");
  cmd->add_option("--set", args.overrides, "override a config field, e.g. schedule.kappa1=6");
}

hierfl::ExperimentConfig resolve(const CommonArgs& args) {
  auto cfg = hierfl::load_config(args.config, args.overrides);
  if (args.seed) cfg.seed = *args.seed;
  if (!args.out.empty()) cfg.output_dir = args.out;
  return cfg;
}

// Compares fresh digests against a previous manifest; returns mismatch count.
int compare_with(const std::string& manifest_path, const hierfl::ArtifactDigests& fresh) {
  std::ifstream in(manifest_path);
  if (!in) throw hierfl::ConfigError(manifest_path + ": cannot open manifest");
  const auto m = nlohmann::json::parse(in);
  int bad = 0;
  for (const auto& [name, digest] : m.at("artifacts").items()) {
    auto it = fresh.find(name);
    if (it == fresh.end() || it->second != digest.get<std::string>()) {
      std::cerr << "mismatch: " << name << '\n';
      ++bad;
    }
  }
  return bad;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierfl: hierarchical federated averaging simulator"};
  app.require_subcommand(1);

  CommonArgs run_args, sweep_args, bounds_args, cost_args, validate_args;
  std::string trace_path;

  auto* run = app.add_subcommand("run", "execute one HierFAVG experiment");
  add_common(run, run_args);
  run->add_option("--check-manifest", run_args.check_manifest,
                  "fail unless artifacts match this manifest's digests");

  auto* sweep = app.add_subcommand("sweep", "run the config's sweep grid");
  add_common(sweep, sweep_args);
  sweep->add_option("--check-manifest", sweep_args.check_manifest,
                    "fail unless artifacts match this manifest's digests");

  auto* bounds = app.add_subcommand("bounds", "evaluate deviation/convergence bounds on a grid");
  add_common(bounds, bounds_args);

  auto* cost = app.add_subcommand("cost", "re-price an existing trace under the config's cost model");
  add_common(cost, cost_args);
  cost->add_option("--trace", trace_path, "trace CSV to price")->required()->check(CLI::ExistingFile);

  auto* validate = app.add_subcommand("validate", "check a config without running anything");
  add_common(validate, validate_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto cfg = resolve(run_args);
      const auto digests = hierfl::run_experiment(cfg, cfg.output_dir);
      std::cout << "wrote " << digests.size() << " artifacts to " << cfg.output_dir << '\n';
      if (!run_args.check_manifest.empty() && compare_with(run_args.check_manifest, digests) > 0) {
        return 3;
      }
    } else if (*sweep) {
      const auto cfg = resolve(sweep_args);
      const auto digests = hierfl::run_sweep(cfg, cfg.output_dir);
      std::cout << "wrote " << digests.size() << " artifacts to " << cfg.output_dir << '\n';
      if (!sweep_args.check_manifest.empty() &&
          compare_with(sweep_args.check_manifest, digests) > 0) {
        return 3;
      }
    } else if (*bounds) {
      const auto cfg = resolve(bounds_args);
      hierfl::run_bounds_grid(cfg, cfg.output_dir);
      std::cout << "wrote " << (std::filesystem::path(cfg.output_dir) / "bounds_grid.csv").string() << '\n';
    } else if (*cost) {
      const auto cfg = resolve(cost_args);
      hierfl::run_cost(cfg, trace_path, cfg.output_dir);
      std::cout << "wrote cost report to " << cfg.output_dir << '\n';
    } else if (*validate) {
      const auto cfg = resolve(validate_args);
      hierfl::prepare(cfg);  // also checks partition feasibility against the data
      std::cout << "config ok\n";
    }
  } catch (const hierfl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const hierfl::FormatError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
