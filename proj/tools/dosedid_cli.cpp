// dosedid: estimate, simulate, robustness and placebo subcommands.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "dosedid/bootstrap.hpp"
#include "dosedid/config.hpp"
#include "dosedid/panel_io.hpp"
#include "dosedid/report.hpp"
#include "dosedid/simlab.hpp"

namespace fs = std::filesystem;
using namespace dosedid;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
};

json load_with_overrides(const Overrides& o) {
  json j = read_json(o.config);
  if (!j.is_object()) throw Error("cli", ErrorKind::InvalidConfig, "config must be a JSON object");
  if (o.seed) j["seed"] = *o.seed;
  if (o.threads) j["threads"] = *o.threads;
  if (o.out) j["output"] = fs::absolute(*o.out).string();
  return j;
}

fs::path config_dir(const Overrides& o) { return fs::absolute(o.config).parent_path(); }

std::vector<std::string> header_for(const std::string& command, std::uint64_t seed, const json& canonical,
                                    int replicates) {
  return report::Header{command, seed, config_hash(canonical), replicates}.lines(kVersion);
}

int cmd_estimate(const Overrides& o, bool placebo_only) {
  auto cfg = parse_analysis_config(load_with_overrides(o), config_dir(o));
  const auto panel = ingest_panel(cfg.files, cfg.schema);
  fs::create_directories(cfg.output);
  const int R = cfg.bootstrap ? cfg.bootstrap_options.replicates : 0;
  const auto header = header_for(placebo_only ? "placebo" : "estimate", cfg.bootstrap_options.seed, cfg.canonical, R);
  const auto driver = to_string(cfg.driver);

  if (placebo_only || cfg.placebo) {
    CurvePlan plan;
    PlaceboResult placebo;
    if (cfg.bootstrap) {
      auto pb = bootstrap_placebo(panel, cfg.driver, cfg.estimation, cfg.bootstrap_options);
      placebo = std::move(pb.placebo);
    } else {
      placebo = placebo_curve(panel, prepare_driver(panel, cfg.driver), cfg.estimation, {}, plan);
    }
    plan = make_curve_plan(prepare_driver(panel, cfg.driver).assignment.dose.values, cfg.estimation.grid,
                           cfg.estimation.bandwidth);
    report::write_placebo(cfg.output / ("placebo_" + driver + ".csv"), placebo, plan, header);
    if (placebo_only) return 0;
  }

  EffectEstimates est;
  CurvePlan plan;
  std::optional<BootstrapResult> boot;
  if (cfg.bootstrap) {
    auto ba = bootstrap_analysis(panel, cfg.driver, cfg.estimation, cfg.bootstrap_options);
    est = std::move(ba.estimates);
    plan = std::move(ba.plan);
    boot = std::move(ba.result);
  } else {
    est = run_period_analysis(panel, prepare_driver(panel, cfg.driver), cfg.estimation, {}, plan);
  }
  const BootstrapResult* b = boot ? &*boot : nullptr;
  report::write_estimates(cfg.output / "estimates.csv", est, b, header);
  report::write_curve(cfg.output / ("curve_" + driver + ".csv"), est.curve, plan, header);
  if (est.curve.surface.size() > 0)
    report::write_surface(cfg.output / ("surface_" + driver + ".csv"), est.curve, plan, header);
  if (est.naive) report::write_curve(cfg.output / "naive_curve.csv", *est.naive, plan, header);
  report::write_diagnostics(cfg.output / "diagnostics.csv", est, b, header);
  if (b && cfg.dump_replicates) write_replicates_csv(*b, (cfg.output / "replicates.csv").string(), header);
  return 0;
}

int cmd_simulate(const Overrides& o) {
  auto cfg = parse_simulation_config(load_with_overrides(o), config_dir(o));
  const auto sim = sim::generate(cfg.dgp);
  const auto header = header_for("simulate", cfg.dgp.seed, cfg.canonical, 0);
  write_panel(sim.panel, cfg.output, header);
  report::write_truth(cfg.output / "truth.csv", sim, header);
  return 0;
}

int cmd_robustness(const Overrides& o) {
  auto cfg = parse_robustness_config(load_with_overrides(o), config_dir(o));
  const auto rows = sim::robustness_experiment(cfg.dgp, cfg.options);
  fs::create_directories(cfg.output);
  const auto header = header_for("robustness", cfg.dgp.seed, cfg.canonical, cfg.options.reps);
  report::write_robustness(cfg.output / "robustness.csv", rows, header);
  int agree = 0;
  for (const auto& r : rows) agree += r.agrees();
  std::cout << "verdict agreement: " << agree << "/" << rows.size() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dose-driver effect heterogeneity for difference-in-differences panels"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Overrides o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON config file")->required();
    sub->add_option("--seed", o.seed, "Override the master seed");
    sub->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", o.out, "Output directory");
  };
  auto* estimate = app.add_subcommand("estimate", "Estimate ATT, ADT, ADUTT and REDA with bootstrap bands");
  auto* simulate = app.add_subcommand("simulate", "Write a synthetic panel and its ground truth");
  auto* robustness = app.add_subcommand("robustness", "Run the Good/Bad nuisance misspecification experiment");
  auto* placebo = app.add_subcommand("placebo", "Placebo effect curves on pre-period data");
  for (auto* s : {estimate, simulate, robustness, placebo}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    if (*estimate) return cmd_estimate(o, false);
    if (*placebo) return cmd_estimate(o, true);
    if (*simulate) return cmd_simulate(o);
    if (*robustness) return cmd_robustness(o);
  } catch (const Error& e) {
    std::cerr << "error: module=" << e.module() << " kind=" << to_string(e.kind()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: module=cli kind=Internal: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
