#pragma once

// JSON analysis and simulation configs. Unknown keys are rejected so typos
// surface as errors instead of silently falling back to defaults.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dosedid/bootstrap.hpp"
#include "dosedid/errors.hpp"
#include "dosedid/estimators.hpp"
#include "dosedid/exposure.hpp"
#include "dosedid/panel_io.hpp"
#include "dosedid/simlab.hpp"

namespace dosedid {

inline constexpr const char* kVersion = "0.1.0";

using json = nlohmann::json;

struct AnalysisConfig {
  PanelFiles files;
  PanelSchema schema;
  DriverKind driver = DriverKind::Competition;
  EstimationConfig estimation;
  bool bootstrap = true;
  BootstrapOptions bootstrap_options;
  bool dump_replicates = false;
  bool placebo = false;
  std::filesystem::path output = "out";
  json canonical;  // resolved config used for the hash
};

namespace detail {

inline void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw Error("cli", ErrorKind::InvalidConfig, "field '" + where + "' must be an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, _] : obj.items())
    if (!allowed.count(k))
      throw Error("cli", ErrorKind::InvalidConfig,
                  "unknown field '" + (where.empty() ? k : where + "." + k) + "'");
}

template <typename T>
T get(const json& obj, const std::string& key, const std::string& where, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error("cli", ErrorKind::InvalidConfig,
                "field '" + (where.empty() ? key : where + "." + key) + "' has the wrong type");
  }
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace detail

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cli", ErrorKind::Io, "cannot read config '" + path.string() + "'");
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw Error("cli", ErrorKind::InvalidConfig, "config '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

// 64-bit FNV-1a of the canonical dump.
inline std::string config_hash(const json& canonical) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : canonical.dump()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

inline BandwidthPolicy parse_bandwidth(const std::string& s) {
  if (s == "rule_of_thumb") return BandwidthPolicy::RuleOfThumb;
  if (s == "loo" || s == "leave_one_out") return BandwidthPolicy::LeaveOneOut;
  throw Error("cli", ErrorKind::InvalidConfig, "field 'bandwidth': unknown policy '" + s + "'");
}

inline LearnerSet parse_learners(const json& j) {
  LearnerSet l;
  detail::check_keys(j, "learners", {"treated_trend", "control_trend", "propensity", "dose_density"});
  l.treated_trend = detail::get(j, "treated_trend", "learners", l.treated_trend);
  l.control_trend = detail::get(j, "control_trend", "learners", l.control_trend);
  l.propensity = detail::get(j, "propensity", "learners", l.propensity);
  l.dose_density = detail::get(j, "dose_density", "learners", l.dose_density);
  for (const auto& [role, id] : {std::pair{"treated_trend", l.treated_trend}, std::pair{"control_trend", l.control_trend},
                                 std::pair{"propensity", l.propensity}, std::pair{"dose_density", l.dose_density}}) {
    try {
      check_learner(role, id);
    } catch (const Error& e) {
      throw Error("cli", ErrorKind::UnknownLearner, std::string("field 'learners.") + role + "': " + e.what());
    }
  }
  return l;
}

// Paths are resolved against base_dir (the config file's directory).
inline AnalysisConfig parse_analysis_config(json j, const std::filesystem::path& base_dir) {
  AnalysisConfig c;
  detail::check_keys(j, "", {"input", "schema", "driver", "window", "learners", "grid", "bandwidth", "bootstrap",
                             "seed", "threads", "output", "placebo", "naive", "eif_diagnostics", "positivity",
                             "reda_floor_factor"});
  if (!j.contains("input")) throw Error("cli", ErrorKind::InvalidConfig, "field 'input' is required");
  const auto& in = j.at("input");
  detail::check_keys(in, "input", {"units", "adjacency", "zips"});
  for (const char* k : {"units", "adjacency", "zips"})
    if (!in.contains(k)) throw Error("cli", ErrorKind::InvalidConfig, std::string("field 'input.") + k + "' is required");
  c.files.units = detail::resolve(base_dir, detail::get<std::string>(in, "units", "input", "")).string();
  c.files.adjacency = detail::resolve(base_dir, detail::get<std::string>(in, "adjacency", "input", "")).string();
  c.files.zips = detail::resolve(base_dir, detail::get<std::string>(in, "zips", "input", "")).string();

  if (j.contains("schema")) {
    const auto& s = j.at("schema");
    detail::check_keys(s, "schema", {"unit_id", "group", "zip", "t", "m", "outcome", "price", "role", "covariates"});
    auto& sc = c.schema;
    sc.unit_id = detail::get(s, "unit_id", "schema", sc.unit_id);
    sc.group = detail::get(s, "group", "schema", sc.group);
    sc.zip = detail::get(s, "zip", "schema", sc.zip);
    sc.t = detail::get(s, "t", "schema", sc.t);
    sc.m = detail::get(s, "m", "schema", sc.m);
    sc.outcome = detail::get(s, "outcome", "schema", sc.outcome);
    sc.price = detail::get(s, "price", "schema", sc.price);
    sc.role = detail::get(s, "role", "schema", sc.role);
    sc.covariates = detail::get(s, "covariates", "schema", sc.covariates);
  }
  try {
    c.driver = parse_driver(detail::get<std::string>(j, "driver", "", "competition"));
  } catch (const Error& e) {
    throw Error("cli", ErrorKind::InvalidConfig, std::string("field 'driver': ") + e.what());
  }
  auto& est = c.estimation;
  if (j.contains("window")) {
    const auto w = detail::get<std::vector<int>>(j, "window", "", {});
    if (w.size() != 2) throw Error("cli", ErrorKind::InvalidConfig, "field 'window' must be [first, last]");
    est.window_first = w[0];
    est.window_last = w[1];
    if (w[0] < 1 || w[0] > w[1]) throw Error("cli", ErrorKind::InvalidConfig, "field 'window' is not a valid range");
  }
  if (j.contains("learners")) est.learners = parse_learners(j.at("learners"));
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    detail::check_keys(g, "grid", {"points", "lower_quantile", "upper_quantile", "explicit"});
    est.grid.points = detail::get(g, "points", "grid", est.grid.points);
    est.grid.lower_quantile = detail::get(g, "lower_quantile", "grid", est.grid.lower_quantile);
    est.grid.upper_quantile = detail::get(g, "upper_quantile", "grid", est.grid.upper_quantile);
    if (est.grid.points < 1) throw Error("cli", ErrorKind::InvalidConfig, "field 'grid.points' must be positive");
    if (!(0 <= est.grid.lower_quantile && est.grid.lower_quantile < est.grid.upper_quantile &&
          est.grid.upper_quantile <= 1))
      throw Error("cli", ErrorKind::InvalidConfig, "field 'grid' quantiles must satisfy 0 <= lower < upper <= 1");
    if (g.contains("explicit")) {
      const auto pts = detail::get<std::vector<std::vector<double>>>(g, "explicit", "grid", {});
      if (!pts.empty()) {
        est.grid.explicit_points.resize(static_cast<Eigen::Index>(pts.size()), static_cast<Eigen::Index>(pts[0].size()));
        for (std::size_t r = 0; r < pts.size(); ++r) {
          if (pts[r].size() != pts[0].size())
            throw Error("cli", ErrorKind::InvalidConfig, "field 'grid.explicit' rows differ in length");
          for (std::size_t k = 0; k < pts[r].size(); ++k)
            est.grid.explicit_points(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = pts[r][k];
        }
      }
    }
  }
  est.bandwidth = parse_bandwidth(detail::get<std::string>(j, "bandwidth", "", "rule_of_thumb"));
  est.naive = detail::get(j, "naive", "", true);
  est.eif_diagnostics = detail::get(j, "eif_diagnostics", "", true);
  est.positivity = detail::get(j, "positivity", "", true);
  est.reda_floor_factor = detail::get(j, "reda_floor_factor", "", est.reda_floor_factor);

  if (j.contains("placebo")) {
    const auto& p = j.at("placebo");
    detail::check_keys(p, "placebo", {"enabled", "base", "periods"});
    c.placebo = detail::get(p, "enabled", "placebo", true);
    est.placebo_base = detail::get(p, "base", "placebo", est.placebo_base);
    est.placebo_periods = detail::get(p, "periods", "placebo", est.placebo_periods);
  }

  auto& bo = c.bootstrap_options;
  if (j.contains("bootstrap")) {
    const auto& b = j.at("bootstrap");
    detail::check_keys(b, "bootstrap", {"enabled", "replicates", "interval", "dump_replicates", "max_failure_share"});
    c.bootstrap = detail::get(b, "enabled", "bootstrap", true);
    bo.replicates = detail::get(b, "replicates", "bootstrap", bo.replicates);
    const auto interval = detail::get<std::string>(b, "interval", "bootstrap", "normal");
    if (interval == "normal") bo.interval = IntervalKind::Normal;
    else if (interval == "percentile") bo.interval = IntervalKind::Percentile;
    else throw Error("cli", ErrorKind::InvalidConfig, "field 'bootstrap.interval': expected normal or percentile");
    c.dump_replicates = detail::get(b, "dump_replicates", "bootstrap", false);
    bo.max_failure_share = detail::get(b, "max_failure_share", "bootstrap", bo.max_failure_share);
  }
  if (c.bootstrap && bo.replicates < 2)
    throw Error("cli", ErrorKind::InvalidConfig, "field 'bootstrap.replicates' must be at least 2");
  bo.seed = detail::get<std::uint64_t>(j, "seed", "", 1);
  bo.threads = detail::get(j, "threads", "", 1);
  c.output = detail::resolve(base_dir, detail::get<std::string>(j, "output", "", "out"));

  j.erase("threads");
  c.canonical = std::move(j);
  return c;
}

inline sim::DgpSpec parse_dgp(const json& j) {
  sim::DgpSpec s;
  detail::check_keys(j, "dgp",
                     {"n1", "n0", "periods", "rho", "treated_mean", "dose_law", "dose_mean", "dose_gamma", "dose_sd",
                      "uniform_low", "uniform_high", "curve", "curve_a", "curve_b", "curve_scale", "effect_modifier",
                      "effect_period_slope", "control_trend", "period_drift", "noise_sd", "anticipation",
                      "pre_trend_slope", "pre_trend_base", "interference", "layout", "seed"});
  const std::string w = "dgp";
  s.n1 = detail::get(j, "n1", w, s.n1);
  s.n0 = detail::get(j, "n0", w, s.n0);
  s.periods = detail::get(j, "periods", w, s.periods);
  s.rho = detail::get(j, "rho", w, s.rho);
  s.treated_mean = detail::get(j, "treated_mean", w, s.treated_mean);
  const auto law = detail::get<std::string>(j, "dose_law", w, "gaussian");
  if (law == "gaussian") s.dose_law = sim::DoseLaw::Gaussian;
  else if (law == "uniform") s.dose_law = sim::DoseLaw::Uniform;
  else throw Error("simlab", ErrorKind::InvalidSpec, "field 'dose_law': expected gaussian or uniform");
  s.dose_mean = detail::get(j, "dose_mean", w, s.dose_mean);
  s.dose_gamma = detail::get(j, "dose_gamma", w, s.dose_gamma);
  s.dose_sd = detail::get(j, "dose_sd", w, s.dose_sd);
  s.uniform_low = detail::get(j, "uniform_low", w, s.uniform_low);
  s.uniform_high = detail::get(j, "uniform_high", w, s.uniform_high);
  const auto curve = detail::get<std::string>(j, "curve", w, "affine");
  if (curve == "affine") s.curve = sim::CurveFamily::Affine;
  else if (curve == "saturating") s.curve = sim::CurveFamily::Saturating;
  else if (curve == "flat") s.curve = sim::CurveFamily::Flat;
  else throw Error("simlab", ErrorKind::InvalidSpec, "field 'curve': expected affine, saturating or flat");
  s.curve_a = detail::get(j, "curve_a", w, s.curve_a);
  s.curve_b = detail::get(j, "curve_b", w, s.curve_b);
  s.curve_scale = detail::get(j, "curve_scale", w, s.curve_scale);
  s.effect_modifier = detail::get(j, "effect_modifier", w, s.effect_modifier);
  s.effect_period_slope = detail::get(j, "effect_period_slope", w, s.effect_period_slope);
  s.control_trend = detail::get(j, "control_trend", w, s.control_trend);
  s.period_drift = detail::get(j, "period_drift", w, s.period_drift);
  s.noise_sd = detail::get(j, "noise_sd", w, s.noise_sd);
  s.anticipation = detail::get(j, "anticipation", w, s.anticipation);
  s.pre_trend_slope = detail::get(j, "pre_trend_slope", w, s.pre_trend_slope);
  s.pre_trend_base = detail::get(j, "pre_trend_base", w, s.pre_trend_base);
  s.interference = detail::get(j, "interference", w, s.interference);
  const auto layout = detail::get<std::string>(j, "layout", w, "chain");
  if (layout == "chain") s.layout = sim::ControlLayout::Chain;
  else if (layout == "isolated") s.layout = sim::ControlLayout::Isolated;
  else throw Error("simlab", ErrorKind::InvalidSpec, "field 'layout': expected chain or isolated");
  s.seed = detail::get<std::uint64_t>(j, "seed", w, s.seed);
  sim::validate(s);
  return s;
}

struct SimulationConfig {
  sim::DgpSpec dgp;
  std::filesystem::path output = "sim";
  json canonical;
};

inline SimulationConfig parse_simulation_config(json j, const std::filesystem::path& base_dir) {
  detail::check_keys(j, "", {"dgp", "output", "seed", "threads"});
  SimulationConfig c;
  c.dgp = parse_dgp(j.value("dgp", json::object()));
  if (j.contains("seed")) c.dgp.seed = detail::get<std::uint64_t>(j, "seed", "", 1);
  c.output = detail::resolve(base_dir, detail::get<std::string>(j, "output", "", "sim"));
  j.erase("threads");
  c.canonical = std::move(j);
  return c;
}

struct RobustnessConfig {
  sim::DgpSpec dgp;
  sim::RobustnessOptions options;
  std::filesystem::path output = "robustness";
  json canonical;
};

inline RobustnessConfig parse_robustness_config(json j, const std::filesystem::path& base_dir) {
  detail::check_keys(j, "", {"dgp", "reps", "rows", "period", "learners", "output", "seed", "threads"});
  RobustnessConfig c;
  json dgp = j.value("dgp", json::object());
  if (!dgp.contains("n1")) dgp["n1"] = 1000;
  if (!dgp.contains("n0")) dgp["n0"] = 1000;
  if (!dgp.contains("periods")) dgp["periods"] = 1;
  c.dgp = parse_dgp(dgp);
  if (j.contains("seed")) c.dgp.seed = detail::get<std::uint64_t>(j, "seed", "", 1);
  c.options.reps = detail::get(j, "reps", "", 200);
  if (c.options.reps < 2)
    throw Error("cli", ErrorKind::InvalidConfig, "field 'reps': at least 2 replications are needed for a standard error");
  c.options.rows = detail::get(j, "rows", "", std::vector<std::size_t>{});
  c.options.period = detail::get(j, "period", "", 1);
  c.options.threads = detail::get(j, "threads", "", 1);
  if (j.contains("learners")) {
    const auto& l = j.at("learners");
    detail::check_keys(l, "learners", {"treated_trend", "dose_density", "control_trend", "propensity"});
    auto pair = [&](const char* role, sim::LearnerPair& p) {
      if (!l.contains(role)) return;
      const auto v = detail::get<std::vector<std::string>>(l, role, "learners", {});
      if (v.size() != 2)
        throw Error("cli", ErrorKind::InvalidConfig, std::string("field 'learners.") + role + "' must be [good, bad]");
      for (const auto& id : v) {
        try {
          check_learner(role, id);
        } catch (const Error& e) {
          throw Error("cli", ErrorKind::UnknownLearner, std::string("field 'learners.") + role + "': " + e.what());
        }
      }
      p = {v[0], v[1]};
    };
    pair("treated_trend", c.options.learners.treated_trend);
    pair("dose_density", c.options.learners.dose_density);
    pair("control_trend", c.options.learners.control_trend);
    pair("propensity", c.options.learners.propensity);
  }
  c.output = detail::resolve(base_dir, detail::get<std::string>(j, "output", "", "robustness"));
  j.erase("threads");
  j["dgp"] = dgp;
  c.canonical = std::move(j);
  return c;
}

}  // namespace dosedid
