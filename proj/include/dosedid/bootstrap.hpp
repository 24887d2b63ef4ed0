#pragma once

// Weighted overlapping-block bootstrap. Each block is a zip together with
// its adjacent zips; a unit's weight is the sum of the Exp(1) draws of every
// block that contains it, rescaled so the mean weight within each treatment
// group is one. Weights are per unit and therefore constant over periods.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "dosedid/csv.hpp"
#include "dosedid/errors.hpp"
#include "dosedid/estimators.hpp"
#include "dosedid/panel.hpp"

namespace dosedid {

struct BlockStructure {
  std::vector<std::string> zips;                 // block centre
  std::vector<std::vector<std::size_t>> blocks;  // panel unit indices
  std::vector<int> membership;                   // per panel unit: number of blocks
  std::size_t size() const { return blocks.size(); }
};

inline BlockStructure build_blocks(const PanelDataset& panel) {
  BlockStructure bs;
  bs.membership.assign(panel.units.size(), 0);
  std::map<std::string, std::vector<std::size_t>> by_zip;
  for (auto i : panel.analytic_units()) by_zip[panel.units[i].zip_id].push_back(i);
  for (const auto& [zip, _] : panel.graph.taxed) {
    std::vector<std::size_t> members;
    for (const auto& z : panel.graph.neighborhood(zip)) {
      auto it = by_zip.find(z);
      if (it != by_zip.end()) members.insert(members.end(), it->second.begin(), it->second.end());
    }
    if (members.empty()) continue;
    std::sort(members.begin(), members.end());
    for (auto i : members) ++bs.membership[i];
    bs.zips.push_back(zip);
    bs.blocks.push_back(std::move(members));
  }
  return bs;
}

struct BootstrapWeights {
  std::vector<double> block_draws;  // gamma_b
  std::vector<double> raw;          // gamma_i, per panel unit
  std::vector<double> normalized;   // per panel unit; 0 for non-analytic units
};

// Steps 2-3: gamma_i = sum_b 1{i in b} gamma_b, then divide by the group mean.
inline BootstrapWeights weights_from_draws(const BlockStructure& blocks, const PanelDataset& panel,
                                           std::vector<double> draws) {
  if (draws.size() != blocks.size())
    throw Error("bootstrap", ErrorKind::InvalidInput, "one draw per block required");
  BootstrapWeights w;
  w.block_draws = std::move(draws);
  w.raw.assign(panel.units.size(), 0.0);
  for (std::size_t b = 0; b < blocks.size(); ++b)
    for (auto i : blocks.blocks[b]) w.raw[i] += w.block_draws[b];
  double sum[2] = {0, 0};
  double count[2] = {0, 0};
  for (auto i : panel.analytic_units()) {
    const int g = panel.units[i].group;
    sum[g] += w.raw[i];
    count[g] += 1;
  }
  w.normalized.assign(panel.units.size(), 0.0);
  for (auto i : panel.analytic_units()) {
    const int g = panel.units[i].group;
    w.normalized[i] = w.raw[i] * count[g] / sum[g];
  }
  return w;
}

// Stream for replicate r, independent of execution order.
inline std::mt19937_64 replicate_engine(std::uint64_t seed, std::uint64_t replicate) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replicate), static_cast<std::uint32_t>(replicate >> 32), 0x5eedu};
  return std::mt19937_64(seq);
}

inline BootstrapWeights draw_weights(const BlockStructure& blocks, const PanelDataset& panel, std::uint64_t seed,
                                     std::uint64_t replicate = 0) {
  auto eng = replicate_engine(seed, replicate);
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> draws(blocks.size());
  for (auto& d : draws) d = expo(eng);
  return weights_from_draws(blocks, panel, std::move(draws));
}

enum class IntervalKind { Normal, Percentile };

struct BootstrapOptions {
  int replicates = 1000;
  std::uint64_t seed = 1;
  int threads = 1;
  IntervalKind interval = IntervalKind::Normal;
  double max_failure_share = 0.02;
  bool unit_weights = false;  // testing hook: every weight is one
};

struct BootstrapResult {
  std::vector<std::string> labels;
  std::vector<double> point;
  std::vector<std::vector<double>> replicates;  // R x K, NaN where undefined
  std::vector<double> sigma, lower, upper;
  int failed = 0;
  std::vector<std::string> failures;  // first message per failed replicate
  int replicate_count() const { return static_cast<int>(replicates.size()); }
};

// Statistic over a weight vector (indexed by panel unit).
using BootstrapStatistic = std::function<std::vector<double>(const std::vector<double>&)>;

inline void summarise_replicates(BootstrapResult& r, IntervalKind kind) {
  const auto k = r.point.size();
  r.sigma.assign(k, std::numeric_limits<double>::quiet_NaN());
  r.lower = r.upper = r.sigma;
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<double> v;
    for (const auto& rep : r.replicates)
      if (rep.size() == k && std::isfinite(rep[j])) v.push_back(rep[j]);
    if (v.size() < 2 || !std::isfinite(r.point[j])) continue;
    r.sigma[j] = stats::sample_sd(v);
    if (kind == IntervalKind::Normal) {
      r.lower[j] = r.point[j] - 1.96 * r.sigma[j];
      r.upper[j] = r.point[j] + 1.96 * r.sigma[j];
    } else {
      r.lower[j] = stats::quantile(v, 0.025);
      r.upper[j] = stats::quantile(v, 0.975);
    }
  }
}

inline BootstrapResult run_bootstrap(const PanelDataset& panel, const BlockStructure& blocks,
                                     const BootstrapOptions& opt, std::vector<std::string> labels,
                                     std::vector<double> point, const BootstrapStatistic& stat) {
  if (opt.replicates < 2) throw Error("bootstrap", ErrorKind::InvalidInput, "at least two replicates required");
  BootstrapResult res;
  res.labels = std::move(labels);
  res.point = std::move(point);
  const auto R = static_cast<std::size_t>(opt.replicates);
  res.replicates.assign(R, {});
  std::vector<std::string> errors(R);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t r = next++; r < R; r = next++) {
      try {
        std::vector<double> w;
        if (opt.unit_weights) {
          w.assign(panel.units.size(), 0.0);
          for (auto i : panel.analytic_units()) w[i] = 1.0;
        } else {
          w = draw_weights(blocks, panel, opt.seed, r).normalized;
        }
        res.replicates[r] = stat(w);
      } catch (const Error& e) {
        errors[r] = e.what();
      }
    }
  };
  const int nt = std::max(1, std::min<int>(opt.threads, opt.replicates));
  if (nt == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (std::size_t r = 0; r < R; ++r)
    if (!errors[r].empty()) {
      ++res.failed;
      res.failures.push_back("replicate " + std::to_string(r) + ": " + errors[r]);
    }
  if (res.failed > opt.max_failure_share * static_cast<double>(R))
    throw Error("bootstrap", ErrorKind::BootstrapAborted,
                std::to_string(res.failed) + " of " + std::to_string(R) + " replicates failed; first: " +
                    res.failures.front());
  summarise_replicates(res, opt.interval);
  return res;
}

// ---------------------------------------------------------------------------
// Flattening of EffectEstimates into the bootstrapped quantities.

inline void append_estimates(const EffectEstimates& e, std::vector<std::string>* labels, std::vector<double>& v) {
  auto nan_if = [](const std::optional<double>& x) { return x ? *x : std::numeric_limits<double>::quiet_NaN(); };
  auto add = [&](const std::string& l, double x) {
    if (labels) labels->push_back(l);
    v.push_back(x);
  };
  add("att", e.att);
  add("adutt", e.adutt);
  add("reda", nan_if(e.reda));
  for (Eigen::Index g = 0; g < e.curve.values.size(); ++g) add("adt[" + std::to_string(g) + "]", e.curve.values(g));
  if (e.naive)
    for (Eigen::Index g = 0; g < e.naive->values.size(); ++g)
      add("naive[" + std::to_string(g) + "]", e.naive->values(g));
  for (const auto& pe : e.periods) {
    const auto m = std::to_string(pe.period);
    add("att@" + m, pe.att);
    add("adutt@" + m, pe.adutt);
    add("reda@" + m, nan_if(pe.reda));
  }
}

inline void apply_bands(EffectCurve& c, const BootstrapResult& r, std::size_t offset) {
  const auto g = c.values.size();
  c.se.resize(g);
  c.lower.resize(g);
  c.upper.resize(g);
  for (Eigen::Index i = 0; i < g; ++i) {
    const auto j = offset + static_cast<std::size_t>(i);
    c.se(i) = r.sigma[j];
    c.lower(i) = r.lower[j];
    c.upper(i) = r.upper[j];
  }
}

struct BootstrapAnalysis {
  EffectEstimates estimates;  // full sample, bands filled
  BootstrapResult result;
  BlockStructure blocks;
  CurvePlan plan;
};

inline std::size_t label_index(const BootstrapResult& r, const std::string& label) {
  auto it = std::find(r.labels.begin(), r.labels.end(), label);
  if (it == r.labels.end()) throw Error("bootstrap", ErrorKind::InvalidInput, "no bootstrapped quantity '" + label + "'");
  return static_cast<std::size_t>(it - r.labels.begin());
}

// Full-sample analysis, then R weighted replicates with every nuisance refit
// under the replicate weights. The dose grid and bandwidths stay at their
// full-sample values so replicate curves are comparable pointwise.
inline BootstrapAnalysis bootstrap_analysis(const PanelDataset& panel, DriverKind driver, const EstimationConfig& cfg,
                                            const BootstrapOptions& opt) {
  BootstrapAnalysis out;
  const auto prepared = prepare_driver(panel, driver);
  out.estimates = run_period_analysis(panel, prepared, cfg, {}, out.plan, true);
  out.plan.frozen = true;
  out.blocks = build_blocks(panel);
  std::vector<std::string> labels;
  std::vector<double> point;
  append_estimates(out.estimates, &labels, point);
  const CurvePlan plan = out.plan;
  auto stat = [&](const std::vector<double>& w) {
    CurvePlan local = plan;
    const auto e = run_period_analysis(panel, prepared, cfg, w, local, false);
    std::vector<double> v;
    append_estimates(e, nullptr, v);
    return v;
  };
  out.result = run_bootstrap(panel, out.blocks, opt, std::move(labels), std::move(point), stat);
  auto& est = out.estimates;
  est.att_se = out.result.sigma[label_index(out.result, "att")];
  est.adutt_se = out.result.sigma[label_index(out.result, "adutt")];
  est.reda_se = out.result.sigma[label_index(out.result, "reda")];
  apply_bands(est.curve, out.result, label_index(out.result, "adt[0]"));
  if (est.naive) apply_bands(*est.naive, out.result, label_index(out.result, "naive[0]"));
  return out;
}

struct PlaceboBootstrap {
  PlaceboResult placebo;
  BootstrapResult result;
};

// Bands for every pseudo-period curve and their average.
inline PlaceboBootstrap bootstrap_placebo(const PanelDataset& panel, DriverKind driver, const EstimationConfig& cfg,
                                          const BootstrapOptions& opt) {
  PlaceboBootstrap out;
  const auto prepared = prepare_driver(panel, driver);
  CurvePlan plan;
  out.placebo = placebo_curve(panel, prepared, cfg, {}, plan);
  plan.frozen = true;
  auto flatten = [](const PlaceboResult& p, std::vector<std::string>* labels) {
    std::vector<double> v;
    auto add_curve = [&](const EffectCurve& c, const std::string& tag) {
      for (Eigen::Index g = 0; g < c.values.size(); ++g) {
        if (labels) labels->push_back(tag + "[" + std::to_string(g) + "]");
        v.push_back(c.values(g));
      }
    };
    add_curve(p.average, "placebo");
    for (const auto& c : p.curves) add_curve(c, "placebo@" + std::to_string(c.period));
    return v;
  };
  std::vector<std::string> labels;
  auto point = flatten(out.placebo, &labels);
  const auto blocks = build_blocks(panel);
  auto stat = [&](const std::vector<double>& w) {
    CurvePlan local = plan;
    return flatten(placebo_curve(panel, prepared, cfg, w, local), nullptr);
  };
  out.result = run_bootstrap(panel, blocks, opt, std::move(labels), std::move(point), stat);
  apply_bands(out.placebo.average, out.result, 0);
  std::size_t offset = static_cast<std::size_t>(out.placebo.average.values.size());
  for (auto& c : out.placebo.curves) {
    apply_bands(c, out.result, offset);
    offset += static_cast<std::size_t>(c.values.size());
  }
  return out;
}

inline void write_replicates_csv(const BootstrapResult& r, const std::string& path,
                                 const std::vector<std::string>& header_lines = {}) {
  csv::Writer out(path);
  for (const auto& h : header_lines) out.comment(h);
  std::vector<std::string> head{"replicate"};
  head.insert(head.end(), r.labels.begin(), r.labels.end());
  out.row(head);
  for (std::size_t i = 0; i < r.replicates.size(); ++i) {
    std::vector<std::string> row{std::to_string(i)};
    if (r.replicates[i].empty()) {
      row.resize(r.labels.size() + 1, "NA");
    } else {
      for (double v : r.replicates[i]) row.push_back(csv::format(v));
    }
    out.row(row);
  }
}

}  // namespace dosedid
