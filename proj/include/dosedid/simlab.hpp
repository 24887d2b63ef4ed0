#pragma once

// Synthetic panels with known ATT / ADT / ADUTT, the multiply-robust
// misspecification experiment, and a naive-loop oracle for the estimators.
//
// Data-generating process (per analytic unit i, period m, time t):
//   X | A=a      ~ N(m_a, Sigma),  m_0 = -m_1, unit variances, correlation rho
//   D | A=1, X   ~ N(d0 + g'(X - m_1), sd_D^2)      (or Uniform(lo, hi))
//   dY           = g0(X) + b_m + A k_m [f(D) + c (x1 - m_11) D] + noise
// with g0(X) = trend'(1, x1, x2). Hence ADT(d) = k_m f(d),
// ADUTT = k_m E f(D) and ATT = k_m (E f(D) + c Cov(x1, D | A=1)).
//
// The dose reaches the estimators through the competition exposure: each
// treated unit sits alone in a taxed zip next to one price-only reference
// store, so own post price minus the reference price equals D exactly.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "dosedid/bootstrap.hpp"
#include "dosedid/errors.hpp"
#include "dosedid/estimators.hpp"
#include "dosedid/nuisance.hpp"
#include "dosedid/panel.hpp"

namespace dosedid::sim {

enum class CurveFamily { Affine, Saturating, Flat };
enum class DoseLaw { Gaussian, Uniform };
enum class ControlLayout { Chain, Isolated };

inline std::string to_string(CurveFamily c) {
  switch (c) {
    case CurveFamily::Affine: return "affine";
    case CurveFamily::Saturating: return "saturating";
    case CurveFamily::Flat: return "flat";
  }
  return "?";
}

struct DgpSpec {
  int n1 = 140;
  int n0 = 123;
  int periods = 13;

  double rho = 0.3;
  std::array<double, 2> treated_mean{0.5, 0.25};

  DoseLaw dose_law = DoseLaw::Gaussian;
  double dose_mean = 1.2;
  std::array<double, 2> dose_gamma{0.35, 0.0};  // confounding strength
  double dose_sd = 0.5;
  double uniform_low = 0.0;
  double uniform_high = 5.0;

  // f(d): affine a + b d; saturating a + b (1 - exp(-d / s)); flat a.
  CurveFamily curve = CurveFamily::Affine;
  double curve_a = -10.0;
  double curve_b = -4.0;
  double curve_scale = 1.0;
  double effect_modifier = 4.0;      // c
  double effect_period_slope = 0.0;  // k_m = 1 + slope (m - (M+1)/2)

  std::array<double, 3> control_trend{-10.0, 8.0, 3.0};
  double period_drift = 0.5;  // b_m = drift * m
  double noise_sd = 2.0;      // sd of the dY noise

  // Assumption violations, all off by default.
  double anticipation = 0.0;    // added to treated pre-period outcomes
  double pre_trend_slope = 0.0; // s D added to treated pre outcomes for m > pre_trend_base
  int pre_trend_base = 4;
  double interference = 0.0;    // kappa mean(D) added to control post outcomes

  ControlLayout layout = ControlLayout::Chain;
  std::uint64_t seed = 1;
};

inline void validate(const DgpSpec& s) {
  auto fail = [](const std::string& field, const std::string& why) {
    throw Error("simlab", ErrorKind::InvalidSpec, "field '" + field + "': " + why);
  };
  if (s.n1 < 2) fail("n1", "need at least 2 treated units");
  if (s.n0 < 2) fail("n0", "need at least 2 control units");
  if (s.periods < 1) fail("periods", "must be positive");
  if (!(std::abs(s.rho) < 1)) fail("rho", "must lie in (-1, 1)");
  if (!(s.dose_sd > 0)) fail("dose_sd", "must be positive");
  if (!(s.uniform_high > s.uniform_low)) fail("uniform_high", "must exceed uniform_low");
  if (!(s.curve_scale > 0)) fail("curve_scale", "must be positive");
  if (!(s.noise_sd >= 0)) fail("noise_sd", "must be nonnegative");
  if (s.pre_trend_base < 1) fail("pre_trend_base", "must be a period index");
}

struct GroundTruth {
  DgpSpec spec;
  double mean_f = 0.0;         // E f(D | A=1), closed form
  double mean_f_quadrature = 0.0;
  double cov_x1_dose = 0.0;    // Cov(x1, D | A=1)

  double period_factor(int m) const {
    return 1.0 + spec.effect_period_slope * (m - 0.5 * (spec.periods + 1));
  }
  double f(double d) const {
    switch (spec.curve) {
      case CurveFamily::Affine: return spec.curve_a + spec.curve_b * d;
      case CurveFamily::Saturating: return spec.curve_a + spec.curve_b * (1.0 - std::exp(-d / spec.curve_scale));
      case CurveFamily::Flat: return spec.curve_a;
    }
    return 0.0;
  }
  double adt(double d, int m) const { return period_factor(m) * f(d); }
  double adutt(int m) const { return period_factor(m) * mean_f; }
  double att(int m) const { return period_factor(m) * (mean_f + spec.effect_modifier * cov_x1_dose); }
  double reda(int m) const { return (att(m) - adutt(m)) / att(m); }

  double window_factor(int first, int last) const {
    double s = 0;
    for (int m = first; m <= last; ++m) s += period_factor(m);
    return s / (last - first + 1);
  }
  double window_att(int first, int last) const {
    return window_factor(first, last) * (mean_f + spec.effect_modifier * cov_x1_dose);
  }
  double window_adutt(int first, int last) const { return window_factor(first, last) * mean_f; }
  double window_adt(double d, int first, int last) const { return window_factor(first, last) * f(d); }
  double window_reda(int first, int last) const {
    const double a = window_att(first, last);
    return (a - window_adutt(first, last)) / a;
  }
};

inline double dose_variance(const DgpSpec& s) {
  const auto& g = s.dose_gamma;
  return g[0] * g[0] + g[1] * g[1] + 2 * s.rho * g[0] * g[1] + s.dose_sd * s.dose_sd;
}

// E f(D) by midpoint quadrature over +-12 sd (Gaussian) or the support.
inline double mean_f_by_quadrature(const GroundTruth& t, long nodes = 1000000) {
  const auto& s = t.spec;
  double lo, hi;
  if (s.dose_law == DoseLaw::Gaussian) {
    const double sd = std::sqrt(dose_variance(s));
    lo = s.dose_mean - 12 * sd;
    hi = s.dose_mean + 12 * sd;
  } else {
    lo = s.uniform_low;
    hi = s.uniform_high;
  }
  const double h = (hi - lo) / static_cast<double>(nodes);
  const double var = dose_variance(s);
  double acc = 0.0;
  for (long k = 0; k < nodes; ++k) {
    const double d = lo + (static_cast<double>(k) + 0.5) * h;
    const double dens = s.dose_law == DoseLaw::Gaussian ? stats::normal_pdf(d, s.dose_mean, var) : 1.0 / (hi - lo);
    acc += t.f(d) * dens;
  }
  return acc * h;
}

inline GroundTruth ground_truth(const DgpSpec& s, bool with_quadrature = true) {
  validate(s);
  GroundTruth t;
  t.spec = s;
  const double a = s.curve_a, b = s.curve_b, sc = s.curve_scale;
  if (s.dose_law == DoseLaw::Gaussian) {
    const double v = dose_variance(s);
    switch (s.curve) {
      case CurveFamily::Affine: t.mean_f = a + b * s.dose_mean; break;
      case CurveFamily::Saturating: t.mean_f = a + b * (1.0 - std::exp(-s.dose_mean / sc + v / (2 * sc * sc))); break;
      case CurveFamily::Flat: t.mean_f = a; break;
    }
    t.cov_x1_dose = s.dose_gamma[0] + s.rho * s.dose_gamma[1];
  } else {
    const double lo = s.uniform_low, hi = s.uniform_high;
    switch (s.curve) {
      case CurveFamily::Affine: t.mean_f = a + b * 0.5 * (lo + hi); break;
      case CurveFamily::Saturating:
        t.mean_f = a + b * (1.0 - sc * (std::exp(-lo / sc) - std::exp(-hi / sc)) / (hi - lo));
        break;
      case CurveFamily::Flat: t.mean_f = a; break;
    }
    t.cov_x1_dose = 0.0;
  }
  t.mean_f_quadrature = with_quadrature ? mean_f_by_quadrature(t) : t.mean_f;
  return t;
}

struct Simulated {
  PanelDataset panel;
  GroundTruth truth;
  std::vector<double> dose;  // latent D per treated analytic unit, panel order
};

inline std::string padded(char prefix, int k) {
  std::string s = std::to_string(k);
  return std::string(1, prefix) + std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

inline Simulated generate(const DgpSpec& s, bool with_quadrature = true) {
  Simulated out;
  out.truth = ground_truth(s, with_quadrature);
  const auto& truth = out.truth;
  std::mt19937_64 eng(s.seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double cell_sd = s.noise_sd / std::sqrt(2.0);
  const int M = s.periods;

  auto& p = out.panel;
  p.n_periods = M;
  p.covariate_names = {"x1", "x2"};
  auto& g = p.graph;
  g.taxed["S0000"] = false;
  g.centroids["S0000"] = {39.95, -75.40};
  g.adjacency["S0000"];

  std::vector<std::array<double, 2>> xs;
  auto draw_x = [&](int group) {
    const double sign = group == 1 ? 1.0 : -1.0;
    const double z1 = z(eng), z2 = z(eng);
    return std::array<double, 2>{sign * s.treated_mean[0] + z1,
                                 sign * s.treated_mean[1] + s.rho * z1 + std::sqrt(1 - s.rho * s.rho) * z2};
  };
  auto fill_outcomes = [&](UnitRecord& u, const std::array<double, 2>& x, double effect_base) {
    const double level = 2.0 * x[0] + x[1] + z(eng);
    const double trend = s.control_trend[0] + s.control_trend[1] * x[0] + s.control_trend[2] * x[1];
    for (int m = 1; m <= M; ++m) {
      u.covariates[static_cast<std::size_t>(m - 1)] = {x[0], x[1]};
      const double pre = level + 0.25 * m + cell_sd * z(eng);
      const double post = level + 0.25 * m + trend + s.period_drift * m +
                          (u.group == 1 ? truth.period_factor(m) * effect_base : 0.0) + cell_sd * z(eng);
      u.outcomes[0][static_cast<std::size_t>(m - 1)] = pre;
      u.outcomes[1][static_cast<std::size_t>(m - 1)] = post;
    }
  };

  // Treated: one taxed zip per unit with a reference store.
  for (int i = 1; i <= s.n1; ++i) {
    const std::string zip = padded('T', i);
    g.taxed[zip] = true;
    g.centroids[zip] = {39.95 + 0.1 * (u01(eng) - 0.5), -75.15 + 0.16 * (u01(eng) - 0.5)};
    g.adjacency[zip];
    const auto x = draw_x(1);
    double d;
    if (s.dose_law == DoseLaw::Gaussian) {
      d = s.dose_mean + s.dose_gamma[0] * (x[0] - s.treated_mean[0]) + s.dose_gamma[1] * (x[1] - s.treated_mean[1]) +
          s.dose_sd * z(eng);
    } else {
      d = s.uniform_low + (s.uniform_high - s.uniform_low) * u01(eng);
    }
    const double ref = 3.0 + 2.0 * u01(eng);
    const double pass = 0.8 + 0.2 * z(eng);
    const double ref_pre_noise = 0.25 * z(eng);

    UnitRecord u;
    u.unit_id = padded('t', i);
    u.group = 1;
    u.zip_id = zip;
    u.resize(M, 2);
    fill_outcomes(u, x, truth.f(d) + s.effect_modifier * (x[0] - s.treated_mean[0]) * d);
    for (int m = 1; m <= M; ++m) {
      u.prices[1][static_cast<std::size_t>(m - 1)] = ref + d;
      u.prices[0][static_cast<std::size_t>(m - 1)] = ref + d - pass;
    }
    UnitRecord aux;
    aux.unit_id = padded('r', i);
    aux.group = 1;
    aux.zip_id = zip;
    aux.analytic = false;
    aux.resize(M, 2);
    for (int m = 1; m <= M; ++m) {
      aux.prices[1][static_cast<std::size_t>(m - 1)] = ref;
      aux.prices[0][static_cast<std::size_t>(m - 1)] = ref + ref_pre_noise;
    }
    p.units.push_back(std::move(u));
    p.units.push_back(std::move(aux));
    out.dose.push_back(d);
  }

  double mean_dose = 0;
  for (double d : out.dose) mean_dose += d;
  mean_dose /= static_cast<double>(out.dose.size());

  // Controls: one untaxed zip per unit, far from the treated region.
  for (int i = 1; i <= s.n0; ++i) {
    const std::string zip = padded('C', i);
    g.taxed[zip] = false;
    g.centroids[zip] = {42.0 + 0.01 * i, -78.0};
    g.adjacency[zip];
    if (s.layout == ControlLayout::Chain && i > 1) {
      const std::string prev = padded('C', i - 1);
      g.adjacency[zip].insert(prev);
      g.adjacency[prev].insert(zip);
    }
    UnitRecord u;
    u.unit_id = padded('c', i);
    u.group = 0;
    u.zip_id = zip;
    u.resize(M, 2);
    fill_outcomes(u, draw_x(0), 0.0);
    if (s.interference != 0.0)
      for (auto& y : u.outcomes[1]) y += s.interference * mean_dose;
    p.units.push_back(std::move(u));
  }

  // Violations on treated pre-period outcomes.
  std::size_t k = 0;
  for (auto& u : p.units) {
    if (!u.analytic || u.group != 1) continue;
    const double d = out.dose[k++];
    for (int m = 1; m <= M; ++m) {
      auto& y = u.outcomes[0][static_cast<std::size_t>(m - 1)];
      y += s.anticipation;
      if (m > s.pre_trend_base) y += s.pre_trend_slope * d;
    }
  }
  p.index_members();
  p.validate();
  return out;
}

// ---------------------------------------------------------------------------
// Naive-loop oracle on literal nuisance tables.

struct OracleInput {
  std::vector<int> a;
  std::vector<double> dy, mu0, pi_a;
  std::vector<std::size_t> treated;          // unit index of each dose row
  std::vector<std::vector<double>> mu1;      // [i][j] = mu1(X_j, D_i), treated rows
  std::vector<std::vector<double>> pid;      // [i][j] = piD(X_j, D_i)
};

struct OracleOutput {
  std::vector<double> tau, xi, m, pd;
  double p = 0, att = 0, adutt = 0;
};

inline OracleOutput brute_force_oracle(const OracleInput& in) {
  OracleOutput o;
  const std::size_t n = in.a.size(), n1 = in.treated.size();
  double treated = 0;
  for (std::size_t i = 0; i < n; ++i) treated += in.a[i];
  o.p = treated / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    double t;
    if (in.a[i] == 1) {
      t = in.mu0[i] / o.p;
    } else {
      t = in.pi_a[i] * (in.dy[i] - in.mu0[i]);
      t = t / (o.p * (1 - in.pi_a[i]));
    }
    o.tau.push_back(t);
  }
  for (std::size_t i = 0; i < n1; ++i) {
    double sm = 0, sp = 0;
    for (std::size_t j = 0; j < n1; ++j) {
      sm += in.mu1[i][j];
      sp += in.pid[i][j];
    }
    o.m.push_back(sm / static_cast<double>(n1));
    o.pd.push_back(sp / static_cast<double>(n1));
    const double resid = in.dy[in.treated[i]] - in.mu1[i][i];
    o.xi.push_back(resid * o.pd[i] / in.pid[i][i] + o.m[i]);
  }
  double att = 0, adutt = 0;
  for (std::size_t i = 0; i < n; ++i) {
    att += in.a[i] * in.dy[i] / o.p - o.tau[i];
    adutt -= o.tau[i];
  }
  for (std::size_t i = 0; i < n1; ++i) adutt += o.xi[i] / o.p;
  o.att = att / static_cast<double>(n);
  o.adutt = adutt / static_cast<double>(n);
  return o;
}

// ---------------------------------------------------------------------------
// Misspecification experiment.

// Good / Bad learner per nuisance.
struct LearnerPair {
  std::string good, bad;
};

struct RobustnessLearners {
  LearnerPair treated_trend{"ols_dx", "ols_dx:omit=x1"};
  LearnerPair dose_density{"gaussian", "gaussian_marginal"};
  LearnerPair control_trend{"ols", "ols:omit=x1"};
  LearnerPair propensity{"logit", "logit_marginal"};
};

// Columns: mu1, piD, mu0, piA (true = Good).
struct RobustnessPattern {
  std::array<bool, 4> good;
  bool att_biased;
  bool adutt_biased;
};

inline const std::vector<RobustnessPattern>& table_one_patterns() {
  static const std::vector<RobustnessPattern> rows = {
      {{true, true, true, true}, false, false},     {{true, true, true, false}, false, false},
      {{true, true, false, true}, false, false},    {{true, false, true, true}, false, false},
      {{false, true, true, true}, false, false},    {{true, false, true, false}, false, false},
      {{false, true, false, true}, false, false},   {{true, false, false, true}, false, false},
      {{false, true, true, false}, false, false},   {{false, false, true, true}, false, true},
      {{false, false, true, false}, false, true},   {{false, false, false, true}, false, true},
      {{true, true, false, false}, true, true},     {{true, false, false, false}, true, true},
      {{false, true, false, false}, true, true},    {{false, false, false, false}, true, true},
  };
  return rows;
}

struct RobustnessRow {
  RobustnessPattern pattern;
  int reps = 0;
  double att_bias = 0, att_se = 0;
  double adutt_bias = 0, adutt_se = 0;
  bool att_biased = false, adutt_biased = false;
  bool agrees() const { return att_biased == pattern.att_biased && adutt_biased == pattern.adutt_biased; }
};

struct RobustnessOptions {
  int reps = 200;
  int threads = 1;
  std::vector<std::size_t> rows;  // empty: all 16
  int period = 1;
  RobustnessLearners learners;
};

// Every row shares the same simulated datasets (common random numbers); each
// nuisance is fitted once per learner and combined per row.
inline std::vector<RobustnessRow> robustness_experiment(const DgpSpec& spec, const RobustnessOptions& opt) {
  if (opt.reps < 2)
    throw Error("simlab", ErrorKind::InvalidSpec, "field 'reps': at least 2 replications are needed for a standard error");
  const auto& all = table_one_patterns();
  std::vector<std::size_t> rows = opt.rows;
  if (rows.empty())
    for (std::size_t r = 0; r < all.size(); ++r) rows.push_back(r);
  for (auto r : rows)
    if (r >= all.size()) throw Error("simlab", ErrorKind::InvalidSpec, "field 'rows': index out of range");
  const auto truth = ground_truth(spec, false);
  const double att_true = truth.att(opt.period), adutt_true = truth.adutt(opt.period);

  const auto R = static_cast<std::size_t>(opt.reps);
  std::vector<std::vector<double>> att(rows.size(), std::vector<double>(R)), adutt = att;
  std::vector<std::string> errors(R);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t rep = next++; rep < R; rep = next++) {
      try {
        DgpSpec s = spec;
        s.seed = spec.seed * 1000003ULL + rep;
        const auto sim = generate(s, false);
        const auto prepared = prepare_driver(sim.panel, DriverKind::Competition);
        const auto slice = slice_matched_period(sim.panel, opt.period);
        const auto frame = make_frame(slice, prepared.assignment.dose, prepared.assignment.adjustment);
        const Eigen::VectorXd w = Eigen::VectorXd::Ones(frame.n());
        std::array<TrendModel, 2> mu1, mu0;
        std::array<PropensityModel, 2> pia;
        std::array<DoseDensityModel, 2> pid;
        const auto& L = opt.learners;
        for (int v = 0; v < 2; ++v) {
          mu1[v] = fit_trend(frame, TrendTarget::Treated, v ? L.treated_trend.bad : L.treated_trend.good, w);
          mu0[v] = fit_trend(frame, TrendTarget::Control, v ? L.control_trend.bad : L.control_trend.good, w);
          pia[v] = fit_propensity(frame, v ? L.propensity.bad : L.propensity.good, w);
          pid[v] = fit_dose_density(frame, v ? L.dose_density.bad : L.dose_density.good, w);
        }
        // Evaluate each fitted nuisance once.
        NuisanceModels proto;
        std::array<NuisanceValues, 2> part;
        for (int v = 0; v < 2; ++v) {
          proto.treated_trend = mu1[v];
          proto.control_trend = mu0[v];
          proto.propensity = pia[v];
          proto.dose_density = pid[v];
          part[v] = evaluate_nuisances(proto, frame);
        }
        for (std::size_t k = 0; k < rows.size(); ++k) {
          const auto& g = all[rows[k]].good;
          NuisanceValues vals;
          vals.mu1_cross = part[g[0] ? 0 : 1].mu1_cross;
          vals.pid_cross = part[g[1] ? 0 : 1].pid_cross;
          vals.mu0 = part[g[2] ? 0 : 1].mu0;
          vals.pi_a = part[g[3] ? 0 : 1].pi_a;
          const auto eif = compute_eif(frame, vals, w);
          att[k][rep] = estimate_att(frame, eif, w);
          adutt[k][rep] = estimate_adutt(frame, eif, w);
        }
      } catch (const Error& e) {
        errors[rep] = e.what();
      }
    }
  };
  const int nt = std::max(1, opt.threads);
  if (nt == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (std::size_t rep = 0; rep < R; ++rep)
    if (!errors[rep].empty())
      throw Error("simlab", ErrorKind::InvalidSpec, "replication " + std::to_string(rep) + " failed: " + errors[rep]);

  std::vector<RobustnessRow> out;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    RobustnessRow row;
    row.pattern = all[rows[k]];
    row.reps = opt.reps;
    auto summarise = [&](const std::vector<double>& v, double truth_value, double& bias, double& se) {
      bias = stats::mean(v) - truth_value;
      se = stats::sample_sd(v) / std::sqrt(static_cast<double>(v.size()));
    };
    summarise(att[k], att_true, row.att_bias, row.att_se);
    summarise(adutt[k], adutt_true, row.adutt_bias, row.adutt_se);
    row.att_biased = !(std::abs(row.att_bias) < 3 * row.att_se);
    row.adutt_biased = !(std::abs(row.adutt_bias) < 3 * row.adutt_se);
    out.push_back(row);
  }
  return out;
}

// Parallel Monte Carlo: fn(rep) for rep = 0..reps-1.
template <typename Fn>
void monte_carlo(int reps, int threads, Fn&& fn) {
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int r = next++; r < reps; r = next++) fn(r);
  };
  if (threads <= 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

}  // namespace dosedid::sim
