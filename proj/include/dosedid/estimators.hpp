#pragma once

// Influence-function based estimators of the ATT, the dose-response curve
// ADT(delta), the dose-unconfounded effect ADUTT and REDA.
//
// Per period, with P = P(A=1) the (weighted) treated share:
//
//   tau_i = (1-A_i) piA_i (dY_i - mu0_i) / (P (1 - piA_i)) + A_i mu0_i / P
//   xi_i  = (dY_i - mu1(X_i, D_i)) p(D_i|A=1) / piD(X_i, D_i) + m(D_i|A=1)   (treated)
//
// where m(D|A=1) and p(D|A=1) average mu1(X_j, D) and piD(X_j, D) over the
// treated j. Written with m outside the ratio; this is the same quantity as
// the form that folds m into the leading term.
//
//   ATT      = mean_i [A_i/P dY_i - tau_i]
//   ADT(d)   = theta(d) - mean_i tau_i,  theta = local linear fit of xi on D
//   ADUTT    = mean_i [A_i/P xi_i - tau_i]
//   REDA     = (ATT - ADUTT) / ATT
//
// All means are weighted by the bootstrap weights (ones for the point
// estimate).

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dosedid/exposure.hpp"
#include "dosedid/frame.hpp"
#include "dosedid/nuisance.hpp"
#include "dosedid/panel.hpp"
#include "dosedid/smoother.hpp"
#include "dosedid/stats.hpp"

namespace dosedid {

// Nuisance functions evaluated at the points the estimators need.
struct NuisanceValues {
  Eigen::VectorXd mu0;        // n
  Eigen::VectorXd pi_a;       // n, clipped
  Eigen::MatrixXd mu1_cross;  // n1 x n1, (i, j) = mu1(X_j, D_i)
  Eigen::MatrixXd pid_cross;  // n1 x n1, (i, j) = piD(X_j, D_i), floored
  Eigen::Index propensity_clipped = 0;
};

inline NuisanceValues evaluate_nuisances(const NuisanceModels& models, const AnalysisFrame& frame) {
  NuisanceValues v;
  v.mu0 = models.control_trend.predict(frame.x);
  const Eigen::VectorXd raw = models.propensity.predict_raw(frame.x);
  v.pi_a = models.propensity.predict(frame.x);
  v.propensity_clipped = (raw.array() < models.propensity.clip).count() +
                         (raw.array() > 1.0 - models.propensity.clip).count();
  const auto n1 = frame.n1();
  v.mu1_cross.resize(n1, n1);
  v.pid_cross.resize(n1, n1);
  for (Eigen::Index i = 0; i < n1; ++i) {
    v.mu1_cross.row(i) = models.treated_trend.predict_at(frame.dose_features, frame.dose.row(i)).transpose();
    for (Eigen::Index j = 0; j < n1; ++j)
      v.pid_cross(i, j) = models.dose_density.density(frame.dose_features.row(j), frame.dose.row(i));
  }
  return v;
}

struct EifComponents {
  int period = 0;
  double p_treated = 0.0;
  Eigen::VectorXd tau;        // n
  Eigen::VectorXd xi;         // n1, dose order
  Eigen::VectorXd m_at_dose;  // m(D_i | A=1)
  Eigen::VectorXd p_at_dose;  // p(D_i | A=1)
};

inline double treated_share(const AnalysisFrame& frame, const Eigen::VectorXd& w) {
  double w1 = 0.0;
  for (Eigen::Index r = 0; r < frame.n(); ++r)
    if (frame.group[static_cast<std::size_t>(r)] == 1) w1 += w(r);
  return w1 / w.sum();
}

inline Eigen::VectorXd compute_tau(const AnalysisFrame& frame, const NuisanceValues& v, const Eigen::VectorXd& w) {
  const double p = treated_share(frame, w);
  Eigen::VectorXd tau(frame.n());
  for (Eigen::Index r = 0; r < frame.n(); ++r) {
    const int a = frame.group[static_cast<std::size_t>(r)];
    const double pa = v.pi_a(r);
    tau(r) = a == 1 ? v.mu0(r) / p : pa * (frame.dy(r) - v.mu0(r)) / (p * (1.0 - pa));
  }
  return tau;
}

inline void compute_xi(const AnalysisFrame& frame, const NuisanceValues& v, const Eigen::VectorXd& w,
                       EifComponents& eif) {
  const Eigen::VectorXd wt = frame.treated_weights(w);
  const double total = wt.sum();
  eif.m_at_dose = v.mu1_cross * wt / total;
  eif.p_at_dose = v.pid_cross * wt / total;
  const auto n1 = frame.n1();
  eif.xi.resize(n1);
  for (Eigen::Index i = 0; i < n1; ++i) {
    const double dy = frame.dy(frame.treated[static_cast<std::size_t>(i)]);
    eif.xi(i) = (dy - v.mu1_cross(i, i)) * eif.p_at_dose(i) / v.pid_cross(i, i) + eif.m_at_dose(i);
  }
}

inline EifComponents compute_eif(const AnalysisFrame& frame, const NuisanceValues& v, const Eigen::VectorXd& w) {
  EifComponents eif;
  eif.period = frame.period;
  eif.p_treated = treated_share(frame, w);
  if (!(eif.p_treated > 0.0 && eif.p_treated < 1.0))
    throw Error("estimators", ErrorKind::InvalidInput, "treated share must lie strictly between 0 and 1");
  eif.tau = compute_tau(frame, v, w);
  compute_xi(frame, v, w, eif);
  return eif;
}

inline double estimate_att(const AnalysisFrame& frame, const EifComponents& eif, const Eigen::VectorXd& w) {
  double s = 0.0;
  for (Eigen::Index r = 0; r < frame.n(); ++r) {
    const double a = frame.group[static_cast<std::size_t>(r)];
    s += w(r) * (a / eif.p_treated * frame.dy(r) - eif.tau(r));
  }
  return s / w.sum();
}

inline double estimate_adutt(const AnalysisFrame& frame, const EifComponents& eif, const Eigen::VectorXd& w) {
  double s = -w.dot(eif.tau);
  for (Eigen::Index i = 0; i < frame.n1(); ++i) {
    const auto r = frame.treated[static_cast<std::size_t>(i)];
    s += w(r) * eif.xi(i) / eif.p_treated;
  }
  return s / w.sum();
}

inline double estimate_reda(double att, double adutt, double att_floor = 1e-8) {
  if (!(std::abs(att) >= att_floor))
    throw Error("estimators", ErrorKind::AttNearZero, "ATT is too close to zero for REDA to be defined");
  return (att - adutt) / att;
}

inline std::optional<double> try_reda(double att, double adutt, double att_floor) {
  if (!(std::abs(att) >= att_floor)) return std::nullopt;
  return (att - adutt) / att;
}

// ---------------------------------------------------------------------------
// Curves

struct GridConfig {
  int points = 100;
  double lower_quantile = 0.05;
  double upper_quantile = 0.95;
  // Explicit evaluation points (rows), bypassing the quantile grid.
  Eigen::MatrixXd explicit_points;
};

// Evaluation layout shared by every period and bootstrap replicate.
struct CurvePlan {
  std::vector<std::vector<double>> grid;  // per dimension
  Eigen::MatrixXd points;                 // reported points
  std::vector<double> median;             // per dimension, 2-D slices
  bool explicit_points = false;
  BandwidthPolicy policy = BandwidthPolicy::RuleOfThumb;
  std::map<int, std::vector<double>> bandwidth;  // by period label
  bool frozen = false;
};

inline CurvePlan make_curve_plan(const Eigen::MatrixXd& dose, const GridConfig& cfg, BandwidthPolicy policy) {
  CurvePlan plan;
  plan.policy = policy;
  const auto k = dose.cols();
  for (Eigen::Index j = 0; j < k; ++j) {
    const Eigen::VectorXd col = dose.col(j);
    plan.median.push_back(stats::quantile(col, 0.5));
    const double lo = stats::quantile(col, cfg.lower_quantile);
    const double hi = stats::quantile(col, cfg.upper_quantile);
    std::vector<double> g(static_cast<std::size_t>(cfg.points));
    for (int p = 0; p < cfg.points; ++p)
      g[static_cast<std::size_t>(p)] = cfg.points == 1 ? lo : lo + (hi - lo) * p / (cfg.points - 1);
    if (cfg.points > 1 && !(hi > lo))
      throw Error("estimators", ErrorKind::BandwidthDegenerate, "dose grid has zero width");
    plan.grid.push_back(std::move(g));
  }
  if (cfg.explicit_points.size() > 0) {
    if (cfg.explicit_points.cols() != k)
      throw Error("estimators", ErrorKind::InvalidInput, "explicit grid has the wrong dimension");
    plan.points = cfg.explicit_points;
    plan.explicit_points = true;
  } else if (k == 1) {
    plan.points = Eigen::Map<const Eigen::VectorXd>(plan.grid[0].data(), cfg.points);
  } else {
    // 1-D slices through the surface at the median of the other coordinate.
    plan.points.resize(2 * cfg.points, 2);
    for (int p = 0; p < cfg.points; ++p) {
      plan.points.row(p) << plan.grid[0][static_cast<std::size_t>(p)], plan.median[1];
      plan.points.row(cfg.points + p) << plan.median[0], plan.grid[1][static_cast<std::size_t>(p)];
    }
  }
  for (Eigen::Index j = 0; j < k; ++j) {
    const double lo = dose.col(j).minCoeff(), hi = dose.col(j).maxCoeff();
    for (Eigen::Index p = 0; p < plan.points.rows(); ++p) {
      if (plan.points(p, j) < lo || plan.points(p, j) > hi)
        throw Error("estimators", ErrorKind::GridOutsideSupport,
                    "grid point " + std::to_string(plan.points(p, j)) + " lies outside the observed dose range");
    }
  }
  return plan;
}

struct EffectCurve {
  std::string label = "adt";
  int period = 0;
  bool placebo = false;
  std::vector<std::string> dose_names;
  Eigen::MatrixXd points;
  Eigen::VectorXd values;
  Eigen::VectorXd surface;  // 2-D grid, row-major over (grid[0], grid[1]); empty otherwise
  std::vector<double> bandwidth;
  double tau_mean = 0.0;
  Eigen::VectorXd se, lower, upper;  // bootstrap bands
};

inline std::vector<double> plan_bandwidth(CurvePlan& plan, int period, const Eigen::MatrixXd& dose,
                                          const Eigen::VectorXd& response, const Eigen::VectorXd& w) {
  if (auto it = plan.bandwidth.find(period); it != plan.bandwidth.end()) return it->second;
  if (plan.frozen) throw Error("estimators", ErrorKind::InvalidInput, "frozen plan lacks a bandwidth for this period");
  auto h = plan.policy == BandwidthPolicy::LeaveOneOut ? loo_bandwidth(dose, response, w)
                                                       : rule_of_thumb_bandwidth(dose, w);
  plan.bandwidth[period] = h;
  return h;
}

inline EffectCurve smooth_curve(const AnalysisFrame& frame, const Eigen::VectorXd& response, double shift,
                                const Eigen::VectorXd& w_treated, CurvePlan& plan, bool with_surface) {
  EffectCurve c;
  c.period = frame.period;
  c.dose_names = frame.dose_names;
  c.points = plan.points;
  c.bandwidth = plan_bandwidth(plan, frame.period, frame.dose, response, w_treated);
  c.values = local_linear(frame.dose, response, w_treated, plan.points, c.bandwidth).array() - shift;
  c.tau_mean = shift;
  if (with_surface && frame.dose_dim() == 2 && !plan.explicit_points) {
    const auto g0 = plan.grid[0].size(), g1 = plan.grid[1].size();
    c.surface.resize(static_cast<Eigen::Index>(g0 * g1));
    Eigen::RowVector2d at;
    for (std::size_t a = 0; a < g0; ++a)
      for (std::size_t b = 0; b < g1; ++b) {
        at << plan.grid[0][a], plan.grid[1][b];
        c.surface(static_cast<Eigen::Index>(a * g1 + b)) =
            local_linear_at(frame.dose, response, w_treated, at, c.bandwidth) - shift;
      }
  }
  if (!c.values.allFinite())
    throw Error("estimators", ErrorKind::BandwidthDegenerate, "effect curve is not finite on the grid");
  return c;
}

inline EffectCurve estimate_adt_curve(const AnalysisFrame& frame, const EifComponents& eif, const Eigen::VectorXd& w,
                                      CurvePlan& plan, bool with_surface = false) {
  const double tau_mean = w.dot(eif.tau) / w.sum();
  return smooth_curve(frame, eif.xi, tau_mean, frame.treated_weights(w), plan, with_surface);
}

// Confounder-naive comparator: local linear fit of dY on D among the treated,
// minus the mean dY of the controls.
inline EffectCurve naive_curve(const AnalysisFrame& frame, const Eigen::VectorXd& w, CurvePlan& plan) {
  double s0 = 0.0, w0 = 0.0;
  Eigen::VectorXd dy1(frame.n1());
  for (Eigen::Index r = 0; r < frame.n(); ++r)
    if (frame.group[static_cast<std::size_t>(r)] == 0) s0 += w(r) * frame.dy(r), w0 += w(r);
  for (Eigen::Index i = 0; i < frame.n1(); ++i) dy1(i) = frame.dy(frame.treated[static_cast<std::size_t>(i)]);
  // The naive fit smooths dY rather than xi, so it keeps its own bandwidth
  // entry under a shifted key.
  auto c = smooth_curve(frame, dy1, s0 / w0, frame.treated_weights(w), plan, false);
  c.label = "naive";
  return c;
}

// ---------------------------------------------------------------------------
// Influence-function diagnostics

struct EifDiagnostics {
  Eigen::VectorXd phi_att;    // n
  Eigen::VectorXd phi_adutt;  // n
  Eigen::VectorXd j;          // n, zero for controls
  double mean_att = 0, mean_adutt = 0;
  double se_att = 0, se_adutt = 0;  // sd(phi) / sqrt(n)
};

// phi_ATT   = A/P (dY - mu0 - att) - (1-A) piA (dY - mu0) / (P (1-piA))
// phi_ADUTT = A/P (xi - adutt) - tau + J,
// J         = A/P * mean_k [mu1(X, D_k) - m(D_k|A=1)].
// Centred at the supplied values; with the point estimates both sample means
// vanish, with the true values they measure the estimation error.
inline EifDiagnostics compute_eif_diagnostics(const AnalysisFrame& frame, const NuisanceValues& v,
                                              const EifComponents& eif, double att_center, double adutt_center) {
  const auto n = frame.n();
  const auto n1 = frame.n1();
  const double p = eif.p_treated;
  EifDiagnostics d;
  d.phi_att.resize(n);
  d.phi_adutt.resize(n);
  d.j = Eigen::VectorXd::Zero(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    if (frame.group[static_cast<std::size_t>(r)] == 0) {
      const double pa = v.pi_a(r);
      d.phi_att(r) = -pa * (frame.dy(r) - v.mu0(r)) / (p * (1.0 - pa));
      d.phi_adutt(r) = -eif.tau(r);
    }
  }
  for (Eigen::Index i = 0; i < n1; ++i) {
    const auto r = frame.treated[static_cast<std::size_t>(i)];
    double jsum = 0.0;
    for (Eigen::Index k = 0; k < n1; ++k) jsum += v.mu1_cross(k, i) - eif.m_at_dose(k);
    d.j(r) = jsum / static_cast<double>(n1) / p;
    d.phi_att(r) = (frame.dy(r) - v.mu0(r) - att_center) / p;
    d.phi_adutt(r) = (eif.xi(i) - adutt_center) / p - eif.tau(r) + d.j(r);
  }
  auto summarise = [n](const Eigen::VectorXd& phi, double& mean, double& se) {
    mean = phi.mean();
    const double var = (phi.array() - mean).square().sum() / static_cast<double>(n - 1);
    se = std::sqrt(var / static_cast<double>(n));
  };
  summarise(d.phi_att, d.mean_att, d.se_att);
  summarise(d.phi_adutt, d.mean_adutt, d.se_adutt);
  return d;
}

// ---------------------------------------------------------------------------
// Period pipeline

struct EstimationConfig {
  LearnerSet learners;
  GridConfig grid;
  BandwidthPolicy bandwidth = BandwidthPolicy::RuleOfThumb;
  // Headline window; 0 means the default (4..M, or 1..M when M < 4).
  int window_first = 0;
  int window_last = 0;
  double reda_floor_factor = 1e-8;  // times the outcome scale
  bool naive = true;
  bool eif_diagnostics = true;
  bool positivity = true;
  bool surface = true;
  // Placebo: Y0 = pre-period outcome at base, Y1 = pre-period outcome at m'.
  int placebo_base = 4;
  std::vector<int> placebo_periods;  // empty: base+1..M
};

inline std::pair<int, int> resolve_window(const EstimationConfig& cfg, int n_periods) {
  int first = cfg.window_first, last = cfg.window_last;
  if (first == 0) first = n_periods >= 4 ? 4 : 1;
  if (last == 0) last = n_periods;
  if (first < 1 || last > n_periods || first > last)
    throw Error("estimators", ErrorKind::PeriodOutOfRange,
                "window " + std::to_string(first) + ".." + std::to_string(last) + " outside 1.." +
                    std::to_string(n_periods));
  return {first, last};
}

struct PeriodEstimate {
  int period = 0;
  double att = 0, adutt = 0;
  std::optional<double> reda;
  double outcome_scale = 0;
  EffectCurve curve;
  std::optional<EffectCurve> naive;
  std::optional<PositivityReport> positivity;
  std::optional<EifDiagnostics> eif;
  Eigen::Index propensity_clipped = 0;
  bool propensity_separated = false;
};

struct EffectEstimates {
  DriverKind driver = DriverKind::BorderDistance;
  int window_first = 0, window_last = 0;
  std::vector<PeriodEstimate> periods;  // every period 1..M
  double att = 0, adutt = 0;
  std::optional<double> reda;
  EffectCurve curve;  // window average
  std::optional<EffectCurve> naive;
  // Headline bootstrap bands for the scalars (filled by the bootstrap).
  double att_se = std::nan(""), adutt_se = std::nan(""), reda_se = std::nan("");
};

inline double outcome_scale(const MatchedPeriodSlice& s) {
  return 0.5 * (s.y0.cwiseAbs().mean() + s.y1.cwiseAbs().mean());
}

// Everything the pipeline needs from exposure mapping, computed once per
// panel and reused across periods and bootstrap replicates.
struct PreparedDriver {
  DriverKind driver;
  DoseAssignment assignment;
};

inline PreparedDriver prepare_driver(const PanelDataset& panel, DriverKind driver) {
  return {driver, assemble_dose(panel, driver)};
}

inline Eigen::VectorXd frame_weights(const AnalysisFrame& frame, const std::vector<double>& unit_weights) {
  if (unit_weights.empty()) return Eigen::VectorXd::Ones(frame.n());
  return frame.row_weights(unit_weights);
}

inline PeriodEstimate analyse_frame(const AnalysisFrame& frame, const EstimationConfig& cfg, const Eigen::VectorXd& w,
                                    CurvePlan& plan, double scale, bool diagnostics) {
  PeriodEstimate pe;
  pe.period = frame.period;
  pe.outcome_scale = scale;
  const auto models = fit_nuisances(frame, cfg.learners, w);
  const auto values = evaluate_nuisances(models, frame);
  const auto eif = compute_eif(frame, values, w);
  pe.att = estimate_att(frame, eif, w);
  pe.adutt = estimate_adutt(frame, eif, w);
  pe.reda = try_reda(pe.att, pe.adutt, cfg.reda_floor_factor * scale);
  pe.curve = estimate_adt_curve(frame, eif, w, plan, diagnostics && cfg.surface);
  pe.propensity_clipped = values.propensity_clipped;
  pe.propensity_separated = models.propensity.separated;
  if (cfg.naive) {
    CurvePlan naive_plan = plan;
    naive_plan.bandwidth.clear();
    naive_plan.frozen = false;
    naive_plan.bandwidth[frame.period] = pe.curve.bandwidth;
    pe.naive = naive_curve(frame, w, naive_plan);
  }
  if (diagnostics && cfg.positivity) pe.positivity = positivity_diagnostic(models.dose_density, frame, w);
  if (diagnostics && cfg.eif_diagnostics)
    pe.eif = compute_eif_diagnostics(frame, values, eif, pe.att, pe.adutt);
  return pe;
}

inline EffectCurve average_curves(const std::vector<const EffectCurve*>& curves) {
  EffectCurve avg = *curves.front();
  avg.period = 0;
  avg.values.setZero();
  avg.tau_mean = 0.0;
  if (avg.surface.size() > 0) avg.surface.setZero();
  for (const auto* c : curves) {
    avg.values += c->values;
    avg.tau_mean += c->tau_mean;
    if (avg.surface.size() > 0 && c->surface.size() == avg.surface.size()) avg.surface += c->surface;
  }
  const double k = static_cast<double>(curves.size());
  avg.values /= k;
  avg.tau_mean /= k;
  if (avg.surface.size() > 0) avg.surface /= k;
  return avg;
}

// Full pipeline: per-period nuisance fits and estimates for m = 1..M, then
// window averages. REDA of the headline uses the averaged ATT and ADUTT.
// unit_weights is indexed by panel unit (empty: all ones). A plan that is
// not frozen is filled in (grid and bandwidths) from this run.
inline EffectEstimates run_period_analysis(const PanelDataset& panel, const PreparedDriver& prepared,
                                           const EstimationConfig& cfg, const std::vector<double>& unit_weights,
                                           CurvePlan& plan, bool diagnostics = true) {
  check_learners(cfg.learners);
  const auto [first, last] = resolve_window(cfg, panel.n_periods);
  const auto& dose = prepared.assignment.dose;
  if (!plan.frozen && plan.points.size() == 0) plan = make_curve_plan(dose.values, cfg.grid, cfg.bandwidth);

  EffectEstimates est;
  est.driver = prepared.driver;
  est.window_first = first;
  est.window_last = last;
  double scale = 0.0;
  std::vector<const EffectCurve*> curves, naives;
  for (int m = 1; m <= panel.n_periods; ++m) {
    try {
      const auto slice = slice_matched_period(panel, m);
      const auto frame = make_frame(slice, dose, prepared.assignment.adjustment);
      const auto w = frame_weights(frame, unit_weights);
      est.periods.push_back(analyse_frame(frame, cfg, w, plan, outcome_scale(slice), diagnostics));
    } catch (const Error& e) {
      throw Error(e.module(), e.kind(), "period " + std::to_string(m) + ": " + e.what());
    }
  }
  for (const auto& pe : est.periods) {
    if (pe.period < first || pe.period > last) continue;
    est.att += pe.att;
    est.adutt += pe.adutt;
    scale += pe.outcome_scale;
    curves.push_back(&pe.curve);
    if (pe.naive) naives.push_back(&*pe.naive);
  }
  const double k = static_cast<double>(last - first + 1);
  est.att /= k;
  est.adutt /= k;
  est.reda = try_reda(est.att, est.adutt, cfg.reda_floor_factor * scale / k);
  est.curve = average_curves(curves);
  if (!naives.empty()) est.naive = average_curves(naives);
  return est;
}

inline EffectEstimates run_period_analysis(const PanelDataset& panel, DriverKind driver,
                                           const EstimationConfig& cfg = {}) {
  CurvePlan plan;
  return run_period_analysis(panel, prepare_driver(panel, driver), cfg, {}, plan);
}

struct PlaceboResult {
  int base = 4;
  std::vector<EffectCurve> curves;  // one per pseudo-period
  EffectCurve average;
};

inline std::vector<int> placebo_periods(const EstimationConfig& cfg, int n_periods) {
  if (!cfg.placebo_periods.empty()) return cfg.placebo_periods;
  std::vector<int> out;
  for (int m = cfg.placebo_base + 1; m <= n_periods; ++m) out.push_back(m);
  return out;
}

// The ADT pipeline on pre-period data: Y0 = Y(t=0, base), Y1 = Y(t=0, m'),
// covariates from the base period, true group labels kept.
inline PlaceboResult placebo_curve(const PanelDataset& panel, const PreparedDriver& prepared,
                                   const EstimationConfig& cfg, const std::vector<double>& unit_weights,
                                   CurvePlan& plan) {
  check_learners(cfg.learners);
  const auto periods = placebo_periods(cfg, panel.n_periods);
  if (periods.empty())
    throw Error("estimators", ErrorKind::PeriodOutOfRange, "no pre-period data after the placebo base period");
  const auto& dose = prepared.assignment.dose;
  if (!plan.frozen && plan.points.size() == 0) plan = make_curve_plan(dose.values, cfg.grid, cfg.bandwidth);
  PlaceboResult out;
  out.base = cfg.placebo_base;
  EstimationConfig inner = cfg;
  inner.naive = false;
  for (int mp : periods) {
    try {
      const auto slice = slice_contrast(panel, {0, cfg.placebo_base}, {0, mp}, cfg.placebo_base, mp);
      const auto frame = make_frame(slice, dose, prepared.assignment.adjustment);
      const auto w = frame_weights(frame, unit_weights);
      auto pe = analyse_frame(frame, inner, w, plan, outcome_scale(slice), false);
      pe.curve.placebo = true;
      pe.curve.label = "placebo";
      out.curves.push_back(std::move(pe.curve));
    } catch (const Error& e) {
      throw Error(e.module(), e.kind(), "placebo period " + std::to_string(mp) + ": " + e.what());
    }
  }
  std::vector<const EffectCurve*> ptrs;
  for (const auto& c : out.curves) ptrs.push_back(&c);
  out.average = average_curves(ptrs);
  out.average.label = "placebo";
  out.average.placebo = true;
  return out;
}

}  // namespace dosedid
