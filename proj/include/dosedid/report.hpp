#pragma once

// CSV artifacts. Every file opens with a '#' header block (tool version,
// command, seed, config hash) that the CSV reader skips.

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "dosedid/bootstrap.hpp"
#include "dosedid/csv.hpp"
#include "dosedid/estimators.hpp"
#include "dosedid/simlab.hpp"

namespace dosedid::report {

struct Header {
  std::string command;
  std::uint64_t seed = 0;
  std::string config_hash;
  int replicates = 0;

  std::vector<std::string> lines(const std::string& version) const {
    return {"dosedid " + version, "command: " + command, "seed: " + std::to_string(seed),
            "config_hash: " + config_hash, "replicates: " + std::to_string(replicates)};
  }
};

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline csv::Writer open(const std::filesystem::path& path, const std::vector<std::string>& header) {
  csv::Writer w(path.string());
  for (const auto& h : header) w.comment(h);
  return w;
}

inline double or_nan(const std::optional<double>& v) { return v ? *v : kNaN; }

// estimates.csv: headline row, then one row per period. REDA is NA where ATT
// is too close to zero.
inline void write_estimates(const std::filesystem::path& path, const EffectEstimates& e,
                            const BootstrapResult* boot, const std::vector<std::string>& header) {
  auto w = open(path, header);
  w.row(std::vector<std::string>{"scope", "period", "att", "att_se", "att_lower", "att_upper", "adutt", "adutt_se",
                                 "adutt_lower", "adutt_upper", "reda", "reda_se", "reda_lower", "reda_upper"});
  auto band = [&](const std::string& label, double point, std::vector<std::string>& cells) {
    double se = kNaN, lo = kNaN, hi = kNaN;
    if (boot && std::isfinite(point)) {
      const auto j = label_index(*boot, label);
      se = boot->sigma[j];
      lo = boot->lower[j];
      hi = boot->upper[j];
    }
    for (double v : {point, se, lo, hi}) cells.push_back(csv::format(v));
  };
  auto emit = [&](const std::string& scope, const std::string& period, const std::string& suffix, double att,
                  double adutt, double reda) {
    std::vector<std::string> cells{scope, period};
    band("att" + suffix, att, cells);
    band("adutt" + suffix, adutt, cells);
    band("reda" + suffix, reda, cells);
    w.row(cells);
  };
  emit("headline", std::to_string(e.window_first) + "-" + std::to_string(e.window_last), "", e.att, e.adutt,
       or_nan(e.reda));
  for (const auto& pe : e.periods) {
    const auto m = std::to_string(pe.period);
    emit("period", m, "@" + m, pe.att, pe.adutt, or_nan(pe.reda));
  }
}

// Grid, curve value and bands. 2-D curves carry a slice label saying which
// coordinate varies.
inline void write_curve(const std::filesystem::path& path, const EffectCurve& c, const CurvePlan& plan,
                        const std::vector<std::string>& header, const std::string& extra_key = "",
                        const std::string& extra_value = "") {
  auto w = open(path, header);
  std::vector<std::string> head{"label"};
  if (!extra_key.empty()) head.push_back(extra_key);
  head.push_back("slice");
  head.insert(head.end(), c.dose_names.begin(), c.dose_names.end());
  for (const char* k : {"value", "se", "lower", "upper"}) head.push_back(k);
  w.row(head);
  const auto g = c.points.rows();
  const auto half = plan.grid.empty() ? g : static_cast<Eigen::Index>(plan.grid[0].size());
  for (Eigen::Index i = 0; i < g; ++i) {
    std::vector<std::string> cells{c.label};
    if (!extra_key.empty()) cells.push_back(extra_value);
    if (c.points.cols() == 1 || plan.explicit_points) cells.push_back(plan.explicit_points ? "explicit" : "curve");
    else cells.push_back(i < half ? c.dose_names[0] : c.dose_names[1]);
    for (Eigen::Index k = 0; k < c.points.cols(); ++k) cells.push_back(csv::format(c.points(i, k)));
    auto at = [&](const Eigen::VectorXd& v) { return csv::format(v.size() > i ? v(i) : kNaN); };
    cells.push_back(csv::format(c.values(i)));
    cells.push_back(at(c.se));
    cells.push_back(at(c.lower));
    cells.push_back(at(c.upper));
    w.row(cells);
  }
}

inline void write_surface(const std::filesystem::path& path, const EffectCurve& c, const CurvePlan& plan,
                          const std::vector<std::string>& header) {
  auto w = open(path, header);
  w.row(std::vector<std::string>{c.dose_names[0], c.dose_names[1], "value"});
  const auto g1 = plan.grid[1].size();
  for (std::size_t a = 0; a < plan.grid[0].size(); ++a)
    for (std::size_t b = 0; b < g1; ++b)
      w.row(plan.grid[0][a], plan.grid[1][b], c.surface(static_cast<Eigen::Index>(a * g1 + b)));
}

inline void write_placebo(const std::filesystem::path& path, const PlaceboResult& p, const CurvePlan& plan,
                          const std::vector<std::string>& header) {
  auto w = open(path, header);
  std::vector<std::string> head{"label", "m_prime", "slice"};
  const auto& names = p.average.dose_names;
  head.insert(head.end(), names.begin(), names.end());
  for (const char* k : {"value", "se", "lower", "upper"}) head.push_back(k);
  w.row(head);
  auto emit = [&](const EffectCurve& c, const std::string& mp) {
    const auto half = static_cast<Eigen::Index>(plan.grid[0].size());
    for (Eigen::Index i = 0; i < c.points.rows(); ++i) {
      std::vector<std::string> cells{"placebo", mp};
      if (c.points.cols() == 1 || plan.explicit_points) cells.push_back(plan.explicit_points ? "explicit" : "curve");
      else cells.push_back(i < half ? names[0] : names[1]);
      for (Eigen::Index k = 0; k < c.points.cols(); ++k) cells.push_back(csv::format(c.points(i, k)));
      auto at = [&](const Eigen::VectorXd& v) { return csv::format(v.size() > i ? v(i) : kNaN); };
      cells.push_back(csv::format(c.values(i)));
      cells.push_back(at(c.se));
      cells.push_back(at(c.lower));
      cells.push_back(at(c.upper));
      w.row(cells);
    }
  };
  emit(p.average, "average");
  for (const auto& c : p.curves) emit(c, std::to_string(c.period));
}

// Long format: period, metric, value.
inline void write_diagnostics(const std::filesystem::path& path, const EffectEstimates& e, const BootstrapResult* boot,
                              const std::vector<std::string>& header) {
  auto w = open(path, header);
  w.row("period", "metric", "value");
  for (const auto& pe : e.periods) {
    const auto m = std::to_string(pe.period);
    for (std::size_t k = 0; k < pe.curve.bandwidth.size(); ++k)
      w.row(m, "bandwidth_" + pe.curve.dose_names[k], pe.curve.bandwidth[k]);
    w.row(m, "propensity_clipped", static_cast<long>(pe.propensity_clipped));
    w.row(m, "propensity_separated", pe.propensity_separated ? 1 : 0);
    if (pe.positivity) {
      const auto& p = *pe.positivity;
      w.row(m, "positivity_ratio_min", p.ratio_min);
      w.row(m, "positivity_ratio_p05", p.ratio_p05);
      w.row(m, "positivity_ratio_median", p.ratio_median);
      w.row(m, "positivity_ratio_p95", p.ratio_p95);
      w.row(m, "positivity_ratio_max", p.ratio_max);
      w.row(m, "positivity_floored_own", p.floored_own);
      w.row(m, "positivity_floored_cross", p.floored_cross);
      w.row(m, "positivity_flagged", p.flagged ? 1 : 0);
    }
    if (pe.eif) {
      w.row(m, "eif_mean_att", pe.eif->mean_att);
      w.row(m, "eif_se_att", pe.eif->se_att);
      w.row(m, "eif_mean_adutt", pe.eif->mean_adutt);
      w.row(m, "eif_se_adutt", pe.eif->se_adutt);
    }
  }
  if (boot) {
    w.row("all", "bootstrap_replicates", boot->replicate_count());
    w.row("all", "bootstrap_failed", boot->failed);
  }
}

inline void write_truth(const std::filesystem::path& path, const sim::Simulated& s,
                        const std::vector<std::string>& header) {
  auto w = open(path, header);
  w.row("quantity", "period", "dose", "value");
  const auto& t = s.truth;
  const int M = t.spec.periods;
  const int first = M >= 4 ? 4 : 1;
  const std::string win = std::to_string(first) + "-" + std::to_string(M);
  w.row("att", win, "", t.window_att(first, M));
  w.row("adutt", win, "", t.window_adutt(first, M));
  w.row("reda", win, "", t.window_reda(first, M));
  w.row("mean_f_closed_form", "", "", t.mean_f);
  w.row("mean_f_quadrature", "", "", t.mean_f_quadrature);
  for (int m = 1; m <= M; ++m) {
    w.row("att", m, "", t.att(m));
    w.row("adutt", m, "", t.adutt(m));
    w.row("reda", m, "", t.reda(m));
  }
  // Curve on the default grid over the realised treated doses.
  Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(s.dose.data(), static_cast<Eigen::Index>(s.dose.size()));
  const double lo = stats::quantile(d, 0.05), hi = stats::quantile(d, 0.95);
  for (int g = 0; g < 100; ++g) {
    const double x = lo + (hi - lo) * g / 99.0;
    w.row("adt", win, x, t.window_adt(x, first, M));
  }
}

inline void write_robustness(const std::filesystem::path& path, const std::vector<sim::RobustnessRow>& rows,
                             const std::vector<std::string>& header) {
  auto w = open(path, header);
  w.row(std::vector<std::string>{"mu1", "pi_d", "mu0", "pi_a", "reps", "att_bias", "att_se", "att_verdict",
                                 "att_expected", "adutt_bias", "adutt_se", "adutt_verdict", "adutt_expected",
                                 "agree"});
  auto gb = [](bool g) { return std::string(g ? "Good" : "Bad"); };
  auto verdict = [](bool biased) { return std::string(biased ? "Biased" : "Unbiased"); };
  for (const auto& r : rows) {
    const auto& p = r.pattern;
    w.row(gb(p.good[0]), gb(p.good[1]), gb(p.good[2]), gb(p.good[3]), r.reps, r.att_bias, r.att_se,
          verdict(r.att_biased), verdict(p.att_biased), r.adutt_bias, r.adutt_se, verdict(r.adutt_biased),
          verdict(p.adutt_biased), r.agrees() ? 1 : 0);
  }
}

}  // namespace dosedid::report
