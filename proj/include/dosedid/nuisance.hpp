#pragma once

// The four nuisance functions behind a learner-id interface:
//
//   treated trend   mu1(X, D) = E[dY | A=1, X, D]
//   control trend   mu0(X)    = E[dY | A=0, X]
//   propensity      piA(X)    = P(A=1 | X)
//   dose density    piD(X, D) = p(D | A=1, X)
//
// Learner ids are "<base>" or "<base>:omit=<col>[,<col>...]". Bases:
//   trends      ols, ols_dx (adds dose x feature interactions), ols_quad
//               (adds squared and cross dose terms), mean
//   propensity  logit, logit_marginal
//   density     gaussian, gaussian_marginal
// "omit" drops named feature columns (and their interactions).

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dosedid/errors.hpp"
#include "dosedid/frame.hpp"
#include "dosedid/regression.hpp"
#include "dosedid/stats.hpp"

namespace dosedid {

inline constexpr double kPropensityClip = 0.01;
inline constexpr double kDensityFloorFactor = 1e-3;
inline constexpr double kRidgeFactor = 1e-4;
inline constexpr Eigen::Index kMinDensityRows = 20;

struct LearnerSpec {
  std::string id;
  std::string base;
  std::vector<std::string> omit;

  static LearnerSpec parse(const std::string& id) {
    LearnerSpec s;
    s.id = id;
    const auto colon = id.find(':');
    s.base = id.substr(0, colon);
    if (colon != std::string::npos) {
      const std::string opt = id.substr(colon + 1);
      if (opt.rfind("omit=", 0) != 0)
        throw Error("nuisance", ErrorKind::UnknownLearner, "unknown learner option in '" + id + "'");
      std::stringstream ss(opt.substr(5));
      std::string col;
      while (std::getline(ss, col, ',')) {
        if (!col.empty()) s.omit.push_back(col);
      }
    }
    return s;
  }

  bool omits(const std::string& col) const { return std::find(omit.begin(), omit.end(), col) != omit.end(); }
};

struct LearnerSet {
  std::string treated_trend = "ols_dx";
  std::string control_trend = "ols";
  std::string propensity = "logit";
  std::string dose_density = "gaussian";
};

inline void check_learner(const std::string& role, const std::string& id) {
  const auto base = LearnerSpec::parse(id).base;
  const bool trend = base == "ols" || base == "ols_dx" || base == "ols_quad" || base == "mean";
  bool ok = false;
  if (role == "treated_trend" || role == "control_trend") ok = trend;
  else if (role == "propensity") ok = base == "logit" || base == "logit_marginal";
  else if (role == "dose_density") ok = base == "gaussian" || base == "gaussian_marginal";
  if (!ok) throw Error("nuisance", ErrorKind::UnknownLearner, "learner '" + id + "' is not valid for " + role);
}

inline void check_learners(const LearnerSet& l) {
  check_learner("treated_trend", l.treated_trend);
  check_learner("control_trend", l.control_trend);
  check_learner("propensity", l.propensity);
  check_learner("dose_density", l.dose_density);
}

namespace detail {

inline std::vector<Eigen::Index> kept_columns(const std::vector<std::string>& names, const LearnerSpec& spec) {
  for (const auto& o : spec.omit) {
    if (std::find(names.begin(), names.end(), o) == names.end())
      throw Error("nuisance", ErrorKind::UnknownLearner,
                  "learner '" + spec.id + "' omits unknown column '" + o + "'");
  }
  std::vector<Eigen::Index> out;
  for (std::size_t k = 0; k < names.size(); ++k)
    if (!spec.omits(names[k])) out.push_back(static_cast<Eigen::Index>(k));
  return out;
}

inline Eigen::VectorXd subset(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out(static_cast<Eigen::Index>(r)) = v(rows[r]);
  return out;
}

inline Eigen::MatrixXd subset_rows(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(rows[r]);
  return out;
}

}  // namespace detail

enum class TrendTarget { Treated, Control };

// Linear-in-parameters outcome trend model.
class TrendModel {
 public:
  TrendTarget target = TrendTarget::Control;
  LearnerSpec learner;
  int period = 0;
  Eigen::VectorXd coef;
  std::vector<std::string> design_names;

  // Design matrix for features f (rows) at doses d (rows, or a single row
  // broadcast to every feature row; ignored for the control trend).
  Eigen::MatrixXd design(const Eigen::MatrixXd& f, const Eigen::MatrixXd& d) const {
    const Eigen::Index n = f.rows();
    const Eigen::Index nf = static_cast<Eigen::Index>(kept_.size());
    const Eigen::Index k = use_dose_ ? dose_dim_ : 0;
    Eigen::MatrixXd out(n, width());
    out.col(0).setOnes();
    if (base_ == "mean") return out;
    for (Eigen::Index c = 0; c < nf; ++c) out.col(1 + c) = f.col(kept_[static_cast<std::size_t>(c)]);
    if (k == 0) return out;
    auto dose_col = [&](Eigen::Index j) -> Eigen::VectorXd {
      if (d.rows() == n) return d.col(j);
      return Eigen::VectorXd::Constant(n, d(0, j));
    };
    Eigen::Index c = 1 + nf;
    for (Eigen::Index j = 0; j < k; ++j) out.col(c++) = dose_col(j);
    if (base_ == "ols_dx") {
      for (Eigen::Index j = 0; j < k; ++j) {
        const Eigen::VectorXd dj = dose_col(j);
        for (Eigen::Index a = 0; a < nf; ++a) out.col(c++) = out.col(1 + a).cwiseProduct(dj);
      }
    } else if (base_ == "ols_quad") {
      for (Eigen::Index j = 0; j < k; ++j)
        for (Eigen::Index l = j; l < k; ++l) out.col(c++) = dose_col(j).cwiseProduct(dose_col(l));
    }
    return out;
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& f, const Eigen::MatrixXd& d) const { return design(f, d) * coef; }

  // Same dose for every feature row.
  Eigen::VectorXd predict_at(const Eigen::MatrixXd& f, const Eigen::RowVectorXd& dose) const {
    return design(f, Eigen::MatrixXd(dose)) * coef;
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& f) const { return design(f, Eigen::MatrixXd(0, 0)) * coef; }

  void configure(const std::vector<std::string>& feature_names, const std::vector<std::string>& dose_names) {
    base_ = learner.base;
    kept_ = base_ == "mean" ? std::vector<Eigen::Index>{} : detail::kept_columns(feature_names, learner);
    use_dose_ = target == TrendTarget::Treated && base_ != "mean";
    dose_dim_ = static_cast<Eigen::Index>(dose_names.size());
    design_names = {"(intercept)"};
    for (auto c : kept_) design_names.push_back(feature_names[static_cast<std::size_t>(c)]);
    if (!use_dose_) return;
    for (const auto& dn : dose_names) design_names.push_back(dn);
    if (base_ == "ols_dx") {
      for (const auto& dn : dose_names)
        for (auto c : kept_) design_names.push_back(feature_names[static_cast<std::size_t>(c)] + "*" + dn);
    } else if (base_ == "ols_quad") {
      for (std::size_t j = 0; j < dose_names.size(); ++j)
        for (std::size_t l = j; l < dose_names.size(); ++l) design_names.push_back(dose_names[j] + "*" + dose_names[l]);
    }
  }

  Eigen::Index width() const { return static_cast<Eigen::Index>(design_names.size()); }

 private:
  std::string base_;
  std::vector<Eigen::Index> kept_;
  bool use_dose_ = false;
  Eigen::Index dose_dim_ = 0;
};

inline TrendModel fit_trend(const AnalysisFrame& frame, TrendTarget target, const std::string& learner_id,
                            const Eigen::VectorXd& weights) {
  check_learner(target == TrendTarget::Treated ? "treated_trend" : "control_trend", learner_id);
  TrendModel model;
  model.target = target;
  model.learner = LearnerSpec::parse(learner_id);
  model.period = frame.period;

  Eigen::MatrixXd features, doses;
  Eigen::VectorXd y, w;
  if (target == TrendTarget::Treated) {
    model.configure(frame.dose_feature_names, frame.dose_names);
    features = frame.dose_features;
    doses = frame.dose;
    y = detail::subset(frame.dy, frame.treated);
    w = frame.treated_weights(weights);
  } else {
    model.configure(frame.x_names, {});
    std::vector<Eigen::Index> rows;
    for (Eigen::Index r = 0; r < frame.n(); ++r)
      if (frame.group[static_cast<std::size_t>(r)] == 0) rows.push_back(r);
    features = detail::subset_rows(frame.x, rows);
    y = detail::subset(frame.dy, rows);
    w = detail::subset(weights, rows);
  }
  if ((w.array() < 0).any() || w.sum() <= 0)
    throw Error("nuisance", ErrorKind::InvalidInput, "trend weights must be nonnegative and not all zero");
  const auto active = (w.array() > 0).count();
  if (active < model.width() + 1)
    throw Error("nuisance", ErrorKind::InsufficientRows,
                "trend model for period " + std::to_string(frame.period) + " needs at least " +
                    std::to_string(model.width() + 1) + " rows, has " + std::to_string(active));
  const auto x = model.design(features, doses);
  model.coef = weighted_least_squares(x, y, w, model.design_names).coef;
  return model;
}

class PropensityModel {
 public:
  LearnerSpec learner;
  Eigen::VectorXd coef;
  bool separated = false;
  double clip = kPropensityClip;

  Eigen::VectorXd predict_raw(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd out(x.rows());
    const Eigen::MatrixXd d = design(x);
    const Eigen::VectorXd eta = d * coef;
    for (Eigen::Index i = 0; i < eta.size(); ++i) out(i) = stats::logistic(eta(i));
    return out;
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const {
    return predict_raw(x).cwiseMax(clip).cwiseMin(1.0 - clip);
  }

  Eigen::MatrixXd design(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd d(x.rows(), 1 + static_cast<Eigen::Index>(kept_.size()));
    d.col(0).setOnes();
    for (std::size_t c = 0; c < kept_.size(); ++c) d.col(1 + static_cast<Eigen::Index>(c)) = x.col(kept_[c]);
    return d;
  }

  void configure(const std::vector<std::string>& names) {
    kept_ = learner.base == "logit_marginal" ? std::vector<Eigen::Index>{} : detail::kept_columns(names, learner);
  }

 private:
  std::vector<Eigen::Index> kept_;
};

inline PropensityModel fit_propensity(const AnalysisFrame& frame, const std::string& learner_id,
                                      const Eigen::VectorXd& weights) {
  check_learner("propensity", learner_id);
  PropensityModel model;
  model.learner = LearnerSpec::parse(learner_id);
  model.configure(frame.x_names);
  Eigen::VectorXd a(frame.n());
  double w1 = 0, w0 = 0;
  for (Eigen::Index r = 0; r < frame.n(); ++r) {
    a(r) = frame.group[static_cast<std::size_t>(r)];
    (a(r) == 1 ? w1 : w0) += weights(r);
  }
  if (w1 <= 0 || w0 <= 0)
    throw Error("nuisance", ErrorKind::InsufficientRows, "propensity model needs both groups");
  const auto fit = weighted_logistic(model.design(frame.x), a, weights, kRidgeFactor);
  model.coef = fit.coef;
  model.separated = fit.separated;
  return model;
}

// Sequentially factorised conditional Gaussian: dimension k is normal given
// the features and dose dimensions 0..k-1.
class DoseDensityModel {
 public:
  struct Factor {
    Eigen::VectorXd coef;  // intercept, kept features, previous doses
    double variance = 1.0;
  };

  LearnerSpec learner;
  std::vector<Factor> factors;
  double peak = 0.0;   // max of the marginal density over treated doses
  double floor = 0.0;  // kDensityFloorFactor * peak

  Eigen::Index dim() const { return static_cast<Eigen::Index>(factors.size()); }

  double factor_density(Eigen::Index k, const Eigen::Ref<const Eigen::RowVectorXd>& f,
                        const Eigen::Ref<const Eigen::RowVectorXd>& d) const {
    const auto& fac = factors[static_cast<std::size_t>(k)];
    double mean = fac.coef(0);
    Eigen::Index c = 1;
    for (auto col : kept_) mean += fac.coef(c++) * f(col);
    for (Eigen::Index j = 0; j < k; ++j) mean += fac.coef(c++) * d(j);
    return stats::normal_pdf(d(k), mean, fac.variance);
  }

  double density_raw(const Eigen::Ref<const Eigen::RowVectorXd>& f, const Eigen::Ref<const Eigen::RowVectorXd>& d) const {
    double p = 1.0;
    for (Eigen::Index k = 0; k < dim(); ++k) p *= factor_density(k, f, d);
    return p;
  }

  double density(const Eigen::Ref<const Eigen::RowVectorXd>& f, const Eigen::Ref<const Eigen::RowVectorXd>& d) const {
    return std::max(density_raw(f, d), floor);
  }

  Eigen::MatrixXd factor_design(Eigen::Index k, const Eigen::MatrixXd& f, const Eigen::MatrixXd& d) const {
    Eigen::MatrixXd out(f.rows(), 1 + static_cast<Eigen::Index>(kept_.size()) + k);
    out.col(0).setOnes();
    Eigen::Index c = 1;
    for (auto col : kept_) out.col(c++) = f.col(col);
    for (Eigen::Index j = 0; j < k; ++j) out.col(c++) = d.col(j);
    return out;
  }

  void configure(const std::vector<std::string>& names) {
    kept_ = learner.base == "gaussian_marginal" ? std::vector<Eigen::Index>{} : detail::kept_columns(names, learner);
  }

 private:
  std::vector<Eigen::Index> kept_;
};

inline DoseDensityModel fit_dose_density(const AnalysisFrame& frame, const std::string& learner_id,
                                         const Eigen::VectorXd& weights) {
  check_learner("dose_density", learner_id);
  DoseDensityModel model;
  model.learner = LearnerSpec::parse(learner_id);
  model.configure(frame.dose_feature_names);
  const Eigen::VectorXd w = frame.treated_weights(weights);
  const auto n1 = frame.n1();
  if ((w.array() > 0).count() < kMinDensityRows)
    throw Error("nuisance", ErrorKind::InsufficientRows,
                "dose density needs at least " + std::to_string(kMinDensityRows) + " treated rows");
  const auto& f = frame.dose_features;
  const auto& d = frame.dose;
  for (Eigen::Index k = 0; k < d.cols(); ++k) {
    const Eigen::VectorXd dk = d.col(k);
    const double var = stats::weighted_variance(dk, w);
    if (!(dk.maxCoeff() > dk.minCoeff()) || !(var > 0))
      throw Error("nuisance", ErrorKind::DegenerateDose, "dose '" + frame.dose_names[static_cast<std::size_t>(k)] + "' has no spread");
    const Eigen::MatrixXd x = model.factor_design(k, f, d);
    std::vector<std::string> names(static_cast<std::size_t>(x.cols()));
    for (std::size_t c = 0; c < names.size(); ++c) names[c] = "col" + std::to_string(c);
    const auto fit = weighted_least_squares(x, dk, w, names);
    DoseDensityModel::Factor fac;
    fac.coef = fit.coef;
    fac.variance = fit.weighted_rss / fit.weight_sum;
    if (!(fac.variance > 1e-12 * var))
      throw Error("nuisance", ErrorKind::DegenerateDose,
                  "dose '" + frame.dose_names[static_cast<std::size_t>(k)] + "' is determined by the features");
    model.factors.push_back(std::move(fac));
  }
  // Floor relative to the peak of the marginal dose density over the
  // observed treated doses.
  double peak = 0.0;
  for (Eigen::Index i = 0; i < n1; ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < n1; ++j) s += w(j) * model.density_raw(f.row(j), d.row(i));
    peak = std::max(peak, s / w.sum());
  }
  model.peak = peak;
  model.floor = kDensityFloorFactor * peak;
  return model;
}

struct NuisanceModels {
  int period = 0;
  LearnerSet learners;
  TrendModel treated_trend;
  TrendModel control_trend;
  PropensityModel propensity;
  DoseDensityModel dose_density;
};

inline NuisanceModels fit_nuisances(const AnalysisFrame& frame, const LearnerSet& learners,
                                    const Eigen::VectorXd& weights) {
  NuisanceModels m;
  m.period = frame.period;
  m.learners = learners;
  m.control_trend = fit_trend(frame, TrendTarget::Control, learners.control_trend, weights);
  m.propensity = fit_propensity(frame, learners.propensity, weights);
  m.treated_trend = fit_trend(frame, TrendTarget::Treated, learners.treated_trend, weights);
  m.dose_density = fit_dose_density(frame, learners.dose_density, weights);
  return m;
}

struct PositivityReport {
  int period = 0;
  // Distribution of p(D_i | A=1) / piD(X_i, D_i) over treated units.
  double ratio_min = 0, ratio_p05 = 0, ratio_median = 0, ratio_p95 = 0, ratio_max = 0;
  double floored_own = 0;    // share of piD(X_i, D_i) at the floor
  double floored_cross = 0;  // share of piD(X_j, D_i) used in the marginal that hit the floor
  bool flagged = false;      // either share above 5%
};

inline PositivityReport positivity_diagnostic(const DoseDensityModel& density, const AnalysisFrame& frame,
                                              const Eigen::VectorXd& weights) {
  const Eigen::VectorXd w = frame.treated_weights(weights);
  const auto n1 = frame.n1();
  const auto& f = frame.dose_features;
  const auto& d = frame.dose;
  std::vector<double> ratios(static_cast<std::size_t>(n1));
  double own = 0, cross = 0, cross_total = 0;
  for (Eigen::Index i = 0; i < n1; ++i) {
    double marginal = 0.0;
    for (Eigen::Index j = 0; j < n1; ++j) {
      const double raw = density.density_raw(f.row(j), d.row(i));
      if (raw < density.floor) cross += w(j);
      cross_total += w(j);
      marginal += w(j) * std::max(raw, density.floor);
    }
    marginal /= w.sum();
    const double raw_own = density.density_raw(f.row(i), d.row(i));
    if (raw_own < density.floor) own += w(i);
    ratios[static_cast<std::size_t>(i)] = marginal / std::max(raw_own, density.floor);
  }
  PositivityReport r;
  r.period = frame.period;
  r.ratio_min = *std::min_element(ratios.begin(), ratios.end());
  r.ratio_max = *std::max_element(ratios.begin(), ratios.end());
  r.ratio_p05 = stats::quantile(ratios, 0.05);
  r.ratio_median = stats::quantile(ratios, 0.5);
  r.ratio_p95 = stats::quantile(ratios, 0.95);
  r.floored_own = own / w.sum();
  r.floored_cross = cross / cross_total;
  r.flagged = r.floored_own > 0.05 || r.floored_cross > 0.05;
  return r;
}

}  // namespace dosedid
