#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dosedid/exposure.hpp"
#include "dosedid/panel.hpp"

namespace dosedid {

// Estimation-ready view of one matched period: every analytic unit with its
// outcome change and confounders, plus doses and dose-side features for the
// treated rows.
struct AnalysisFrame {
  int period = 0;
  std::vector<std::size_t> units;  // panel unit index per row
  std::vector<int> group;
  Eigen::VectorXd dy;
  Eigen::MatrixXd x;  // n x p confounders
  std::vector<std::string> x_names;

  std::vector<Eigen::Index> treated;  // row index of each treated unit, dose order
  Eigen::MatrixXd dose;               // n1 x k
  std::vector<std::string> dose_names;
  Eigen::MatrixXd dose_features;      // n1 x (p + q): confounders then adjusters
  std::vector<std::string> dose_feature_names;

  Eigen::Index n() const { return dy.size(); }
  Eigen::Index n1() const { return static_cast<Eigen::Index>(treated.size()); }
  Eigen::Index dose_dim() const { return dose.cols(); }

  Eigen::VectorXd treated_weights(const Eigen::VectorXd& w) const {
    Eigen::VectorXd out(n1());
    for (Eigen::Index r = 0; r < n1(); ++r) out(r) = w(treated[static_cast<std::size_t>(r)]);
    return out;
  }

  // Pulls per-row weights out of a vector indexed by panel unit.
  Eigen::VectorXd row_weights(const std::vector<double>& unit_weights) const {
    Eigen::VectorXd out(n());
    for (Eigen::Index r = 0; r < n(); ++r) out(r) = unit_weights[units[static_cast<std::size_t>(r)]];
    return out;
  }
};

inline AnalysisFrame make_frame(const MatchedPeriodSlice& slice, const DoseVector& dose,
                                const AdjustmentSpec& spec) {
  AnalysisFrame f;
  f.period = slice.period;
  f.units = slice.units;
  f.group = slice.group;
  f.dy = slice.dy;
  f.x_names = spec.confounders;
  f.x.resize(slice.size(), static_cast<Eigen::Index>(spec.confounders.size()));
  for (std::size_t k = 0; k < spec.confounders.size(); ++k) {
    auto it = std::find(slice.covariate_names.begin(), slice.covariate_names.end(), spec.confounders[k]);
    if (it == slice.covariate_names.end())
      throw Error("estimators", ErrorKind::MissingColumn, "confounder '" + spec.confounders[k] + "' not in panel");
    f.x.col(static_cast<Eigen::Index>(k)) = slice.x.col(it - slice.covariate_names.begin());
  }

  std::map<std::size_t, Eigen::Index> by_unit;
  for (Eigen::Index r = 0; r < slice.size(); ++r) by_unit[slice.units[static_cast<std::size_t>(r)]] = r;

  const auto n1 = dose.size();
  const auto p = f.x.cols();
  const auto q = spec.adjuster_values.cols();
  f.dose = dose.values;
  f.dose_names = dose.names;
  f.dose_feature_names = spec.confounders;
  f.dose_feature_names.insert(f.dose_feature_names.end(), spec.adjusters.begin(), spec.adjusters.end());
  f.dose_features.resize(n1, p + q);
  for (Eigen::Index r = 0; r < n1; ++r) {
    auto it = by_unit.find(dose.units[static_cast<std::size_t>(r)]);
    if (it == by_unit.end() || slice.group[static_cast<std::size_t>(it->second)] != 1)
      throw Error("estimators", ErrorKind::InvalidInput, "dose unit is not a treated row of the slice");
    f.treated.push_back(it->second);
    f.dose_features.row(r).head(p) = f.x.row(it->second);
    if (q > 0) f.dose_features.row(r).tail(q) = spec.adjuster_values.row(r);
  }
  if (static_cast<std::size_t>(n1) != slice.n_treated())
    throw Error("estimators", ErrorKind::InvalidInput, "dose vector does not cover every treated unit");
  return f;
}

}  // namespace dosedid
