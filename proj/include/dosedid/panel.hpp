#pragma once

// Panel data model: units observed in two tax periods (t = 0 before, t = 1
// after) across M matched seasonal periods, plus the zip-code geography used
// for exposure mapping and spatial blocks.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "dosedid/errors.hpp"

namespace dosedid {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_present(double v) { return !std::isnan(v); }

struct LatLon {
  double lat = kMissing;
  double lon = kMissing;
  bool valid() const { return std::isfinite(lat) && std::isfinite(lon); }
};

struct UnitRecord {
  std::string unit_id;
  int group = 0;  // 1 = taxed region
  std::string zip_id;
  LatLon centroid;
  // Auxiliary (price-only) units feed competition measures but never enter
  // an estimation sample.
  bool analytic = true;
  // covariates[m - 1][k]
  std::vector<std::vector<double>> covariates;
  // outcomes[t][m - 1], prices[t][m - 1]; NaN when not observed
  std::array<std::vector<double>, 2> outcomes;
  std::array<std::vector<double>, 2> prices;

  void resize(int n_periods, std::size_t n_covariates) {
    covariates.assign(static_cast<std::size_t>(n_periods),
                      std::vector<double>(n_covariates, kMissing));
    for (int t = 0; t < 2; ++t) {
      outcomes[t].assign(static_cast<std::size_t>(n_periods), kMissing);
      prices[t].assign(static_cast<std::size_t>(n_periods), kMissing);
    }
  }

  double outcome(int t, int m) const { return outcomes[t][static_cast<std::size_t>(m - 1)]; }
  double price(int t, int m) const { return prices[t][static_cast<std::size_t>(m - 1)]; }
};

struct NeighborhoodGraph {
  std::map<std::string, std::set<std::string>> adjacency;
  std::map<std::string, std::vector<std::size_t>> members;
  std::map<std::string, bool> taxed;
  std::map<std::string, LatLon> centroids;

  bool has_zip(const std::string& zip) const { return taxed.count(zip) > 0; }

  bool is_taxed(const std::string& zip) const {
    auto it = taxed.find(zip);
    return it != taxed.end() && it->second;
  }

  // Own zip followed by its adjacent zips (sorted). With taxed_only, untaxed
  // zips are removed.
  std::vector<std::string> neighborhood(const std::string& zip, bool taxed_only = false) const {
    std::vector<std::string> out;
    if (!taxed_only || is_taxed(zip)) out.push_back(zip);
    if (auto it = adjacency.find(zip); it != adjacency.end()) {
      for (const auto& z : it->second) {
        if (z == zip) continue;
        if (taxed_only && !is_taxed(z)) continue;
        out.push_back(z);
      }
    }
    return out;
  }

  std::size_t degree(const std::string& zip) const {
    auto it = adjacency.find(zip);
    if (it == adjacency.end()) return 0;
    return it->second.size() - it->second.count(zip);
  }

  bool symmetric() const {
    for (const auto& [a, nbrs] : adjacency) {
      for (const auto& b : nbrs) {
        auto it = adjacency.find(b);
        if (it == adjacency.end() || it->second.count(a) == 0) return false;
      }
    }
    return true;
  }
};

struct PanelDataset {
  std::vector<UnitRecord> units;
  NeighborhoodGraph graph;
  int n_periods = 0;
  std::vector<std::string> covariate_names;

  std::vector<std::size_t> analytic_units() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < units.size(); ++i)
      if (units[i].analytic) out.push_back(i);
    return out;
  }

  std::vector<std::size_t> treated_units() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < units.size(); ++i)
      if (units[i].analytic && units[i].group == 1) out.push_back(i);
    return out;
  }

  std::size_t covariate_index(const std::string& name) const {
    auto it = std::find(covariate_names.begin(), covariate_names.end(), name);
    if (it == covariate_names.end())
      throw Error("panel_core", ErrorKind::MissingColumn, "unknown covariate '" + name + "'");
    return static_cast<std::size_t>(it - covariate_names.begin());
  }

  // Rebuilds graph.members from the unit list.
  void index_members() {
    graph.members.clear();
    for (std::size_t i = 0; i < units.size(); ++i) graph.members[units[i].zip_id].push_back(i);
  }

  void validate() const {
    if (n_periods < 1)
      throw Error("panel_core", ErrorKind::InvalidInput, "panel has no periods");
    std::unordered_set<std::string> ids;
    std::size_t n_treated = 0, n_control = 0;
    for (const auto& u : units) {
      if (!ids.insert(u.unit_id).second)
        throw Error("panel_core", ErrorKind::InvalidInput, "duplicate unit_id '" + u.unit_id + "'");
      if (u.group != 0 && u.group != 1)
        throw Error("panel_core", ErrorKind::NonBinaryGroup,
                    "unit '" + u.unit_id + "' has group " + std::to_string(u.group));
      if (!graph.has_zip(u.zip_id))
        throw Error("panel_core", ErrorKind::InvalidInput,
                    "unit '" + u.unit_id + "' is in zip '" + u.zip_id + "' missing from the zip table");
      if (u.outcomes[0].size() != static_cast<std::size_t>(n_periods) ||
          u.covariates.size() != static_cast<std::size_t>(n_periods))
        throw Error("panel_core", ErrorKind::InvalidInput,
                    "unit '" + u.unit_id + "' storage does not match the period count");
      if (!u.analytic) continue;
      (u.group == 1 ? n_treated : n_control)++;
      for (int m = 1; m <= n_periods; ++m) {
        if (!is_present(u.outcome(0, m)) && !is_present(u.outcome(1, m))) continue;
        for (std::size_t k = 0; k < covariate_names.size(); ++k) {
          if (!std::isfinite(u.covariates[static_cast<std::size_t>(m - 1)][k]))
            throw Error("panel_core", ErrorKind::InvalidInput,
                        "unit '" + u.unit_id + "' has a non-finite covariate '" + covariate_names[k] +
                            "' in period " + std::to_string(m));
        }
      }
    }
    if (n_treated == 0 || n_control == 0)
      throw Error("panel_core", ErrorKind::InvalidInput,
                  "panel needs at least one treated and one control analytic unit");
    if (!graph.symmetric())
      throw Error("panel_core", ErrorKind::AsymmetricAdjacency, "zip adjacency is not symmetric");
  }
};

// One (t, m) cell of the panel.
struct PeriodRef {
  int t = 0;
  int m = 1;
};

// One row per analytic unit: Y0, Y1, their difference and the covariates.
struct MatchedPeriodSlice {
  int period = 0;
  std::vector<std::size_t> units;  // indices into PanelDataset::units
  std::vector<std::string> unit_ids;
  std::vector<int> group;
  Eigen::VectorXd y0, y1, dy;
  Eigen::MatrixXd x;  // n x p
  std::vector<std::string> covariate_names;

  Eigen::Index size() const { return static_cast<Eigen::Index>(units.size()); }
  std::size_t n_treated() const { return static_cast<std::size_t>(std::count(group.begin(), group.end(), 1)); }
};

// General two-cell contrast: Y0 from `before`, Y1 from `after`, covariates
// from `covariate_period`. The ordinary matched slice and the placebo slices
// are both instances.
inline MatchedPeriodSlice slice_contrast(const PanelDataset& panel, PeriodRef before, PeriodRef after,
                                         int covariate_period, int label) {
  for (int m : {before.m, after.m, covariate_period}) {
    if (m < 1 || m > panel.n_periods)
      throw Error("panel_core", ErrorKind::PeriodOutOfRange,
                  "period " + std::to_string(m) + " outside 1.." + std::to_string(panel.n_periods));
  }
  MatchedPeriodSlice s;
  s.period = label;
  s.covariate_names = panel.covariate_names;
  const auto rows = panel.analytic_units();
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto p = static_cast<Eigen::Index>(panel.covariate_names.size());
  s.y0.resize(n);
  s.y1.resize(n);
  s.dy.resize(n);
  s.x.resize(n, p);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& u = panel.units[rows[static_cast<std::size_t>(r)]];
    const double a = u.outcome(before.t, before.m);
    const double b = u.outcome(after.t, after.m);
    if (!std::isfinite(a))
      throw Error("panel_core", ErrorKind::MissingOutcome,
                  "unit '" + u.unit_id + "' missing outcome at t=" + std::to_string(before.t) +
                      ", m=" + std::to_string(before.m));
    if (!std::isfinite(b))
      throw Error("panel_core", ErrorKind::MissingOutcome,
                  "unit '" + u.unit_id + "' missing outcome at t=" + std::to_string(after.t) +
                      ", m=" + std::to_string(after.m));
    s.units.push_back(rows[static_cast<std::size_t>(r)]);
    s.unit_ids.push_back(u.unit_id);
    s.group.push_back(u.group);
    s.y0(r) = a;
    s.y1(r) = b;
    s.dy(r) = b - a;
    const auto& cov = u.covariates[static_cast<std::size_t>(covariate_period - 1)];
    for (Eigen::Index k = 0; k < p; ++k) s.x(r, k) = cov[static_cast<std::size_t>(k)];
  }
  return s;
}

inline MatchedPeriodSlice slice_matched_period(const PanelDataset& panel, int m) {
  if (m < 1 || m > panel.n_periods)
    throw Error("panel_core", ErrorKind::PeriodOutOfRange,
                "period " + std::to_string(m) + " outside 1.." + std::to_string(panel.n_periods));
  return slice_contrast(panel, {0, m}, {1, m}, m, m);
}

}  // namespace dosedid
