#pragma once

// Driver doses (border proximity, price change, neighbourhood price
// competition) and the adjustment set each driver needs.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dosedid/csv.hpp"
#include "dosedid/panel.hpp"
#include "dosedid/stats.hpp"

namespace dosedid {

inline constexpr double kEarthRadiusMiles = 3958.8;

enum class DriverKind { BorderDistance, Competition, JointPriceCompetition };

inline std::string to_string(DriverKind k) {
  switch (k) {
    case DriverKind::BorderDistance: return "border_distance";
    case DriverKind::Competition: return "competition";
    case DriverKind::JointPriceCompetition: return "joint_price_competition";
  }
  return "unknown";
}

inline DriverKind parse_driver(const std::string& s) {
  if (s == "border_distance" || s == "border") return DriverKind::BorderDistance;
  if (s == "competition") return DriverKind::Competition;
  if (s == "joint_price_competition" || s == "joint") return DriverKind::JointPriceCompetition;
  throw Error("exposure", ErrorKind::InvalidConfig, "unknown driver '" + s + "'");
}

// Per-treated-unit scalar, aligned with PanelDataset::treated_units().
struct UnitValues {
  std::vector<std::size_t> units;
  Eigen::VectorXd values;
};

struct DoseVector {
  DriverKind kind = DriverKind::BorderDistance;
  std::vector<std::size_t> units;  // treated analytic units, panel order
  std::vector<std::string> names;  // one per dimension
  Eigen::MatrixXd values;          // n1 x dim
  std::vector<std::array<double, 2>> support;  // 5th / 95th percentile per dimension

  Eigen::Index dim() const { return values.cols(); }
  Eigen::Index size() const { return values.rows(); }

  void compute_support(double lo = 0.05, double hi = 0.95) {
    support.clear();
    for (Eigen::Index k = 0; k < values.cols(); ++k) {
      Eigen::VectorXd col = values.col(k);
      support.push_back({stats::quantile(col, lo), stats::quantile(col, hi)});
    }
  }
};

struct AdjustmentSpec {
  DriverKind driver = DriverKind::BorderDistance;
  // Panel covariates; used by every nuisance model.
  std::vector<std::string> confounders;
  // Driver-specific additions, defined for treated units only; used by the
  // dose-side models (treated trend, dose density).
  std::vector<std::string> adjusters;
  Eigen::MatrixXd adjuster_values;  // n1 x adjusters.size(), aligned with DoseVector::units

  bool includes(const std::string& name) const {
    return std::find(confounders.begin(), confounders.end(), name) != confounders.end() ||
           std::find(adjusters.begin(), adjusters.end(), name) != adjusters.end();
  }
};

inline double great_circle_miles(LatLon a, LatLon b) {
  constexpr double deg = std::numbers::pi / 180.0;
  const double dlat = (b.lat - a.lat) * deg;
  const double dlon = (b.lon - a.lon) * deg;
  const double s = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(a.lat * deg) * std::cos(b.lat * deg) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusMiles * std::asin(std::min(1.0, std::sqrt(s)));
}

// Number of post-period price windows used for P_i and h_it: the first three
// periods, or all of them on shorter panels.
inline int price_window(const PanelDataset& panel) { return std::min(3, panel.n_periods); }

namespace detail {

inline double mean_price(const UnitRecord& u, int t, int first, int last) {
  double s = 0.0;
  for (int m = first; m <= last; ++m) {
    const double p = u.price(t, m);
    if (!std::isfinite(p))
      throw Error("exposure", ErrorKind::MissingPrice,
                  "unit '" + u.unit_id + "' has no price at t=" + std::to_string(t) + ", m=" + std::to_string(m));
    s += p;
  }
  return s / static_cast<double>(last - first + 1);
}

}  // namespace detail

inline UnitValues border_distance(const PanelDataset& panel) {
  std::vector<LatLon> untaxed;
  for (const auto& [zip, taxed] : panel.graph.taxed) {
    if (taxed) continue;
    auto it = panel.graph.centroids.find(zip);
    if (it == panel.graph.centroids.end())
      throw Error("exposure", ErrorKind::MissingCentroid, "untaxed zip '" + zip + "' has no centroid");
    untaxed.push_back(it->second);
  }
  if (untaxed.empty()) throw Error("exposure", ErrorKind::NoUntaxedZip, "no untaxed zip in the zip table");

  UnitValues out;
  out.units = panel.treated_units();
  out.values.resize(static_cast<Eigen::Index>(out.units.size()));
  for (std::size_t r = 0; r < out.units.size(); ++r) {
    const auto& u = panel.units[out.units[r]];
    auto it = panel.graph.centroids.find(u.zip_id);
    if (it == panel.graph.centroids.end())
      throw Error("exposure", ErrorKind::MissingCentroid, "zip '" + u.zip_id + "' has no centroid");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : untaxed) best = std::min(best, great_circle_miles(it->second, c));
    out.values(static_cast<Eigen::Index>(r)) = best;
  }
  return out;
}

// P_i = mean post price over the price window - mean pre price over all periods.
inline UnitValues price_change(const PanelDataset& panel) {
  UnitValues out;
  out.units = panel.treated_units();
  out.values.resize(static_cast<Eigen::Index>(out.units.size()));
  const int w = price_window(panel);
  for (std::size_t r = 0; r < out.units.size(); ++r) {
    const auto& u = panel.units[out.units[r]];
    out.values(static_cast<Eigen::Index>(r)) =
        detail::mean_price(u, 1, 1, w) - detail::mean_price(u, 0, 1, panel.n_periods);
  }
  return out;
}

// h_it = own mean price over the window - min price at any other store in the
// neighbourhood over the same window. Untaxed zips are dropped from the
// neighbourhood when within_treated_only is set.
inline UnitValues price_competition(const PanelDataset& panel, int t, bool within_treated_only) {
  UnitValues out;
  out.units = panel.treated_units();
  out.values.resize(static_cast<Eigen::Index>(out.units.size()));
  const int w = price_window(panel);
  for (std::size_t r = 0; r < out.units.size(); ++r) {
    const std::size_t i = out.units[r];
    const auto& u = panel.units[i];
    const double own = detail::mean_price(u, t, 1, w);
    double lowest = std::numeric_limits<double>::infinity();
    for (const auto& zip : panel.graph.neighborhood(u.zip_id, within_treated_only)) {
      auto it = panel.graph.members.find(zip);
      if (it == panel.graph.members.end()) continue;
      for (std::size_t j : it->second) {
        if (j == i) continue;
        for (int m = 1; m <= w; ++m) {
          const double p = panel.units[j].price(t, m);
          if (std::isfinite(p)) lowest = std::min(lowest, p);
        }
      }
    }
    if (!std::isfinite(lowest))
      throw Error("exposure", ErrorKind::EmptyNeighborhood,
                  "unit '" + u.unit_id + "' has no priced store in its neighbourhood");
    out.values(static_cast<Eigen::Index>(r)) = own - lowest;
  }
  return out;
}

struct DoseAssignment {
  DoseVector dose;
  AdjustmentSpec adjustment;
};

inline DoseAssignment assemble_dose(const PanelDataset& panel, DriverKind kind) {
  DoseAssignment out;
  auto& d = out.dose;
  auto& a = out.adjustment;
  d.kind = kind;
  a.driver = kind;
  a.confounders = panel.covariate_names;
  d.units = panel.treated_units();
  const auto n1 = static_cast<Eigen::Index>(d.units.size());

  auto set_columns = [n1](Eigen::MatrixXd& m, std::initializer_list<const UnitValues*> cols) {
    m.resize(n1, static_cast<Eigen::Index>(cols.size()));
    Eigen::Index k = 0;
    for (const auto* c : cols) m.col(k++) = c->values;
  };

  switch (kind) {
    case DriverKind::BorderDistance: {
      const auto b = border_distance(panel);
      const auto h = price_competition(panel, 1, true);
      d.names = {"border_distance"};
      set_columns(d.values, {&b});
      a.adjusters = {"competition_within_treated"};
      set_columns(a.adjuster_values, {&h});
      break;
    }
    case DriverKind::Competition: {
      const auto h = price_competition(panel, 1, false);
      const auto b = border_distance(panel);
      const auto p = price_change(panel);
      d.names = {"competition"};
      set_columns(d.values, {&h});
      a.adjusters = {"border_distance", "price_change"};
      set_columns(a.adjuster_values, {&b, &p});
      break;
    }
    case DriverKind::JointPriceCompetition: {
      const auto p = price_change(panel);
      const auto h1 = price_competition(panel, 1, false);
      const auto b = border_distance(panel);
      const auto h0 = price_competition(panel, 0, false);
      d.names = {"price_change", "competition"};
      set_columns(d.values, {&p, &h1});
      a.adjusters = {"border_distance", "pre_competition"};
      set_columns(a.adjuster_values, {&b, &h0});
      break;
    }
  }
  d.compute_support();
  return out;
}

inline void write_dose_csv(const PanelDataset& panel, const DoseVector& dose, const std::string& path) {
  csv::Writer w(path);
  std::vector<std::string> header = {"unit_id"};
  for (Eigen::Index k = 0; k < dose.dim(); ++k) header.push_back("dose_" + std::to_string(k + 1));
  w.row(header);
  for (Eigen::Index r = 0; r < dose.size(); ++r) {
    std::vector<std::string> cells = {panel.units[dose.units[static_cast<std::size_t>(r)]].unit_id};
    for (Eigen::Index k = 0; k < dose.dim(); ++k) cells.push_back(csv::format(dose.values(r, k)));
    w.row(cells);
  }
}

}  // namespace dosedid
