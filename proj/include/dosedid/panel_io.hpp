#pragma once

// CSV ingestion and emission of panels.
//
//   units.csv      long format, one row per (unit, t, m)
//   adjacency.csv  zip_a,zip_b
//   zips.csv       zip,taxed,lat,lon
//
// Adjacency rows are undirected edges and are symmetrized. A file that lists
// any pair in both orders is read as a per-zip neighbour listing instead, and
// then every listed pair must also appear reversed (AsymmetricAdjacency
// otherwise).

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "dosedid/csv.hpp"
#include "dosedid/panel.hpp"

namespace dosedid {

struct PanelSchema {
  std::string unit_id = "unit_id";
  std::string group = "group";
  std::string zip = "zip";
  std::string t = "t";
  std::string m = "m";
  std::string outcome = "outcome";
  std::string price = "price";
  // Optional column; values "analytic" (default) or "auxiliary".
  std::string role = "role";
  // Empty: every column not mapped to a role above is a covariate.
  std::vector<std::string> covariates;
  // 0: inferred as the largest m present.
  int n_periods = 0;
};

struct PanelFiles {
  std::string units;
  std::string adjacency;
  std::string zips;
};

namespace detail {

inline std::string row_ref(const csv::Table& t, std::size_t row) {
  return t.source + " row " + std::to_string(row + 2);
}

inline void read_zip_table(const std::string& path, NeighborhoodGraph& g) {
  const auto t = csv::read(path);
  const auto c_zip = t.require("zip");
  const auto c_taxed = t.require("taxed");
  const auto c_lat = t.find("lat");
  const auto c_lon = t.find("lon");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto taxed = csv::parse_int(row[c_taxed]);
    if (!taxed || (*taxed != 0 && *taxed != 1))
      throw Error("panel_core", ErrorKind::NonBinaryGroup,
                  row_ref(t, r) + ": column 'taxed' must be 0 or 1, got '" + row[c_taxed] + "'");
    const std::string& zip = row[c_zip];
    if (g.taxed.count(zip))
      throw Error("panel_core", ErrorKind::InvalidInput, row_ref(t, r) + ": duplicate zip '" + zip + "'");
    g.taxed[zip] = *taxed == 1;
    g.adjacency[zip];
    LatLon c;
    if (c_lat && c_lon) {
      if (auto v = csv::parse_double(row[*c_lat])) c.lat = *v;
      if (auto v = csv::parse_double(row[*c_lon])) c.lon = *v;
    }
    if (c.valid()) g.centroids[zip] = c;
  }
}

inline void read_adjacency(const std::string& path, NeighborhoodGraph& g) {
  const auto t = csv::read(path);
  const auto c_a = t.require("zip_a");
  const auto c_b = t.require("zip_b");
  std::set<std::pair<std::string, std::string>> listed;
  std::map<std::pair<std::string, std::string>, std::size_t> first_row;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& a = t.rows[r][c_a];
    const auto& b = t.rows[r][c_b];
    for (const auto* z : {&a, &b}) {
      if (!g.has_zip(*z))
        throw Error("panel_core", ErrorKind::InvalidInput,
                    row_ref(t, r) + ": zip '" + *z + "' is not in the zip table");
    }
    if (a == b) continue;
    listed.insert({a, b});
    first_row.emplace(std::make_pair(a, b), r);
  }
  bool directed = false;
  for (const auto& [a, b] : listed)
    if (listed.count({b, a})) directed = true;
  if (directed) {
    for (const auto& [a, b] : listed) {
      if (!listed.count({b, a}))
        throw Error("panel_core", ErrorKind::AsymmetricAdjacency,
                    row_ref(t, first_row.at({a, b})) + ": zip '" + a + "' lists '" + b +
                        "' as a neighbour but not vice versa");
    }
  }
  for (const auto& [a, b] : listed) {
    g.adjacency[a].insert(b);
    g.adjacency[b].insert(a);
  }
}

}  // namespace detail

inline PanelDataset ingest_panel(const PanelFiles& files, const PanelSchema& schema = {}) {
  PanelDataset panel;
  detail::read_zip_table(files.zips, panel.graph);
  detail::read_adjacency(files.adjacency, panel.graph);

  const auto t = csv::read(files.units);
  const auto c_id = t.require(schema.unit_id);
  const auto c_group = t.require(schema.group);
  const auto c_zip = t.require(schema.zip);
  const auto c_t = t.require(schema.t);
  const auto c_m = t.require(schema.m);
  const auto c_y = t.require(schema.outcome);
  const auto c_price = t.require(schema.price);
  const auto c_role = t.find(schema.role);

  std::vector<std::size_t> c_cov;
  if (schema.covariates.empty()) {
    std::set<std::size_t> used = {c_id, c_group, c_zip, c_t, c_m, c_y, c_price};
    if (c_role) used.insert(*c_role);
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      if (used.count(c)) continue;
      c_cov.push_back(c);
      panel.covariate_names.push_back(t.header[c]);
    }
  } else {
    for (const auto& name : schema.covariates) {
      c_cov.push_back(t.require(name));
      panel.covariate_names.push_back(name);
    }
  }

  int max_m = 0;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto m = csv::parse_int(t.rows[r][c_m]);
    if (!m || *m < 1)
      throw Error("panel_core", ErrorKind::PeriodOutOfRange,
                  detail::row_ref(t, r) + ": column '" + schema.m + "' must be a positive integer");
    max_m = std::max(max_m, static_cast<int>(*m));
  }
  panel.n_periods = schema.n_periods > 0 ? schema.n_periods : max_m;
  if (max_m > panel.n_periods)
    throw Error("panel_core", ErrorKind::PeriodOutOfRange,
                files.units + ": period " + std::to_string(max_m) + " exceeds M=" + std::to_string(panel.n_periods));

  std::unordered_map<std::string, std::size_t> index;
  std::set<std::tuple<std::size_t, int, int>> seen;
  // Covariates come from the t = 0 row of a period when present.
  std::set<std::pair<std::size_t, int>> cov_from_pre;

  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = detail::row_ref(t, r);
    const auto group = csv::parse_int(row[c_group]);
    if (!group || (*group != 0 && *group != 1))
      throw Error("panel_core", ErrorKind::NonBinaryGroup,
                  where + ": column '" + schema.group + "' must be 0 or 1, got '" + row[c_group] + "'");
    const auto tt = csv::parse_int(row[c_t]);
    if (!tt || (*tt != 0 && *tt != 1))
      throw Error("panel_core", ErrorKind::InvalidInput,
                  where + ": column '" + schema.t + "' must be 0 or 1, got '" + row[c_t] + "'");
    const int m = static_cast<int>(*csv::parse_int(row[c_m]));
    bool analytic = true;
    if (c_role) {
      const auto& role = row[*c_role];
      if (role == "auxiliary") analytic = false;
      else if (!role.empty() && role != "analytic")
        throw Error("panel_core", ErrorKind::InvalidInput,
                    where + ": column '" + schema.role + "' must be 'analytic' or 'auxiliary'");
    }

    const std::string& id = row[c_id];
    auto [it, inserted] = index.emplace(id, panel.units.size());
    if (inserted) {
      UnitRecord u;
      u.unit_id = id;
      u.group = static_cast<int>(*group);
      u.zip_id = row[c_zip];
      u.analytic = analytic;
      u.resize(panel.n_periods, c_cov.size());
      if (!panel.graph.has_zip(u.zip_id))
        throw Error("panel_core", ErrorKind::InvalidInput,
                    where + ": zip '" + u.zip_id + "' is not in the zip table");
      if (auto c = panel.graph.centroids.find(u.zip_id); c != panel.graph.centroids.end())
        u.centroid = c->second;
      panel.units.push_back(std::move(u));
    }
    const std::size_t ui = it->second;
    auto& u = panel.units[ui];
    if (u.group != *group || u.zip_id != row[c_zip] || u.analytic != analytic)
      throw Error("panel_core", ErrorKind::InvalidInput,
                  where + ": unit '" + id + "' changes group, zip or role between rows");
    if (!seen.insert({ui, static_cast<int>(*tt), m}).second)
      throw Error("panel_core", ErrorKind::DuplicateUnitPeriod,
                  where + ": unit '" + id + "' repeats (t=" + std::to_string(*tt) + ", m=" + std::to_string(m) + ")");

    const auto y = csv::parse_double(row[c_y]);
    if (!y && analytic)
      throw Error("panel_core", ErrorKind::MissingOutcome,
                  where + ": analytic unit '" + id + "' has no outcome in column '" + schema.outcome + "'");
    const auto ti = static_cast<std::size_t>(*tt);
    const auto mi = static_cast<std::size_t>(m - 1);
    u.outcomes[ti][mi] = y.value_or(kMissing);
    u.prices[ti][mi] = csv::parse_double(row[c_price]).value_or(kMissing);

    const bool take_cov = *tt == 0 || !cov_from_pre.count({ui, m});
    if (*tt == 0) cov_from_pre.insert({ui, m});
    if (take_cov) {
      for (std::size_t k = 0; k < c_cov.size(); ++k) {
        const auto v = csv::parse_double(row[c_cov[k]]);
        if (!v && analytic)
          throw Error("panel_core", ErrorKind::InvalidInput,
                      where + ": covariate '" + t.header[c_cov[k]] + "' is not a finite number");
        u.covariates[mi][k] = v.value_or(kMissing);
      }
    }
  }

  panel.index_members();
  panel.validate();
  return panel;
}

// Writes units.csv, adjacency.csv and zips.csv under `dir` in the default schema.
inline PanelFiles write_panel(const PanelDataset& panel, const std::filesystem::path& dir,
                              const std::vector<std::string>& header_lines = {}) {
  std::filesystem::create_directories(dir);
  PanelFiles files{(dir / "units.csv").string(), (dir / "adjacency.csv").string(), (dir / "zips.csv").string()};

  {
    csv::Writer w(files.zips);
    for (const auto& h : header_lines) w.comment(h);
    w.row("zip", "taxed", "lat", "lon");
    for (const auto& [zip, taxed] : panel.graph.taxed) {
      LatLon c;
      if (auto it = panel.graph.centroids.find(zip); it != panel.graph.centroids.end()) c = it->second;
      w.row(zip, taxed ? 1 : 0, c.lat, c.lon);
    }
  }
  {
    csv::Writer w(files.adjacency);
    for (const auto& h : header_lines) w.comment(h);
    w.row("zip_a", "zip_b");
    for (const auto& [a, nbrs] : panel.graph.adjacency)
      for (const auto& b : nbrs)
        if (a < b) w.row(a, b);
  }
  {
    csv::Writer w(files.units);
    for (const auto& h : header_lines) w.comment(h);
    std::vector<std::string> header = {"unit_id", "group", "zip", "role", "t", "m", "outcome", "price"};
    header.insert(header.end(), panel.covariate_names.begin(), panel.covariate_names.end());
    w.row(header);
    for (const auto& u : panel.units) {
      for (int tt = 0; tt < 2; ++tt) {
        for (int m = 1; m <= panel.n_periods; ++m) {
          const double y = u.outcome(tt, m);
          const double p = u.price(tt, m);
          if (!is_present(y) && !is_present(p)) continue;
          std::vector<std::string> cells = {u.unit_id,
                                            std::to_string(u.group),
                                            u.zip_id,
                                            u.analytic ? "analytic" : "auxiliary",
                                            std::to_string(tt),
                                            std::to_string(m),
                                            is_present(y) ? csv::format(y) : "",
                                            is_present(p) ? csv::format(p) : ""};
          for (double v : u.covariates[static_cast<std::size_t>(m - 1)])
            cells.push_back(is_present(v) ? csv::format(v) : "");
          w.row(cells);
        }
      }
    }
  }
  return files;
}

}  // namespace dosedid
