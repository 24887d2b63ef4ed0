#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "json.hpp"

#include "dosedid/estimators.hpp"
#include "dosedid/panel_io.hpp"
#include "dosedid/simlab.hpp"

namespace testing_support {

namespace fs = std::filesystem;

inline fs::path data_dir() { return fs::path(DOSEDID_TEST_DATA); }

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("dosedid_test_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline dosedid::PanelFiles tiny_files() {
  const auto d = data_dir() / "tiny";
  return {(d / "units.csv").string(), (d / "adjacency.csv").string(), (d / "zips.csv").string()};
}

// Literal-table fixture: frame, nuisance values and oracle input built from
// tests/data/fixture6.json.
struct Fixture6 {
  nlohmann::json raw;
  dosedid::AnalysisFrame frame;
  dosedid::NuisanceValues values;
  dosedid::sim::OracleInput oracle;
};

inline Fixture6 load_fixture6(const std::vector<std::size_t>& order = {0, 1, 2, 3, 4, 5}) {
  Fixture6 f;
  std::ifstream in(data_dir() / "fixture6.json");
  f.raw = nlohmann::json::parse(in);
  const auto& units = f.raw["units"];
  const auto n = static_cast<Eigen::Index>(order.size());
  std::vector<std::size_t> treated_fixture;  // fixture index of treated units, fixture order
  for (std::size_t k = 0; k < units.size(); ++k)
    if (units[k]["group"].get<int>() == 1) treated_fixture.push_back(k);
  auto& fr = f.frame;
  fr.period = 1;
  fr.dy.resize(n);
  fr.x = Eigen::MatrixXd::Zero(n, 1);
  f.values.mu0.resize(n);
  f.values.pi_a.resize(n);
  // Rows follow `order`; dose rows keep fixture order so the cross tables
  // are unchanged.
  std::vector<Eigen::Index> row_of(units.size());
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto k = order[static_cast<std::size_t>(r)];
    row_of[k] = r;
    const auto& u = units[k];
    fr.units.push_back(k);
    fr.group.push_back(u["group"].get<int>());
    fr.dy(r) = u["dy"].get<double>();
    f.values.mu0(r) = u["mu0"].get<double>();
    f.values.pi_a(r) = u["pi_a"].get<double>();
    f.oracle.a.push_back(fr.group.back());
    f.oracle.dy.push_back(fr.dy(r));
    f.oracle.mu0.push_back(f.values.mu0(r));
    f.oracle.pi_a.push_back(f.values.pi_a(r));
  }
  const auto n1 = static_cast<Eigen::Index>(treated_fixture.size());
  fr.dose = Eigen::MatrixXd::Zero(n1, 1);
  for (Eigen::Index i = 0; i < n1; ++i) {
    fr.treated.push_back(row_of[treated_fixture[static_cast<std::size_t>(i)]]);
    fr.dose(i, 0) = static_cast<double>(i);
    f.oracle.treated.push_back(static_cast<std::size_t>(fr.treated.back()));
  }
  fr.dose_names = {"dose"};
  f.values.mu1_cross.resize(n1, n1);
  f.values.pid_cross.resize(n1, n1);
  for (Eigen::Index i = 0; i < n1; ++i) {
    std::vector<double> mu1_row, pid_row;
    for (Eigen::Index j = 0; j < n1; ++j) {
      f.values.mu1_cross(i, j) = f.raw["mu1"][static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].get<double>();
      f.values.pid_cross(i, j) = f.raw["pid"][static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].get<double>();
      mu1_row.push_back(f.values.mu1_cross(i, j));
      pid_row.push_back(f.values.pid_cross(i, j));
    }
    f.oracle.mu1.push_back(mu1_row);
    f.oracle.pid.push_back(pid_row);
  }
  return f;
}

inline dosedid::sim::DgpSpec small_spec(std::uint64_t seed = 11) {
  dosedid::sim::DgpSpec s;
  s.n1 = 60;
  s.n0 = 50;
  s.periods = 5;
  s.seed = seed;
  return s;
}

}  // namespace testing_support
