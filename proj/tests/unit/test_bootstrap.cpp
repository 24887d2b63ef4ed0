#include <gtest/gtest.h>

#include "dosedid/bootstrap.hpp"
#include "dosedid/panel_io.hpp"
#include "support.hpp"

using namespace dosedid;
using namespace testing_support;

namespace {

// One unit per zip; zip names sort in unit order.
PanelDataset one_unit_per_zip(const std::vector<int>& groups, const std::string& adjacency) {
  std::string units = "unit_id,group,zip,t,m,outcome,price,x1\n";
  std::string zips = "zip,taxed,lat,lon\n";
  for (std::size_t k = 0; k < groups.size(); ++k) {
    const std::string id = std::string(1, static_cast<char>('a' + k));
    const std::string zip = std::string(1, static_cast<char>('A' + k));
    const std::string g = std::to_string(groups[k]);
    const std::string price = groups[k] ? "2" : "";
    for (int t = 0; t < 2; ++t)
      units += id + "," + g + "," + zip + "," + std::to_string(t) + ",1," +
               std::to_string(k * 0.7 + t * (1.0 + 0.3 * k) + 0.1 * groups[k]) + "," + price + ",0\n";
    zips += zip + "," + g + ",40," + std::to_string(-75.0 - 0.1 * static_cast<double>(k)) + "\n";
  }
  TempDir dir;
  write_file(dir / "u.csv", units);
  write_file(dir / "a.csv", "zip_a,zip_b\n" + adjacency);
  write_file(dir / "z.csv", zips);
  return ingest_panel({(dir / "u.csv").string(), (dir / "a.csv").string(), (dir / "z.csv").string()});
}

std::vector<double> mean_difference(const PanelDataset& p, const std::vector<double>& w) {
  double s[2] = {0, 0}, t[2] = {0, 0};
  for (auto i : p.analytic_units()) {
    const int g = p.units[i].group;
    s[g] += w[i] * (p.units[i].outcome(1, 1) - p.units[i].outcome(0, 1));
    t[g] += w[i];
  }
  return {s[1] / t[1] - s[0] / t[0]};
}

}  // namespace

TEST(Blocks, LineOfThreeZips) {
  const auto p = one_unit_per_zip({1, 1, 0}, "A,B\nB,C\n");
  const auto b = build_blocks(p);
  ASSERT_EQ(b.zips, (std::vector<std::string>{"A", "B", "C"}));
  EXPECT_EQ(b.blocks[1], (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(b.blocks[0], (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(b.blocks[2], (std::vector<std::size_t>{1, 2}));
}

TEST(Blocks, TinyFixtureIsolatedZipAndEmptyBlocks) {
  const auto p = ingest_panel(tiny_files());
  const auto b = build_blocks(p);
  ASSERT_EQ(b.zips, (std::vector<std::string>{"A", "B", "C", "D"}));
  EXPECT_EQ(b.blocks[2], (std::vector<std::size_t>{2}));        // C has no units; neighbour B does
  EXPECT_EQ(b.blocks[3], (std::vector<std::size_t>{3, 4, 5}));  // isolated D
  EXPECT_EQ(b.membership[1], 0);                                // auxiliary store
  EXPECT_EQ(b.membership[0], 2);
  EXPECT_EQ(b.membership[2], 3);
}

TEST(Blocks, SimulatedMembershipIsOnePlusDegree) {
  const auto s = sim::generate(small_spec(), false);
  const auto b = build_blocks(s.panel);
  for (auto i : s.panel.analytic_units()) {
    const auto& zip = s.panel.units[i].zip_id;
    EXPECT_EQ(static_cast<std::size_t>(b.membership[i]), 1 + s.panel.graph.degree(zip)) << zip;
  }
}

TEST(Weights, OverlappingBlocksArithmetic) {
  const auto p = one_unit_per_zip({0, 0, 0, 1}, "");
  BlockStructure b;
  b.zips = {"x", "y", "z"};
  b.blocks = {{0, 1}, {1, 2}, {3}};
  b.membership = {1, 2, 1, 1};
  const auto w = weights_from_draws(b, p, {1.0, 2.0, 0.7});
  EXPECT_EQ(w.raw, (std::vector<double>{1.0, 3.0, 2.0, 0.7}));
  EXPECT_NEAR(w.normalized[0], 0.5, 1e-15);
  EXPECT_NEAR(w.normalized[1], 1.5, 1e-15);
  EXPECT_NEAR(w.normalized[2], 1.0, 1e-15);
  EXPECT_NEAR(w.normalized[3], 1.0, 1e-15);
  EXPECT_THROW(weights_from_draws(b, p, {1.0}), Error);
}

TEST(Weights, SingleBlockGivesUnitWeights) {
  const auto p = ingest_panel(tiny_files());
  BlockStructure b;
  b.zips = {"all"};
  b.blocks = {p.analytic_units()};
  const auto w = weights_from_draws(b, p, {0.37});
  for (auto i : p.analytic_units()) EXPECT_DOUBLE_EQ(w.normalized[i], 1.0);
  EXPECT_DOUBLE_EQ(w.normalized[1], 0.0);
}

TEST(Weights, DrawsReproducibleAndExponential) {
  const auto p = ingest_panel(tiny_files());
  const auto b = build_blocks(p);
  EXPECT_EQ(draw_weights(b, p, 9, 4).block_draws, draw_weights(b, p, 9, 4).block_draws);
  EXPECT_NE(draw_weights(b, p, 9, 4).block_draws, draw_weights(b, p, 9, 5).block_draws);
  std::vector<double> all;
  for (std::uint64_t r = 0; r < 10000; ++r) {
    const auto w = draw_weights(b, p, 3, r);
    all.insert(all.end(), w.block_draws.begin(), w.block_draws.end());
    double s = 0;
    for (auto i : std::vector<std::size_t>{3, 4, 5}) s += w.normalized[i];
    ASSERT_NEAR(s, 3.0, 1e-12);
  }
  EXPECT_NEAR(stats::mean(all), 1.0, 0.02);
  EXPECT_NEAR(stats::sample_sd(all), 1.0, 0.03);
}

TEST(Bootstrap, IsolatedSingletonsMatchBayesianReference) {
  const auto p = one_unit_per_zip({1, 1, 1, 1, 0, 0, 0, 0, 0}, "");
  const auto b = build_blocks(p);
  BootstrapOptions opt;
  opt.replicates = 300;
  opt.seed = 21;
  const auto stat = [&](const std::vector<double>& w) { return mean_difference(p, w); };
  const auto ones = std::vector<double>(p.units.size(), 1.0);
  const auto res = run_bootstrap(p, b, opt, {"diff"}, mean_difference(p, ones), stat);

  std::vector<double> ref;
  for (int r = 0; r < opt.replicates; ++r) {
    auto eng = replicate_engine(opt.seed, static_cast<std::uint64_t>(r));
    std::exponential_distribution<double> expo(1.0);
    std::vector<double> w(p.units.size());
    for (auto& x : w) x = expo(eng);
    ref.push_back(mean_difference(p, w)[0]);
  }
  EXPECT_NEAR(res.sigma[0], stats::sample_sd(ref), 1e-12);
}

TEST(Bootstrap, ThreadCountDoesNotChangeReplicates) {
  const auto s = sim::generate(small_spec(), false);
  const auto b = build_blocks(s.panel);
  const auto stat = [&](const std::vector<double>& w) { return mean_difference(s.panel, w); };
  BootstrapOptions one;
  one.replicates = 40;
  auto three = one;
  three.threads = 3;
  const auto a = run_bootstrap(s.panel, b, one, {"d"}, {0.0}, stat);
  const auto c = run_bootstrap(s.panel, b, three, {"d"}, {0.0}, stat);
  EXPECT_EQ(a.replicates, c.replicates);
}

TEST(Bootstrap, UnitWeightHookGivesZeroSpread) {
  const auto s = sim::generate(small_spec(), false);
  BootstrapOptions opt;
  opt.replicates = 3;
  opt.unit_weights = true;
  EstimationConfig cfg;
  cfg.grid.points = 15;
  const auto r = bootstrap_analysis(s.panel, DriverKind::Competition, cfg, opt);
  const auto k = label_index(r.result, "att");
  EXPECT_NEAR(r.result.sigma[k], 0.0, 1e-12);
  EXPECT_NEAR(r.result.replicates[0][k], r.estimates.att, 1e-10);
  EXPECT_EQ(r.estimates.curve.se.size(), 15);
}

TEST(Bootstrap, DeterministicForFixedSeed) {
  const auto s = sim::generate(small_spec(), false);
  BootstrapOptions opt;
  opt.replicates = 2;
  opt.seed = 17;
  EstimationConfig cfg;
  cfg.grid.points = 10;
  const auto a = bootstrap_analysis(s.panel, DriverKind::Competition, cfg, opt);
  const auto b = bootstrap_analysis(s.panel, DriverKind::Competition, cfg, opt);
  EXPECT_EQ(a.result.replicates, b.result.replicates);
  EXPECT_GT(a.result.sigma[label_index(a.result, "adutt")], 0.0);
  EXPECT_THROW(label_index(a.result, "nope"), Error);
}

TEST(Bootstrap, TooManyFailuresAbort) {
  const auto p = ingest_panel(tiny_files());
  const auto b = build_blocks(p);
  BootstrapOptions opt;
  opt.replicates = 50;
  int calls = 0;
  std::mutex mu;
  const auto stat = [&](const std::vector<double>&) -> std::vector<double> {
    std::lock_guard<std::mutex> lock(mu);
    if (calls++ % 10 == 0) throw Error("estimators", ErrorKind::SingularDesign, "boom");
    return {1.0};
  };
  try {
    run_bootstrap(p, b, opt, {"x"}, {1.0}, stat);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::BootstrapAborted);
  }
  opt.replicates = 1;
  EXPECT_THROW(run_bootstrap(p, b, opt, {"x"}, {1.0}, stat), Error);
}

TEST(Bootstrap, PercentileAndNormalIntervals) {
  BootstrapResult r;
  r.point = {0.0};
  for (int k = 0; k <= 100; ++k) r.replicates.push_back({static_cast<double>(k)});
  summarise_replicates(r, IntervalKind::Percentile);
  EXPECT_NEAR(r.lower[0], 2.5, 1e-12);
  EXPECT_NEAR(r.upper[0], 97.5, 1e-12);
  summarise_replicates(r, IntervalKind::Normal);
  EXPECT_NEAR(r.upper[0] - r.lower[0], 2 * 1.96 * r.sigma[0], 1e-12);
}
