#include <gtest/gtest.h>

#include "dosedid/estimators.hpp"
#include "dosedid/simlab.hpp"
#include "support.hpp"

using namespace dosedid;
using namespace testing_support;

namespace {

Eigen::VectorXd ones(Eigen::Index n) { return Eigen::VectorXd::Ones(n); }

AnalysisFrame sim_frame(const sim::DgpSpec& spec, int period = 1) {
  const auto s = sim::generate(spec, false);
  const auto d = assemble_dose(s.panel, DriverKind::Competition);
  return make_frame(slice_matched_period(s.panel, period), d.dose, d.adjustment);
}

struct FrameFit {
  double att, adutt;
  EffectCurve curve;
};

FrameFit fit_frame(const AnalysisFrame& f, const GridConfig& grid = {}) {
  CurvePlan plan = make_curve_plan(f.dose, grid, BandwidthPolicy::RuleOfThumb);
  EstimationConfig cfg;
  cfg.naive = false;
  const auto pe = analyse_frame(f, cfg, ones(f.n()), plan, 1.0, false);
  return {pe.att, pe.adutt, pe.curve};
}

}  // namespace

TEST(Estimators, FixtureMatchesExactOracle) {
  const auto f = load_fixture6();
  const auto w = ones(6);
  const auto eif = compute_eif(f.frame, f.values, w);
  const auto& ex = f.raw["expected"];
  EXPECT_DOUBLE_EQ(eif.p_treated, 0.5);
  for (Eigen::Index r = 0; r < 6; ++r) EXPECT_NEAR(eif.tau(r), ex["tau"][r].get<double>(), 1e-12);
  for (Eigen::Index i = 0; i < 3; ++i) {
    EXPECT_NEAR(eif.xi(i), ex["xi"][i].get<double>(), 1e-12);
    EXPECT_NEAR(eif.m_at_dose(i), ex["m"][i].get<double>(), 1e-12);
    EXPECT_NEAR(eif.p_at_dose(i), ex["pd"][i].get<double>(), 1e-12);
  }
  const double att = estimate_att(f.frame, eif, w), adutt = estimate_adutt(f.frame, eif, w);
  EXPECT_NEAR(att, ex["att"].get<double>(), 1e-12);
  EXPECT_NEAR(adutt, ex["adutt"].get<double>(), 1e-12);
  EXPECT_NEAR(estimate_reda(att, adutt), ex["reda"].get<double>(), 1e-12);

  const auto o = sim::brute_force_oracle(f.oracle);
  EXPECT_NEAR(att, o.att, 1e-12);
  EXPECT_NEAR(adutt, o.adutt, 1e-12);
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(eif.xi(i), o.xi[static_cast<std::size_t>(i)], 1e-12);
}

TEST(Estimators, RowPermutationInvariance) {
  const auto a = load_fixture6();
  const auto b = load_fixture6({5, 3, 0, 4, 1, 2});
  const auto ea = compute_eif(a.frame, a.values, ones(6));
  const auto eb = compute_eif(b.frame, b.values, ones(6));
  EXPECT_NEAR(estimate_att(a.frame, ea, ones(6)), estimate_att(b.frame, eb, ones(6)), 1e-13);
  EXPECT_NEAR(estimate_adutt(a.frame, ea, ones(6)), estimate_adutt(b.frame, eb, ones(6)), 1e-13);
  const auto o = sim::brute_force_oracle(b.oracle);
  EXPECT_NEAR(estimate_adutt(b.frame, eb, ones(6)), o.adutt, 1e-12);
}

TEST(Estimators, IntegerWeightsMatchDuplicatedRows) {
  auto f = load_fixture6();
  Eigen::VectorXd w = ones(6);
  w(0) = 2.0;  // control row 0 counted twice
  const auto e = compute_eif(f.frame, f.values, w);
  auto g = load_fixture6({0, 0, 1, 2, 3, 4, 5});
  const auto eg = compute_eif(g.frame, g.values, ones(7));
  EXPECT_NEAR(estimate_att(f.frame, e, w), estimate_att(g.frame, eg, ones(7)), 1e-12);
  EXPECT_NEAR(estimate_adutt(f.frame, e, w), estimate_adutt(g.frame, eg, ones(7)), 1e-12);
}

TEST(Estimators, RedaDefinitionAndIdentity) {
  EXPECT_NEAR(estimate_reda(-22.5, -25.0), -0.1111111111111111, 1e-12);
  const auto f = load_fixture6();
  const auto e = compute_eif(f.frame, f.values, ones(6));
  const double att = estimate_att(f.frame, e, ones(6)), adutt = estimate_adutt(f.frame, e, ones(6));
  EXPECT_NEAR(estimate_reda(att, adutt) * att, att - adutt, 1e-13);
}

TEST(Estimators, RedaUndefinedNearZeroAtt) {
  try {
    estimate_reda(1e-12, 0.5, 1e-8);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::AttNearZero);
  }
  EXPECT_FALSE(try_reda(0.0, 1.0, 1e-8).has_value());
  EXPECT_TRUE(try_reda(-1.0, 1.0, 1e-8).has_value());
}

TEST(Estimators, AttIdentityWithoutDoseNuisances) {
  // ATT depends only on the control trend and propensity.
  auto f = load_fixture6();
  const auto base = compute_eif(f.frame, f.values, ones(6));
  f.values.mu1_cross.setConstant(7.0);
  f.values.pid_cross.setConstant(0.9);
  const auto other = compute_eif(f.frame, f.values, ones(6));
  EXPECT_DOUBLE_EQ(estimate_att(f.frame, base, ones(6)), estimate_att(f.frame, other, ones(6)));
  // Direct form: mean over treated of (dY - mu0) minus reweighted control residuals.
  double s = 0;
  for (Eigen::Index r = 0; r < 6; ++r) {
    const double pa = f.values.pi_a(r), res = f.frame.dy(r) - f.values.mu0(r);
    s += f.frame.group[static_cast<std::size_t>(r)] == 1 ? res / 0.5 : -pa * res / (0.5 * (1 - pa));
  }
  EXPECT_NEAR(estimate_att(f.frame, base, ones(6)), s / 6.0, 1e-13);
}

TEST(Estimators, InfluenceFunctionMeansVanishAtEstimates) {
  const auto f = load_fixture6();
  const auto e = compute_eif(f.frame, f.values, ones(6));
  const double att = estimate_att(f.frame, e, ones(6)), adutt = estimate_adutt(f.frame, e, ones(6));
  const auto d = compute_eif_diagnostics(f.frame, f.values, e, att, adutt);
  EXPECT_NEAR(d.mean_att, 0.0, 1e-13);
  EXPECT_NEAR(d.mean_adutt, 0.0, 1e-13);
  EXPECT_NEAR(d.j.sum(), 0.0, 1e-13);
  EXPECT_GT(d.se_att, 0.0);
}

TEST(Estimators, CorrectionVanishesWhenTreatedTrendIgnoresCovariates) {
  auto f = load_fixture6();
  for (Eigen::Index i = 0; i < 3; ++i) f.values.mu1_cross.row(i).setConstant(-1.0 - i);
  const auto e = compute_eif(f.frame, f.values, ones(6));
  const auto d = compute_eif_diagnostics(f.frame, f.values, e, 0.0, 0.0);
  EXPECT_NEAR(d.j.cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(Estimators, TreatedShareOutsideUnitIntervalRejected) {
  auto f = load_fixture6();
  for (auto& g : f.frame.group) g = 0;
  EXPECT_THROW(compute_eif(f.frame, f.values, ones(6)), Error);
}

TEST(Estimators, ZeroResidualsGiveXiEqualToM) {
  auto spec = small_spec();
  spec.noise_sd = 0.0;
  const auto f = sim_frame(spec);
  const auto models = fit_nuisances(f, LearnerSet{}, ones(f.n()));
  const auto v = evaluate_nuisances(models, f);
  const auto e = compute_eif(f, v, ones(f.n()));
  for (Eigen::Index i = 0; i < f.n1(); ++i) EXPECT_NEAR(e.xi(i), e.m_at_dose(i), 1e-8);
}

TEST(Estimators, DoseLocationEquivariance) {
  const auto f = sim_frame(small_spec());
  auto g = f;
  g.dose.array() += 5.0;
  const auto a = fit_frame(f);
  const auto b = fit_frame(g);
  EXPECT_NEAR(a.att, b.att, 1e-9);
  EXPECT_NEAR(a.adutt, b.adutt, 1e-9);
  EXPECT_NEAR((b.curve.points.array() - 5.0 - a.curve.points.array()).abs().maxCoeff(), 0.0, 1e-12);
  EXPECT_NEAR((a.curve.values - b.curve.values).cwiseAbs().maxCoeff(), 0.0, 1e-8);
}

TEST(Estimators, CovariateScaleInvariance) {
  const auto f = sim_frame(small_spec());
  auto g = f;
  g.x.col(0) *= 10.0;
  g.dose_features.col(0) *= 10.0;
  const auto a = fit_frame(f);
  const auto b = fit_frame(g);
  EXPECT_NEAR(a.att, b.att, 1e-6);
  EXPECT_NEAR(a.adutt, b.adutt, 1e-6);
  EXPECT_NEAR((a.curve.values - b.curve.values).cwiseAbs().maxCoeff(), 0.0, 1e-6);
}

TEST(Estimators, NaiveCurveFlatForConstantOutcomeChange) {
  auto f = sim_frame(small_spec());
  for (Eigen::Index r = 0; r < f.n(); ++r) f.dy(r) = f.group[static_cast<std::size_t>(r)] == 1 ? 3.0 : 1.0;
  CurvePlan plan = make_curve_plan(f.dose, {}, BandwidthPolicy::RuleOfThumb);
  const auto c = naive_curve(f, ones(f.n()), plan);
  EXPECT_NEAR((c.values.array() - 2.0).abs().maxCoeff(), 0.0, 1e-10);
}

TEST(Estimators, GridPlanQuantilesAndSupport) {
  Eigen::MatrixXd dose(101, 1);
  for (int i = 0; i <= 100; ++i) dose(i, 0) = i;
  const auto plan = make_curve_plan(dose, {}, BandwidthPolicy::RuleOfThumb);
  ASSERT_EQ(plan.points.rows(), 100);
  EXPECT_NEAR(plan.points(0, 0), 5.0, 1e-12);
  EXPECT_NEAR(plan.points(99, 0), 95.0, 1e-12);
  GridConfig bad;
  bad.explicit_points = Eigen::MatrixXd::Constant(1, 1, 150.0);
  try {
    make_curve_plan(dose, bad, BandwidthPolicy::RuleOfThumb);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::GridOutsideSupport);
  }
}

TEST(Estimators, TwoDimensionalPlanHasSlicesAndSurface) {
  const auto s = sim::generate(small_spec(), false);
  EstimationConfig cfg;
  cfg.grid.points = 20;
  const auto est = run_period_analysis(s.panel, DriverKind::JointPriceCompetition, cfg);
  EXPECT_EQ(est.curve.points.rows(), 40);
  EXPECT_EQ(est.curve.surface.size(), 400);
  EXPECT_TRUE(est.curve.values.allFinite());
}

TEST(Pipeline, SinglePeriodHeadlineEqualsPeriod) {
  auto spec = small_spec();
  spec.periods = 1;
  const auto s = sim::generate(spec, false);
  const auto est = run_period_analysis(s.panel, DriverKind::Competition);
  ASSERT_EQ(est.periods.size(), 1u);
  EXPECT_EQ(est.window_first, 1);
  EXPECT_DOUBLE_EQ(est.att, est.periods[0].att);
  EXPECT_DOUBLE_EQ(est.adutt, est.periods[0].adutt);
  EXPECT_EQ(est.curve.values, est.periods[0].curve.values);
}

TEST(Pipeline, HeadlineAveragesWindow) {
  const auto s = sim::generate(small_spec(), false);
  const auto est = run_period_analysis(s.panel, DriverKind::Competition);
  ASSERT_EQ(est.periods.size(), 5u);
  EXPECT_EQ(est.window_first, 4);
  EXPECT_NEAR(est.att, 0.5 * (est.periods[3].att + est.periods[4].att), 1e-12);
  ASSERT_TRUE(est.reda.has_value());
  EXPECT_NEAR(*est.reda * est.att, est.att - est.adutt, 1e-10);
  EstimationConfig bad;
  bad.window_first = 3;
  bad.window_last = 9;
  EXPECT_THROW(run_period_analysis(s.panel, DriverKind::Competition, bad), Error);
}

TEST(Pipeline, PlaceboAgainstBasePeriodIsZero) {
  const auto s = sim::generate(small_spec(), false);
  EstimationConfig cfg;
  cfg.placebo_periods = {4};
  CurvePlan plan;
  const auto r = placebo_curve(s.panel, prepare_driver(s.panel, DriverKind::Competition), cfg, {}, plan);
  ASSERT_EQ(r.curves.size(), 1u);
  EXPECT_NEAR(r.average.values.cwiseAbs().maxCoeff(), 0.0, 1e-12);
  EXPECT_EQ(placebo_periods(EstimationConfig{}, 13), (std::vector<int>{5, 6, 7, 8, 9, 10, 11, 12, 13}));
}
