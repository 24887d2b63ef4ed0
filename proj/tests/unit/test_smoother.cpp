#include <gtest/gtest.h>

#include <random>

#include "dosedid/smoother.hpp"

using namespace dosedid;

TEST(Smoother, AffineReproduction1D) {
  std::mt19937_64 eng(1);
  std::uniform_real_distribution<double> u(0, 5);
  const int n = 80;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n), w(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = u(eng);
    y(i) = -10.0 - 4.0 * x(i, 0);
    w(i) = 0.5 + u(eng);
  }
  const auto h = rule_of_thumb_bandwidth(x, w);
  Eigen::MatrixXd grid(50, 1);
  for (int g = 0; g < 50; ++g) grid(g, 0) = 0.25 + 4.5 * g / 49.0;
  const auto fit = local_linear(x, y, w, grid, h);
  for (int g = 0; g < 50; ++g) EXPECT_NEAR(fit(g), -10.0 - 4.0 * grid(g, 0), 1e-10);
}

TEST(Smoother, AffineReproduction2D) {
  std::mt19937_64 eng(2);
  std::normal_distribution<double> z;
  const int n = 120;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = z(eng);
    x(i, 1) = 0.5 * x(i, 0) + z(eng);
    y(i) = 3.0 + 1.5 * x(i, 0) - 2.0 * x(i, 1);
  }
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  const auto h = rule_of_thumb_bandwidth(x, w);
  ASSERT_EQ(h.size(), 2u);
  for (double a : {-1.0, 0.0, 1.2})
    for (double b : {-0.7, 0.3, 1.0}) {
      Eigen::RowVector2d at(a, b);
      EXPECT_NEAR(local_linear_at(x, y, w, at, h), 3.0 + 1.5 * a - 2.0 * b, 1e-10);
    }
}

TEST(Smoother, RuleOfThumbFormula) {
  Eigen::MatrixXd x(4, 1);
  x << 0, 1, 2, 3;
  const auto h = rule_of_thumb_bandwidth(x, Eigen::VectorXd::Ones(4));
  EXPECT_NEAR(h[0], 1.06 * std::sqrt(1.25) * std::pow(4.0, -0.2), 1e-14);
}

TEST(Smoother, DegenerateBandwidth) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(5, 1, 2.0);
  try {
    rule_of_thumb_bandwidth(x, Eigen::VectorXd::Ones(5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::BandwidthDegenerate);
  }
}

TEST(Smoother, ZeroWeightRowsIgnored) {
  Eigen::MatrixXd x(6, 1);
  x << 0, 1, 2, 3, 4, 5;
  Eigen::VectorXd y(6), w(6);
  y << 0, 1, 2, 100, 4, 5;
  w << 1, 1, 1, 0, 1, 1;
  EXPECT_NEAR(local_linear_at(x, y, w, Eigen::RowVectorXd::Constant(1, 2.5), {1.0}), 2.5, 1e-10);
}

TEST(Smoother, LeaveOneOutPrefersWideBandwidthForLinearData) {
  std::mt19937_64 eng(4);
  std::normal_distribution<double> z;
  const int n = 60;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = z(eng);
    y(i) = 2.0 * x(i, 0) + 0.5 * z(eng);
  }
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  const auto base = rule_of_thumb_bandwidth(x, w);
  const auto h = loo_bandwidth(x, y, w);
  EXPECT_GE(h[0], base[0]);
}
