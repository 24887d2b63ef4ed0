#pragma once

// Weighted local linear regression with a (product) Gaussian kernel.

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "dosedid/errors.hpp"
#include "dosedid/stats.hpp"

namespace dosedid {

enum class BandwidthPolicy { RuleOfThumb, LeaveOneOut };

// h_k = 1.06 * sd_k * n^(-1/5) per dimension.
inline std::vector<double> rule_of_thumb_bandwidth(const Eigen::MatrixXd& x, const Eigen::VectorXd& w) {
  std::vector<double> h;
  const double n = static_cast<double>((w.array() > 0).count());
  for (Eigen::Index k = 0; k < x.cols(); ++k) {
    const double sd = std::sqrt(stats::weighted_variance(x.col(k), w));
    if (!(sd > 0))
      throw Error("estimators", ErrorKind::BandwidthDegenerate, "dose dimension " + std::to_string(k + 1) + " has zero spread");
    h.push_back(1.06 * sd * std::pow(n, -0.2));
  }
  return h;
}

// Fitted value at `at`. Falls back to the local constant when the local design
// is singular (all kernel mass on one dose value); NaN when no mass at all.
inline double local_linear_at(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                              const Eigen::Ref<const Eigen::RowVectorXd>& at, const std::vector<double>& h,
                              Eigen::Index skip = -1) {
  const Eigen::Index k = x.cols();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(k + 1, k + 1);
  Eigen::VectorXd t = Eigen::VectorXd::Zero(k + 1);
  Eigen::VectorXd z(k + 1);
  z(0) = 1.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (i == skip || w(i) == 0.0) continue;
    double e = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      const double u = (x(i, j) - at(j)) / h[static_cast<std::size_t>(j)];
      e += u * u;
      z(j + 1) = x(i, j) - at(j);
    }
    const double kw = w(i) * std::exp(-0.5 * e);
    s.noalias() += kw * z * z.transpose();
    t.noalias() += kw * y(i) * z;
  }
  if (!(s(0, 0) > 0)) return std::numeric_limits<double>::quiet_NaN();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(s);
  lu.setThreshold(1e-12);
  if (lu.isInvertible()) return lu.solve(t)(0);
  return t(0) / s(0, 0);
}

inline Eigen::VectorXd local_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                                    const Eigen::MatrixXd& points, const std::vector<double>& h) {
  Eigen::VectorXd out(points.rows());
  for (Eigen::Index g = 0; g < points.rows(); ++g) out(g) = local_linear_at(x, y, w, points.row(g), h);
  return out;
}

// Leave-one-out cross-validation over multiples of the rule-of-thumb bandwidth.
inline std::vector<double> loo_bandwidth(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  const auto base = rule_of_thumb_bandwidth(x, w);
  static constexpr double multipliers[] = {0.35, 0.5, 0.7, 1.0, 1.4, 2.0, 2.8, 4.0};
  double best_score = std::numeric_limits<double>::infinity();
  std::vector<double> best = base;
  for (double mult : multipliers) {
    std::vector<double> h = base;
    for (auto& v : h) v *= mult;
    double score = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (w(i) == 0.0) continue;
      const double fit = local_linear_at(x, y, w, x.row(i), h, i);
      if (!std::isfinite(fit)) {
        score = std::numeric_limits<double>::infinity();
        break;
      }
      score += w(i) * (y(i) - fit) * (y(i) - fit);
    }
    if (score < best_score) {
      best_score = score;
      best = h;
    }
  }
  return best;
}

}  // namespace dosedid
