#pragma once

// Weighted least squares and weighted logistic regression, the two solvers
// behind the baseline learners.

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dosedid/errors.hpp"
#include "dosedid/stats.hpp"

namespace dosedid {

struct LinearFit {
  Eigen::VectorXd coef;
  double weighted_rss = 0.0;
  double weight_sum = 0.0;
};

// Minimises sum_i w_i (y_i - x_i' b)^2. Columns are rescaled to unit norm
// before a rank-revealing QR so the collinearity check is scale free;
// SingularDesign names the columns that fall outside the numerical rank.
inline LinearFit weighted_least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                        const Eigen::VectorXd& w, const std::vector<std::string>& names,
                                        const std::string& module = "nuisance") {
  const Eigen::Index p = x.cols();
  const Eigen::VectorXd sw = w.array().max(0.0).sqrt();
  Eigen::MatrixXd xs = sw.asDiagonal() * x;
  Eigen::VectorXd scale(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    const double nrm = xs.col(k).norm();
    scale(k) = nrm > 0 ? nrm : 1.0;
    xs.col(k) /= scale(k);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xs);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    std::string cols;
    for (Eigen::Index k = qr.rank(); k < p; ++k) {
      const auto c = static_cast<std::size_t>(qr.colsPermutation().indices()(k));
      cols += (cols.empty() ? "" : ", ") + (c < names.size() ? names[c] : "col" + std::to_string(c));
    }
    throw Error(module, ErrorKind::SingularDesign, "collinear design; offending columns: " + cols);
  }
  LinearFit fit;
  fit.coef = qr.solve(sw.cwiseProduct(y)).cwiseQuotient(scale);
  const Eigen::VectorXd r = y - x * fit.coef;
  fit.weighted_rss = (r.array().square() * w.array()).sum();
  fit.weight_sum = w.sum();
  return fit;
}

struct LogisticFit {
  Eigen::VectorXd coef;
  bool separated = false;  // ridge fallback was used
  int iterations = 0;
};

namespace detail {

inline bool logistic_newton(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                            double ridge, Eigen::VectorXd& beta, int& iterations) {
  const Eigen::Index p = x.cols();
  beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(p, ridge);
  penalty(0) = 0.0;  // intercept is not penalised
  for (iterations = 1; iterations <= 100; ++iterations) {
    const Eigen::VectorXd eta = x * beta;
    if (ridge == 0.0 && eta.cwiseAbs().maxCoeff() > 30.0) return false;
    Eigen::VectorXd prob(eta.size()), curv(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      prob(i) = stats::logistic(eta(i));
      curv(i) = w(i) * prob(i) * (1.0 - prob(i));
    }
    const Eigen::VectorXd grad = x.transpose() * (w.cwiseProduct(y - prob)) - penalty.cwiseProduct(beta);
    Eigen::MatrixXd hess = x.transpose() * curv.asDiagonal() * x;
    hess.diagonal() += penalty;
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    if (!step.allFinite()) return false;
    beta += step;
    if (step.cwiseAbs().maxCoeff() < 1e-10 * (1.0 + beta.cwiseAbs().maxCoeff())) return true;
  }
  return false;
}

}  // namespace detail

// Weighted maximum likelihood via Newton-Raphson. The first column of x must
// be the intercept. On (quasi-)separation the fit is redone with a ridge
// penalty of ridge_factor * sum(w) on the slopes.
inline LogisticFit weighted_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                                     double ridge_factor = 1e-4) {
  LogisticFit fit;
  if (detail::logistic_newton(x, y, w, 0.0, fit.coef, fit.iterations)) return fit;
  fit.separated = true;
  if (!detail::logistic_newton(x, y, w, ridge_factor * w.sum(), fit.coef, fit.iterations))
    throw Error("nuisance", ErrorKind::SingularDesign, "penalised logistic regression did not converge");
  return fit;
}

}  // namespace dosedid
