#pragma once

// Test-side oracles, independent of the library's implementation paths:
// quadrature, dense normal-equation solves, grid search, and a projected
// gradient method for the L1-constrained problems.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

// Composite Simpson on [a, b]; the integrands here are piecewise-smooth, so
// a fixed fine grid is plenty for 1e-10 work when split at kinks.
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      int intervals = 4096) {
  if (b <= a) return 0.0;
  const int n = intervals % 2 == 0 ? intervals : intervals + 1;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) {
    s += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  }
  return s * h / 3.0;
}

// Unpenalized weighted least squares via normal equations.
inline Eigen::VectorXd normal_equations(const Eigen::MatrixXd& x,
                                        const Eigen::VectorXd& y,
                                        const Eigen::VectorXd& w) {
  const Eigen::MatrixXd xtwx = x.transpose() * w.asDiagonal() * x;
  const Eigen::VectorXd xtwy = x.transpose() * w.asDiagonal() * y;
  return xtwx.ldlt().solve(xtwy);
}

// Euclidean projection onto the L1 ball of radius c (Duchi et al. 2008).
inline Eigen::VectorXd project_l1(const Eigen::VectorXd& v, double c) {
  if (v.cwiseAbs().sum() <= c) return v;
  std::vector<double> u(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    u[static_cast<std::size_t>(i)] = std::abs(v(i));
  }
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cssv = 0.0;
  double theta = 0.0;
  int rho = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cssv += u[i];
    const double t = (cssv - c) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) {
      rho = static_cast<int>(i + 1);
      theta = t;
    }
  }
  (void)rho;
  Eigen::VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double mag = std::max(0.0, std::abs(v(i)) - theta);
    out(i) = v(i) >= 0.0 ? mag : -mag;
  }
  return out;
}

struct ConstrainedLsOracle {
  Eigen::VectorXd beta;
  double objective = 0.0;
};

// Projected gradient for min (1/2n)||y - X b||^2 subject to
// ||b without intercept||_1 <= c; the intercept column stays unconstrained.
inline ConstrainedLsOracle projected_gradient_constrained(
    const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double c,
    int intercept_index, int iters = 200000) {
  const auto n = static_cast<double>(x.rows());
  const Eigen::MatrixXd gram = x.transpose() * x / n;
  // Lipschitz constant of the gradient; loose upper bound via row sums.
  double lip = gram.cwiseAbs().rowwise().sum().maxCoeff();
  if (lip <= 0.0) lip = 1.0;
  const double step = 1.0 / lip;
  const Eigen::VectorXd xty = x.transpose() * y / n;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
  for (int it = 0; it < iters; ++it) {
    const Eigen::VectorXd grad = gram * beta - xty;
    Eigen::VectorXd next = beta - step * grad;
    double icpt = 0.0;
    if (intercept_index >= 0) {
      icpt = next(intercept_index);
      next(intercept_index) = 0.0;
    }
    next = project_l1(next, c);
    if (intercept_index >= 0) next(intercept_index) = icpt;
    const double change = (next - beta).cwiseAbs().maxCoeff();
    beta = next;
    if (change < 1e-14) break;
  }
  ConstrainedLsOracle out;
  out.beta = beta;
  const Eigen::VectorXd r = y - x * beta;
  out.objective = 0.5 * r.squaredNorm() / n;
  return out;
}

// Dense grid search for tiny penalized least-squares instances.
inline Eigen::Vector2d grid_search_2d(
    const std::function<double(double, double)>& objective, double lo,
    double hi, int levels = 6, int points = 41) {
  double b0 = 0.0, b1 = 0.0, span = hi - lo;
  double c0 = (lo + hi) / 2.0, c1 = (lo + hi) / 2.0;
  for (int lvl = 0; lvl < levels; ++lvl) {
    double best = std::numeric_limits<double>::infinity();
    double best0 = c0, best1 = c1;
    for (int i = 0; i < points; ++i) {
      for (int j = 0; j < points; ++j) {
        const double x0 = c0 - span / 2 + span * i / (points - 1);
        const double x1 = c1 - span / 2 + span * j / (points - 1);
        const double v = objective(x0, x1);
        if (v < best) {
          best = v;
          best0 = x0;
          best1 = x1;
        }
      }
    }
    c0 = best0;
    c1 = best1;
    b0 = best0;
    b1 = best1;
    span = 2.0 * span / (points - 1);
  }
  return {b0, b1};
}

}  // namespace oracle
