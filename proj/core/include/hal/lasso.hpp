#pragma once

#include <Eigen/Core>
#include <memory>
#include <span>
#include <vector>

#include "hal/basis.hpp"
#include "hal/loss.hpp"

namespace hal {

struct SolveOptions {
  double tol = 1e-7;        // max coefficient change per sweep
  int max_sweeps = 100000;  // coordinate sweeps before giving up
  bool penalize_intercept = false;
  int intercept_index = 0;  // design column of the intercept, -1 if none
  double kkt_tol = 1e-5;
};

// A fitted L1-constrained empirical risk minimizer over a basis expansion.
struct HalFit {
  Eigen::VectorXd beta;
  LossKind loss;
  double lambda = 0.0;
  double C = 0.0;  // realized L1 norm over penalized coefficients
  bool intercept_penalized = false;
  int intercept_index = -1;
  std::vector<int> active_set;  // ids with beta != 0
  bool constraint_slack = false;
  int sweeps = 0;
  double max_objective_increase = 0.0;
  double objective = 0.0;
};

struct PathResult {
  std::vector<HalFit> fits;  // lambda strictly decreasing
  bool c_monotonicity_violated = false;
  double worst_c_violation = 0.0;
};

// Largest penalty with an all-null penalized fit: max absolute basis score
// at the intercept-only model.
double lambda_max(const Eigen::MatrixXd& design, const Dataset& data,
                  const LossKind& loss, const SolveOptions& opts = {},
                  std::span<const int> rows = {});

// size log-spaced values from lambda_max down to min_ratio * lambda_max.
std::vector<double> default_lambda_grid(double lambda_max_value, int size = 100,
                                        double min_ratio = 1e-4);

// Cyclic coordinate descent on risk + lambda * ||beta||_1 (IRLS-wrapped for
// binomial_loglik), converged when the largest coefficient change in a full
// sweep falls below opts.tol. rows, when nonempty, restricts the fit to a
// row subset (cross-validation training folds). Throws std::runtime_error
// on non-convergence.
HalFit fit_penalized(const Eigen::MatrixXd& design, const Dataset& data,
                     const LossKind& loss, double lambda,
                     const HalFit* warm_start = nullptr,
                     const SolveOptions& opts = {},
                     std::span<const int> rows = {});

// Bound-C form: bisects the penalty until the realized L1 norm matches C to
// max(1e-6, 1e-4*C), or returns the practically-unconstrained fit with
// constraint_slack set when its norm already sits below C.
HalFit fit_constrained(const Eigen::MatrixXd& design, const Dataset& data,
                       const LossKind& loss, double C,
                       const SolveOptions& opts = {},
                       std::span<const int> rows = {});

// Warm-started fits along a strictly decreasing penalty grid.
PathResult lasso_path(const Eigen::MatrixXd& design, const Dataset& data,
                      const LossKind& loss, std::span<const double> lambda_grid,
                      const SolveOptions& opts = {},
                      std::span<const int> rows = {});

struct GramCache;

// Streams warm-started fits at successively smaller penalties without
// storing the whole path: compacts a row subset once, shares the Gram cache
// across the path, and freezes saturated Bernoulli logistic fits (deviance
// ratio > 0.999) instead of chasing a diverging maximum likelihood. The
// referenced design/data must outlive the stream.
class PathStream {
 public:
  PathStream(const Eigen::MatrixXd& design, const Dataset& data,
             const LossKind& loss, const SolveOptions& opts = {},
             std::span<const int> rows = {});
  ~PathStream();

  HalFit fit(double lambda);

 private:
  SolveOptions opts_;
  const Eigen::MatrixXd* design_ = nullptr;
  const Dataset* data_ = nullptr;
  LossKind loss_;
  Eigen::MatrixXd owned_design_;
  Dataset owned_data_;
  std::unique_ptr<GramCache> cache_;
  HalFit warm_;
  bool have_warm_ = false;
  bool saturation_guard_ = false;
  double null_risk_ = 0.0;
  bool frozen_ = false;
  HalFit frozen_fit_;
};

// Linear predictor design * beta, accumulated over nonzero coefficients.
Eigen::VectorXd fitted_values(const Eigen::MatrixXd& design, const HalFit& fit);

// Empirical basis scores: entry j = (1/norm) sum_i r_i * design(i, j) with r
// the pointwise score of the fit on the full data.
Eigen::VectorXd basis_scores(const HalFit& fit, const Eigen::MatrixXd& design,
                             const Dataset& data);

enum class KktState {
  unpenalized,
  active_ok,
  active_violation,
  inactive_ok,
  inactive_violation,
};

struct KktReport {
  double max_violation = 0.0;
  std::vector<KktState> status;
};

// Stationarity check: active coefficients need score_j = -lambda * sign(beta_j),
// inactive ones |score_j| <= lambda; unpenalized coordinates need score_j = 0.
KktReport kkt_check(const HalFit& fit, const Eigen::MatrixXd& design,
                    const Dataset& data, double tol);

}  // namespace hal
