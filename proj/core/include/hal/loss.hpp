#pragma once

#include <Eigen/Core>
#include <span>

#include "hal/dataset.hpp"

namespace hal {

enum class LossFamily { squared_error, binomial_loglik };

// Loss specification. The fit lives on the linear-predictor scale: identity
// for squared_error, logit for binomial_loglik. An optional weight column
// restricts or reweights rows (e.g. the treatment indicator for an outcome
// regression on the treated). frequency_weights marks weights as row
// multiplicities (aggregated data): the empirical mean then normalizes by
// sum(w) instead of the row count.
struct LossKind {
  LossFamily family = LossFamily::squared_error;
  Eigen::VectorXd weights;  // empty means all ones
  bool frequency_weights = false;
  double predictor_clamp = 30.0;
};

double expit(double x);

// Normalizing count for empirical means under this loss.
double loss_norm(const LossKind& loss, std::span<const int> rows,
                 Eigen::Index n_rows);

// Empirical risk: (1/norm) * sum_i w_i * l(y_i, q_i) over the given rows
// (all rows when empty). Pointwise losses: 0.5*(y-q)^2 for squared_error,
// -[y log expit(q) + (1-y) log(1-expit(q))] for binomial_loglik.
// Throws std::invalid_argument on nonfinite fit values.
double risk(const Eigen::VectorXd& fit_values, const Dataset& data,
            const LossKind& loss, std::span<const int> rows = {});

// Residual factor r_i with d/dQ risk in direction phi = (1/norm) sum r_i
// phi(x_i): r_i = -w_i (y_i - q_i) for squared_error and
// -w_i (y_i - expit(q_i)) for binomial_loglik.
Eigen::VectorXd pointwise_score(const Eigen::VectorXd& fit_values,
                                const Dataset& data, const LossKind& loss);

}  // namespace hal
