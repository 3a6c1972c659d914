#include "hal/loss.hpp"

#include <cmath>
#include <stdexcept>

namespace hal {

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace {

double clamp_q(double q, double bound) {
  if (q > bound) return bound;
  if (q < -bound) return -bound;
  return q;
}

double row_weight(const LossKind& loss, Eigen::Index i) {
  return loss.weights.size() == 0 ? 1.0 : loss.weights(i);
}

}  // namespace

double loss_norm(const LossKind& loss, std::span<const int> rows,
                 Eigen::Index n_rows) {
  if (!loss.frequency_weights) {
    return rows.empty() ? static_cast<double>(n_rows)
                        : static_cast<double>(rows.size());
  }
  double s = 0.0;
  if (rows.empty()) {
    for (Eigen::Index i = 0; i < n_rows; ++i) s += row_weight(loss, i);
  } else {
    for (int i : rows) s += row_weight(loss, i);
  }
  return s;
}

double risk(const Eigen::VectorXd& fit_values, const Dataset& data,
            const LossKind& loss, std::span<const int> rows) {
  if (fit_values.size() != data.n()) {
    throw std::invalid_argument("risk: fit length does not match data");
  }
  if (loss.weights.size() != 0 && loss.weights.size() != data.n()) {
    throw std::invalid_argument("risk: weight length does not match data");
  }
  const double norm = loss_norm(loss, rows, data.n());
  if (norm <= 0.0) {
    throw std::invalid_argument("risk: no weighted rows");
  }
  auto pointwise = [&](Eigen::Index i) {
    const double w = row_weight(loss, i);
    if (w == 0.0) return 0.0;
    const double q = fit_values(i);
    if (!std::isfinite(q)) {
      throw std::invalid_argument("risk: nonfinite fit value");
    }
    const double y = data.y(i);
    if (loss.family == LossFamily::squared_error) {
      const double d = y - q;
      return 0.5 * w * d * d;
    }
    const double qc = clamp_q(q, loss.predictor_clamp);
    // log(1 + e^qc) computed stably; loss = -y*qc + log(1+e^qc)
    const double log1pexp =
        qc > 0.0 ? qc + std::log1p(std::exp(-qc)) : std::log1p(std::exp(qc));
    return w * (log1pexp - y * qc);
  };
  double s = 0.0;
  if (rows.empty()) {
    for (Eigen::Index i = 0; i < data.n(); ++i) s += pointwise(i);
  } else {
    for (int i : rows) s += pointwise(i);
  }
  return s / norm;
}

Eigen::VectorXd pointwise_score(const Eigen::VectorXd& fit_values,
                                const Dataset& data, const LossKind& loss) {
  if (fit_values.size() != data.n()) {
    throw std::invalid_argument("pointwise_score: fit length does not match data");
  }
  Eigen::VectorXd r(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const double w = row_weight(loss, i);
    const double q = fit_values(i);
    if (!std::isfinite(q)) {
      throw std::invalid_argument("pointwise_score: nonfinite fit value");
    }
    if (loss.family == LossFamily::squared_error) {
      r(i) = -w * (data.y(i) - q);
    } else {
      const double mu = expit(clamp_q(q, loss.predictor_clamp));
      r(i) = -w * (data.y(i) - mu);
    }
  }
  return r;
}

}  // namespace hal
