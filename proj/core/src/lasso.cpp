#include "hal/lasso.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace hal {

namespace {

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

double clamp_pred(double q, double bound) {
  return q > bound ? bound : (q < -bound ? -bound : q);
}

// All solver internals run on compacted inputs (no row subsets): a
// cross-validation training fold is gathered into its own design copy once.
struct Quad {
  const Eigen::MatrixXd* x;
  const Eigen::VectorXd* z;   // response (working response for binomial)
  const Eigen::VectorXd* ww;  // weights (working weights for binomial)
  double norm;
  double lambda;
  int intercept_index;
  bool penalize_intercept;

  bool penalized(int j) const {
    return penalize_intercept || j != intercept_index;
  }
};

double quad_objective(const Quad& q, const Eigen::VectorXd& beta,
                      const Eigen::VectorXd& resid) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < resid.size(); ++i) {
    s += (*q.ww)(i) * resid(i) * resid(i);
  }
  double l1 = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    if (q.penalized(static_cast<int>(j))) l1 += std::abs(beta(j));
  }
  return 0.5 * s / q.norm + q.lambda * l1;
}

double quad_sweep(const Quad& q, std::span<const int> coords,
                  const Eigen::VectorXd& col_sq, Eigen::VectorXd& beta,
                  Eigen::VectorXd& resid) {
  double max_change = 0.0;
  for (int j : coords) {
    const double csq = col_sq(j);
    if (csq <= 0.0) continue;
    const double grad =
        q.x->col(j).cwiseProduct(*q.ww).dot(resid) / q.norm;
    const double rho = grad + csq * beta(j);
    const double bnew =
        q.penalized(j) ? soft_threshold(rho, q.lambda) / csq : rho / csq;
    const double delta = bnew - beta(j);
    if (delta != 0.0) {
      beta(j) = bnew;
      resid -= delta * q.x->col(j);
      max_change = std::max(max_change, std::abs(delta));
    }
  }
  return max_change;
}

}  // namespace

// Lazily filled Gram block over the columns that ever turn active; valid for
// one (weights, rows) pairing, which for squared error spans a whole
// warm-started path.
struct GramCache {
  Eigen::MatrixXd gram;
  std::vector<char> have;
  std::vector<int> members;
  bool enabled = false;

  void init(Eigen::Index p) {
    enabled = p <= 4096;
    if (!enabled) return;
    gram.resize(p, p);
    have.assign(static_cast<std::size_t>(p), 0);
    members.clear();
  }

  void ensure(const Eigen::MatrixXd& x, const Eigen::VectorXd& ww, double norm,
              int j) {
    if (have[static_cast<std::size_t>(j)]) return;
    const Eigen::VectorXd wx = x.col(j).cwiseProduct(ww);
    for (int k : members) {
      const double g = wx.dot(x.col(k)) / norm;
      gram(j, k) = g;
      gram(k, j) = g;
    }
    gram(j, j) = wx.dot(x.col(j)) / norm;
    members.push_back(j);
    have[static_cast<std::size_t>(j)] = 1;
  }
};

namespace {

struct SolveStats {
  int sweeps = 0;
  double max_objective_increase = 0.0;
  double last_change = 0.0;
};

// Plain cyclic coordinate descent; used for the screening sweep and as the
// fallback when the exact step cannot run. In best-effort mode an exhausted
// sweep budget returns the current iterate instead of throwing (binomial
// inner solves, where the outer objective safeguard takes over).
void cd_solve(const Quad& q, const Eigen::VectorXd& col_sq,
              Eigen::VectorXd& beta, Eigen::VectorXd& resid,
              const SolveOptions& opts, int sweep_budget, bool best_effort,
              SolveStats& stats) {
  const Eigen::Index p = beta.size();
  std::vector<int> all(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) all[static_cast<std::size_t>(j)] = static_cast<int>(j);

  double prev_obj = quad_objective(q, beta, resid);
  auto track = [&]() {
    const double obj = quad_objective(q, beta, resid);
    if (obj > prev_obj) {
      stats.max_objective_increase =
          std::max(stats.max_objective_increase, obj - prev_obj);
    }
    prev_obj = obj;
  };
  auto fail = [&](double change) {
    if (best_effort) return true;
    std::ostringstream msg;
    msg << "lasso did not converge: " << stats.sweeps
        << " sweeps, last max coefficient change " << change;
    throw std::runtime_error(msg.str());
  };

  double change = quad_sweep(q, all, col_sq, beta, resid);
  ++stats.sweeps;
  track();
  stats.last_change = change;
  if (change < opts.tol) return;

  std::vector<int> active;
  for (;;) {
    active.clear();
    for (Eigen::Index j = 0; j < p; ++j) {
      if (beta(j) != 0.0 || !q.penalized(static_cast<int>(j))) {
        active.push_back(static_cast<int>(j));
      }
    }
    for (;;) {
      change = quad_sweep(q, active, col_sq, beta, resid);
      ++stats.sweeps;
      track();
      stats.last_change = change;
      if (stats.sweeps >= sweep_budget && fail(change)) return;
      if (change < opts.tol) break;
    }
    change = quad_sweep(q, all, col_sq, beta, resid);
    ++stats.sweeps;
    track();
    stats.last_change = change;
    if (change < opts.tol) return;
    if (stats.sweeps >= sweep_budget && fail(change)) return;
  }
}

// One screening sweep, then alternate: a coordinate sweep over the working
// set to establish signs, an exact stationarity solve for those signs with
// back-off to the first sign flip, and a full KKT pass admitting violators.
// Returns false when a solve goes numerically bad (caller falls back to
// plain coordinate descent).
bool exact_solve(const Quad& q, const Eigen::VectorXd& col_sq, GramCache& cache,
                 Eigen::VectorXd& beta, Eigen::VectorXd& resid,
                 SolveStats& stats) {
  if (!cache.enabled) return false;
  const Eigen::Index p = beta.size();
  std::vector<int> all(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) all[static_cast<std::size_t>(j)] = static_cast<int>(j);

  double prev_obj = quad_objective(q, beta, resid);
  auto track = [&]() {
    const double obj = quad_objective(q, beta, resid);
    if (obj > prev_obj + 1e-12 * (1.0 + std::abs(prev_obj))) {
      stats.max_objective_increase =
          std::max(stats.max_objective_increase, obj - prev_obj);
    }
    prev_obj = obj;
  };

  stats.last_change = quad_sweep(q, all, col_sq, beta, resid);
  ++stats.sweeps;
  track();

  std::vector<char> active(static_cast<std::size_t>(p), 0);
  for (Eigen::Index j = 0; j < p; ++j) {
    if (beta(j) != 0.0 || (!q.penalized(static_cast<int>(j)) && col_sq(j) > 0.0)) {
      active[static_cast<std::size_t>(j)] = 1;
    }
  }

  const double kkt_eps = 1e-11 + 1e-9 * q.lambda;
  std::vector<int> working, idx;
  for (int iter = 0; iter < 400; ++iter) {
    // Sign-establishing sweep over the working set (moves fresh violators
    // off zero in their descent direction).
    working.clear();
    for (Eigen::Index j = 0; j < p; ++j) {
      if (active[static_cast<std::size_t>(j)]) working.push_back(static_cast<int>(j));
    }
    quad_sweep(q, working, col_sq, beta, resid);
    ++stats.sweeps;
    track();

    idx.clear();
    for (int j : working) {
      if (col_sq(j) <= 0.0) continue;
      if (beta(j) == 0.0 && q.penalized(j)) {
        active[static_cast<std::size_t>(j)] = 0;  // left the set during the sweep
        continue;
      }
      idx.push_back(j);
    }

    const auto a = static_cast<Eigen::Index>(idx.size());
    bool moved = false;
    if (a > 0) {
      for (int j : idx) cache.ensure(*q.x, *q.ww, q.norm, j);
      Eigen::MatrixXd gaa(a, a);
      Eigen::VectorXd rhs(a);
      for (Eigen::Index r = 0; r < a; ++r) {
        for (Eigen::Index c = 0; c < a; ++c) {
          gaa(r, c) = cache.gram(idx[static_cast<std::size_t>(r)],
                                 idx[static_cast<std::size_t>(c)]);
        }
      }
      for (Eigen::Index r = 0; r < a; ++r) {
        const int j = idx[static_cast<std::size_t>(r)];
        // b_j assembled from the residual: b = x_j'(w.*z)/norm = s_j + (G b)_j
        const double wres =
            q.x->col(j).cwiseProduct(*q.ww).dot(resid) / q.norm;
        double gb = 0.0;
        for (Eigen::Index c = 0; c < a; ++c) {
          gb += gaa(r, c) * beta(idx[static_cast<std::size_t>(c)]);
        }
        double s = 0.0;
        if (q.penalized(j)) s = beta(j) > 0.0 ? 1.0 : -1.0;
        rhs(r) = wres + gb - q.lambda * s;
      }
      Eigen::VectorXd sol = gaa.ldlt().solve(rhs);
      double solve_err = (gaa * sol - rhs).cwiseAbs().maxCoeff();
      const double scale = 1.0 + rhs.cwiseAbs().maxCoeff();
      if (!(solve_err <= 1e-8 * scale)) {
        Eigen::MatrixXd ridged = gaa;
        ridged.diagonal().array() +=
            1e-11 * (1.0 + gaa.trace() / static_cast<double>(a));
        sol = ridged.ldlt().solve(rhs);
        solve_err = (gaa * sol - rhs).cwiseAbs().maxCoeff();
        if (!(solve_err <= 1e-6 * scale)) return false;
      }

      // Back off to the first sign flip along beta -> sol.
      double t = 1.0;
      int drop = -1;
      for (Eigen::Index r = 0; r < a; ++r) {
        const int j = idx[static_cast<std::size_t>(r)];
        if (!q.penalized(j)) continue;
        if (beta(j) > 0.0 ? sol(r) < 0.0 : sol(r) > 0.0) {
          const double tj = beta(j) / (beta(j) - sol(r));
          if (tj < t) {
            t = tj;
            drop = j;
          }
        }
      }
      double max_change = 0.0;
      for (Eigen::Index r = 0; r < a; ++r) {
        const int j = idx[static_cast<std::size_t>(r)];
        const double target = beta(j) + t * (sol(r) - beta(j));
        const double delta = target - beta(j);
        if (delta != 0.0) {
          beta(j) = target;
          resid -= delta * q.x->col(j);
          max_change = std::max(max_change, std::abs(delta));
        }
      }
      if (drop >= 0) {
        if (beta(drop) != 0.0) resid += beta(drop) * q.x->col(drop);
        beta(drop) = 0.0;
        active[static_cast<std::size_t>(drop)] = 0;
      }
      ++stats.sweeps;
      track();
      stats.last_change = max_change;
      moved = drop >= 0;
      if (moved) continue;  // re-solve on the reduced set
    }

    // Full KKT pass over the inactive columns.
    bool added = false;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (active[static_cast<std::size_t>(j)] || col_sq(j) <= 0.0) continue;
      const double grad =
          -q.x->col(j).cwiseProduct(*q.ww).dot(resid) / q.norm;
      if (std::abs(grad) > q.lambda + kkt_eps) {
        active[static_cast<std::size_t>(j)] = 1;
        added = true;
      }
    }
    ++stats.sweeps;
    if (!added) return true;
  }
  return false;
}

void solve_quadratic(const Quad& q, const Eigen::VectorXd& col_sq,
                     GramCache& cache, Eigen::VectorXd& beta,
                     Eigen::VectorXd& resid, const SolveOptions& opts,
                     int sweep_budget, bool best_effort, SolveStats& stats) {
  Eigen::VectorXd beta_in = beta;
  Eigen::VectorXd resid_in = resid;
  if (exact_solve(q, col_sq, cache, beta, resid, stats)) return;
  beta = std::move(beta_in);
  resid = std::move(resid_in);
  cd_solve(q, col_sq, beta, resid, opts,
           best_effort ? std::min(sweep_budget, stats.sweeps + 2000) : sweep_budget,
           best_effort, stats);
}

Eigen::VectorXd effective_weights(const LossKind& loss, Eigen::Index n) {
  if (loss.weights.size() == 0) return Eigen::VectorXd::Ones(n);
  return loss.weights;
}

Eigen::VectorXd col_squares(const Eigen::MatrixXd& design,
                            const Eigen::VectorXd& ww, double norm) {
  const Eigen::Index p = design.cols();
  Eigen::VectorXd out(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    out(j) = design.col(j).cwiseProduct(ww).dot(design.col(j)) / norm;
  }
  return out;
}

void finalize_fit(HalFit& fit, const SolveOptions& opts) {
  fit.intercept_index = opts.intercept_index;
  fit.intercept_penalized = opts.penalize_intercept;
  fit.active_set.clear();
  fit.C = 0.0;
  for (Eigen::Index j = 0; j < fit.beta.size(); ++j) {
    if (fit.beta(j) != 0.0) fit.active_set.push_back(static_cast<int>(j));
    if (opts.penalize_intercept || static_cast<int>(j) != opts.intercept_index) {
      fit.C += std::abs(fit.beta(j));
    }
  }
}

double null_intercept(const Dataset& data, const LossKind& loss,
                      const SolveOptions& opts) {
  if (opts.intercept_index < 0) return 0.0;
  const Eigen::VectorXd w = effective_weights(loss, data.n());
  const double sw = w.sum();
  if (sw <= 0.0) throw std::invalid_argument("lasso: no weighted rows");
  double b0 = w.dot(data.y) / sw;
  if (loss.family == LossFamily::binomial_loglik) {
    const double p = std::clamp(b0, 1e-9, 1.0 - 1e-9);
    b0 = std::log(p / (1.0 - p));
  }
  return b0;
}

// Core fit on compacted inputs. The Gram cache is shared across a
// squared-error path; binomial working weights change per outer step, so a
// fresh per-step cache is used there.
HalFit fit_compacted(const Eigen::MatrixXd& design, const Dataset& data,
                     const LossKind& loss, double lambda, const HalFit* warm,
                     const SolveOptions& opts, GramCache* shared_cache) {
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  const Eigen::VectorXd w = effective_weights(loss, n);
  const double norm = loss_norm(loss, {}, n);
  if (norm <= 0.0) throw std::invalid_argument("lasso: no weighted rows");

  HalFit fit;
  if (warm && warm->beta.size() == p) {
    fit.beta = warm->beta;
  } else {
    fit.beta = Eigen::VectorXd::Zero(p);
  }
  fit.loss = loss;
  fit.lambda = lambda;
  fit.constraint_slack = false;
  fit.sweeps = 0;
  fit.max_objective_increase = 0.0;

  SolveStats stats;
  if (loss.family == LossFamily::squared_error) {
    GramCache local;
    GramCache* cache = shared_cache;
    if (cache == nullptr) {
      local.init(p);
      cache = &local;
    }
    Quad q{&design, &data.y, &w,    norm, lambda,
           opts.intercept_index,    opts.penalize_intercept};
    Eigen::VectorXd resid = data.y - design * fit.beta;
    const Eigen::VectorXd col_sq = col_squares(design, w, norm);
    solve_quadratic(q, col_sq, *cache, fit.beta, resid, opts, opts.max_sweeps,
                    /*best_effort=*/false,
                    stats);
    fit.sweeps = stats.sweeps;
    fit.max_objective_increase = stats.max_objective_increase;
    fit.objective = quad_objective(q, fit.beta, resid);
    finalize_fit(fit, opts);
    return fit;
  }

  // Binomial: proximal Newton with step halving on the true objective.
  if (fit.beta.isZero(0.0) && opts.intercept_index >= 0) {
    fit.beta(opts.intercept_index) = null_intercept(data, loss, opts);
  }
  Eigen::VectorXd qlin = design * fit.beta;
  auto true_objective = [&](const Eigen::VectorXd& lin) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (w(i) == 0.0) continue;
      const double qc = clamp_pred(lin(i), loss.predictor_clamp);
      const double log1pexp =
          qc > 0.0 ? qc + std::log1p(std::exp(-qc)) : std::log1p(std::exp(qc));
      s += w(i) * (log1pexp - data.y(i) * qc);
    }
    double l1 = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (opts.penalize_intercept || static_cast<int>(j) != opts.intercept_index) {
        l1 += std::abs(fit.beta(j));
      }
    }
    return s / norm + lambda * l1;
  };

  Eigen::VectorXd ww(n), z(n);
  double obj = true_objective(qlin);
  int stalled = 0;
  const int max_outer = 500;
  for (int outer = 0; outer < max_outer; ++outer) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mu = expit(clamp_pred(qlin(i), loss.predictor_clamp));
      const double v = std::max(mu * (1.0 - mu), 1e-5);
      ww(i) = w(i) * v;
      z(i) = qlin(i) + (data.y(i) - mu) / v;
    }
    Quad q{&design, &z, &ww, norm, lambda, opts.intercept_index,
           opts.penalize_intercept};
    Eigen::VectorXd resid = z - qlin;
    const Eigen::VectorXd col_sq = col_squares(design, ww, norm);
    GramCache cache;
    cache.init(p);
    const Eigen::VectorXd beta_old = fit.beta;
    const Eigen::VectorXd qlin_old = qlin;
    solve_quadratic(q, col_sq, cache, fit.beta, resid, opts,
                    opts.max_sweeps - stats.sweeps, /*best_effort=*/true,
                    stats);
    qlin = z - resid;

    double obj_new = true_objective(qlin);
    int halvings = 0;
    while (obj_new > obj + 1e-12 * (1.0 + std::abs(obj)) && halvings < 12) {
      fit.beta = 0.5 * (fit.beta + beta_old);
      qlin = 0.5 * (qlin + qlin_old);
      obj_new = true_objective(qlin);
      ++halvings;
    }
    if (obj_new > obj) {
      stats.max_objective_increase =
          std::max(stats.max_objective_increase, obj_new - obj);
    }
    const double step = (fit.beta - beta_old).cwiseAbs().maxCoeff();
    const double improvement = obj - obj_new;
    obj = obj_new;
    if (step < opts.tol) break;
    // A stationary objective with exact inner solves means the remaining
    // movement is saturation drift along the clamped flat region.
    stalled = improvement < 1e-10 * (1.0 + std::abs(obj)) ? stalled + 1 : 0;
    if (stalled >= 2) break;
    if (outer >= 40 && improvement < 1e-8 * (1.0 + std::abs(obj))) break;
    if (outer == max_outer - 1) {
      std::ostringstream msg;
      msg << "binomial lasso did not converge: " << stats.sweeps
          << " sweeps, last outer step " << step;
      throw std::runtime_error(msg.str());
    }
  }
  fit.sweeps = stats.sweeps;
  fit.max_objective_increase = stats.max_objective_increase;
  fit.objective = obj;
  finalize_fit(fit, opts);
  return fit;
}

struct Compacted {
  Eigen::MatrixXd design;
  Dataset data;
  LossKind loss;
};

Compacted compact_rows(const Eigen::MatrixXd& design, const Dataset& data,
                       const LossKind& loss, std::span<const int> rows) {
  Compacted c;
  const auto m = static_cast<Eigen::Index>(rows.size());
  c.design.resize(m, design.cols());
  c.data.x.resize(m, data.x.cols());
  c.data.y.resize(m);
  c.loss = loss;
  if (loss.weights.size() != 0) c.loss.weights.resize(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const int i = rows[static_cast<std::size_t>(r)];
    c.design.row(r) = design.row(i);
    c.data.x.row(r) = data.x.row(i);
    c.data.y(r) = data.y(i);
    if (loss.weights.size() != 0) c.loss.weights(r) = loss.weights(i);
  }
  c.data.column_meta = data.column_meta;
  return c;
}

}  // namespace

double lambda_max(const Eigen::MatrixXd& design, const Dataset& data,
                  const LossKind& loss, const SolveOptions& opts,
                  std::span<const int> rows) {
  if (!rows.empty()) {
    const Compacted c = compact_rows(design, data, loss, rows);
    return lambda_max(c.design, c.data, c.loss, opts);
  }
  const Eigen::Index n = data.n();
  const Eigen::VectorXd w = effective_weights(loss, n);
  const double norm = loss_norm(loss, {}, n);
  if (norm <= 0.0) throw std::invalid_argument("lambda_max: no weighted rows");
  const double b0 = null_intercept(data, loss, opts);
  Eigen::VectorXd r(n);
  const double mu =
      loss.family == LossFamily::binomial_loglik ? expit(b0) : b0;
  for (Eigen::Index i = 0; i < n; ++i) {
    r(i) = -w(i) * (data.y(i) - mu);
  }
  double lam = 0.0;
  for (Eigen::Index j = 0; j < design.cols(); ++j) {
    if (!opts.penalize_intercept && static_cast<int>(j) == opts.intercept_index) {
      continue;
    }
    lam = std::max(lam, std::abs(design.col(j).dot(r) / norm));
  }
  return lam;
}

std::vector<double> default_lambda_grid(double lambda_max_value, int size,
                                        double min_ratio) {
  if (size < 1 || lambda_max_value <= 0.0 || min_ratio <= 0.0) {
    throw std::invalid_argument("default_lambda_grid: bad parameters");
  }
  std::vector<double> grid(static_cast<std::size_t>(size));
  if (size == 1) {
    grid[0] = lambda_max_value;
    return grid;
  }
  const double step = std::log(min_ratio) / (size - 1);
  for (int i = 0; i < size; ++i) {
    grid[static_cast<std::size_t>(i)] = lambda_max_value * std::exp(step * i);
  }
  return grid;
}

HalFit fit_penalized(const Eigen::MatrixXd& design, const Dataset& data,
                     const LossKind& loss, double lambda, const HalFit* warm_start,
                     const SolveOptions& opts, std::span<const int> rows) {
  if (lambda < 0.0) throw std::invalid_argument("fit_penalized: lambda < 0");
  if (design.rows() != data.n()) {
    throw std::invalid_argument("fit_penalized: design rows do not match data");
  }
  if (!rows.empty()) {
    const Compacted c = compact_rows(design, data, loss, rows);
    return fit_compacted(c.design, c.data, c.loss, lambda, warm_start, opts,
                         nullptr);
  }
  return fit_compacted(design, data, loss, lambda, warm_start, opts, nullptr);
}

PathStream::PathStream(const Eigen::MatrixXd& design, const Dataset& data,
                       const LossKind& loss, const SolveOptions& opts,
                       std::span<const int> rows)
    : opts_(opts) {
  if (!rows.empty()) {
    auto c = compact_rows(design, data, loss, rows);
    owned_design_ = std::move(c.design);
    owned_data_ = std::move(c.data);
    loss_ = std::move(c.loss);
    design_ = &owned_design_;
    data_ = &owned_data_;
  } else {
    design_ = &design;
    data_ = &data;
    loss_ = loss;
  }
  cache_.reset(new GramCache());
  cache_->init(design_->cols());
  // Saturation guard applies to Bernoulli-row logistic fits only; a
  // frequency-weighted hazard fit legitimately runs towards interpolation.
  saturation_guard_ = loss_.family == LossFamily::binomial_loglik &&
                      !loss_.frequency_weights;
  if (saturation_guard_) {
    const double b0 = null_intercept(*data_, loss_, opts_);
    const Eigen::VectorXd q0 =
        Eigen::VectorXd::Constant(data_->n(), b0);
    null_risk_ = risk(q0, *data_, loss_);
  }
}

PathStream::~PathStream() = default;

HalFit PathStream::fit(double lambda) {
  if (frozen_) {
    HalFit fit = frozen_fit_;
    fit.lambda = lambda;
    return fit;
  }
  GramCache* cache =
      loss_.family == LossFamily::squared_error ? cache_.get() : nullptr;
  HalFit fit = fit_compacted(*design_, *data_, loss_, lambda,
                             have_warm_ ? &warm_ : nullptr, opts_, cache);
  warm_ = fit;
  have_warm_ = true;
  if (saturation_guard_ && null_risk_ > 0.0) {
    const Eigen::VectorXd q = fitted_values(*design_, fit);
    const double dev_ratio = 1.0 - risk(q, *data_, loss_) / null_risk_;
    if (dev_ratio > 0.99) {
      frozen_ = true;
      frozen_fit_ = fit;
    }
  }
  return fit;
}

PathResult lasso_path(const Eigen::MatrixXd& design, const Dataset& data,
                      const LossKind& loss, std::span<const double> lambda_grid,
                      const SolveOptions& opts, std::span<const int> rows) {
  if (lambda_grid.empty()) {
    throw std::invalid_argument("lasso_path: empty grid");
  }
  for (std::size_t i = 1; i < lambda_grid.size(); ++i) {
    if (!(lambda_grid[i] < lambda_grid[i - 1])) {
      throw std::invalid_argument("lasso_path: grid must be strictly decreasing");
    }
  }
  PathStream stream(design, data, loss, opts, rows);
  PathResult path;
  path.fits.reserve(lambda_grid.size());
  for (double lam : lambda_grid) {
    path.fits.push_back(stream.fit(lam));
    const std::size_t m = path.fits.size();
    if (m >= 2) {
      const double drop = path.fits[m - 2].C - path.fits[m - 1].C;
      if (drop > 1e-8) {
        path.c_monotonicity_violated = true;
        path.worst_c_violation = std::max(path.worst_c_violation, drop);
      }
    }
  }
  return path;
}

HalFit fit_constrained(const Eigen::MatrixXd& design, const Dataset& data,
                       const LossKind& loss, double C, const SolveOptions& opts,
                       std::span<const int> rows) {
  if (C < 0.0) throw std::invalid_argument("fit_constrained: C < 0");
  const double lam_max = lambda_max(design, data, loss, opts, rows);
  if (C == 0.0 || lam_max == 0.0) {
    return fit_penalized(design, data, loss, std::max(lam_max, 1e-12), nullptr,
                         opts, rows);
  }
  const double lam_floor = 1e-6 * lam_max;
  HalFit lo_fit = fit_penalized(design, data, loss, lam_floor, nullptr, opts, rows);
  if (lo_fit.C <= C) {
    lo_fit.constraint_slack = true;
    return lo_fit;
  }
  const double tol = std::max(1e-6, 1e-4 * C);
  double lam_lo = lam_floor;  // realized C above target
  double lam_hi = lam_max;    // realized C = 0
  HalFit warm = lo_fit;
  for (int step = 0; step < 200; ++step) {
    const double lam = std::sqrt(lam_lo * lam_hi);
    HalFit mid = fit_penalized(design, data, loss, lam, &warm, opts, rows);
    if (std::abs(mid.C - C) <= tol) {
      return mid;
    }
    if (mid.C > C) {
      lam_lo = lam;
    } else {
      lam_hi = lam;
    }
    warm = std::move(mid);
  }
  throw std::runtime_error("fit_constrained: bisection failed after 200 steps");
}

Eigen::VectorXd fitted_values(const Eigen::MatrixXd& design, const HalFit& fit) {
  if (design.cols() != fit.beta.size()) {
    throw std::invalid_argument("fitted_values: dimension mismatch");
  }
  Eigen::VectorXd q = Eigen::VectorXd::Zero(design.rows());
  for (Eigen::Index j = 0; j < fit.beta.size(); ++j) {
    if (fit.beta(j) != 0.0) q += fit.beta(j) * design.col(j);
  }
  return q;
}

Eigen::VectorXd basis_scores(const HalFit& fit, const Eigen::MatrixXd& design,
                             const Dataset& data) {
  const Eigen::VectorXd q = fitted_values(design, fit);
  const Eigen::VectorXd r = pointwise_score(q, data, fit.loss);
  const double norm = loss_norm(fit.loss, {}, data.n());
  return design.transpose() * r / norm;
}

KktReport kkt_check(const HalFit& fit, const Eigen::MatrixXd& design,
                    const Dataset& data, double tol) {
  const Eigen::VectorXd scores = basis_scores(fit, design, data);
  KktReport rep;
  rep.status.resize(static_cast<std::size_t>(scores.size()));
  for (Eigen::Index j = 0; j < scores.size(); ++j) {
    const bool penalized =
        fit.intercept_penalized || static_cast<int>(j) != fit.intercept_index;
    double violation = 0.0;
    KktState ok_state, bad_state;
    if (!penalized) {
      violation = std::abs(scores(j));
      ok_state = KktState::unpenalized;
      bad_state = KktState::unpenalized;
    } else if (fit.beta(j) != 0.0) {
      const double sign = fit.beta(j) > 0.0 ? 1.0 : -1.0;
      violation = std::abs(scores(j) + fit.lambda * sign);
      ok_state = KktState::active_ok;
      bad_state = KktState::active_violation;
    } else {
      violation = std::max(0.0, std::abs(scores(j)) - fit.lambda);
      ok_state = KktState::inactive_ok;
      bad_state = KktState::inactive_violation;
    }
    rep.status[static_cast<std::size_t>(j)] =
        violation <= tol ? ok_state : bad_state;
    rep.max_violation = std::max(rep.max_violation, violation);
  }
  return rep;
}

}  // namespace hal
