#include "hal/targets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "hal/rng.hpp"

namespace hal {

namespace {

constexpr double kZ95 = 1.959964;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double clamp01(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

double min_active_pn_phi(const HalFit& fit, const Eigen::MatrixXd& design) {
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd col_mean;
  if (fit.loss.frequency_weights) {
    const double norm = fit.loss.weights.sum();
    col_mean = design.transpose() * fit.loss.weights / norm;
  } else {
    col_mean = design.colwise().mean();
  }
  for (int j : fit.active_set) {
    if (j == fit.intercept_index) continue;
    best = std::min(best, col_mean(j));
  }
  return best;
}

bool is_constant(const Eigen::VectorXd& v) {
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) != v(0)) return false;
  }
  return true;
}

void fill_interval(double psi, const Eigen::VectorXd& eic, double level,
                   double& se, double& lo, double& hi) {
  if (eic.size() < 2 || is_constant(eic)) {
    se = 0.0;
    lo = psi;
    hi = psi;
    return;
  }
  const WaldInterval w = wald_ci(psi, eic, level);
  se = w.se;
  lo = w.lo;
  hi = w.hi;
}

}  // namespace

WaldInterval wald_ci(double psi, const Eigen::VectorXd& eic, double level) {
  const Eigen::Index n = eic.size();
  if (n < 2) throw std::invalid_argument("wald_ci: need at least two values");
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("wald_ci: level must lie in (0,1)");
  }
  const double mean = eic.mean();
  double ss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = eic(i) - mean;
    ss += d * d;
  }
  if (ss == 0.0) throw std::invalid_argument("wald_ci: constant eic");
  const double sd = std::sqrt(ss / (static_cast<double>(n) - 1.0));
  const double z = level == 0.95 ? kZ95 : normal_quantile(0.5 + 0.5 * level);
  WaldInterval w;
  w.se = sd / std::sqrt(static_cast<double>(n));
  w.lo = psi - z * w.se;
  w.hi = psi + z * w.se;
  return w;
}

Eigen::VectorXd eic_ate(const Eigen::VectorXd& qbar1, const Eigen::VectorXd& qbarA,
                        const Eigen::VectorXd& gbar, const Eigen::VectorXd& a,
                        const Eigen::VectorXd& y, double psi) {
  const Eigen::Index n = qbar1.size();
  if (qbarA.size() != n || gbar.size() != n || a.size() != n || y.size() != n) {
    throw std::invalid_argument("eic_ate: length mismatch");
  }
  Eigen::VectorXd eic(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (gbar(i) <= 0.0 || gbar(i) >= 1.0) {
      throw std::invalid_argument("eic_ate: gbar must lie strictly in (0,1)");
    }
    eic(i) = a(i) / gbar(i) * (y(i) - qbarA(i)) + qbar1(i) - psi;
  }
  return eic;
}

AteEstimate fit_ate(const Dataset& data, const AteConfig& cfg) {
  if (!data.a) throw std::invalid_argument("fit_ate: dataset has no treatment column");
  const Eigen::VectorXd& a = *data.a;
  const Eigen::Index n = data.n();
  const double a_sum = a.sum();
  if (a_sum == 0.0 || a_sum == static_cast<double>(n)) {
    throw std::invalid_argument("fit_ate: degenerate treatment (all 0 or all 1)");
  }

  // Treatment mechanism: m = 0 HAL logistic regression of A on W, CV-tuned.
  Dataset d_g = data;
  d_g.y = a;
  d_g.a.reset();
  const BasisDictionary dict_g = enumerate_basis(d_g, 0, cfg.caps);
  LossKind loss_g;
  loss_g.family = LossFamily::binomial_loglik;
  CvResult g_res = cv_select_C(d_g, dict_g, loss_g, cfg.cv);
  const HalFit& g_fit = g_res.path.fits[g_res.report.cv_index];
  const Eigen::VectorXd g_lin = fitted_values(g_res.design, g_fit);

  Eigen::VectorXd gbar(n);
  Eigen::Index truncated = 0;
  std::vector<Eigen::Index> offending;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double g = expit(clamp01(g_lin(i), -loss_g.predictor_clamp,
                                   loss_g.predictor_clamp));
    if (g < cfg.gmin || g > 1.0 - cfg.gmin) {
      ++truncated;
      if (offending.size() < 10) offending.push_back(i);
    }
    gbar(i) = clamp01(g, cfg.gmin, 1.0 - cfg.gmin);
  }
  const double trunc_frac = static_cast<double>(truncated) / static_cast<double>(n);
  if (trunc_frac > cfg.truncation_budget) {
    std::ostringstream msg;
    msg << "fit_ate: positivity violation beyond truncation budget ("
        << truncated << "/" << n << " rows truncated; first offenders:";
    for (Eigen::Index i : offending) msg << " " << i;
    msg << ")";
    throw std::runtime_error(msg.str());
  }

  // Outcome regression of Y on W among the treated rows.
  const BasisDictionary dict_q =
      cfg.m == 0 ? dict_g : enumerate_basis(d_g, cfg.m, cfg.caps);
  LossKind loss_q;
  loss_q.family = cfg.outcome_loss;
  loss_q.weights = a;
  Dataset d_q = data;
  d_q.a.reset();
  CvResult q_res = cv_select_C(d_q, dict_q, loss_q, cfg.cv);

  auto qbar_of = [&](const HalFit& fit) {
    Eigen::VectorXd q = fitted_values(q_res.design, fit);
    if (cfg.outcome_loss == LossFamily::binomial_loglik) {
      for (Eigen::Index i = 0; i < q.size(); ++i) {
        q(i) = expit(clamp01(q(i), -loss_q.predictor_clamp, loss_q.predictor_clamp));
      }
    }
    return q;
  };
  auto eic_of = [&](const HalFit& fit) {
    const Eigen::VectorXd qbar = qbar_of(fit);
    return eic_ate(qbar, qbar, gbar, a, data.y, qbar.mean());
  };

  SelectorReport sel;
  switch (cfg.undersmooth.rule) {
    case Rule::cv:
      sel = q_res.report;
      break;
    case Rule::global_score:
      sel = undersmooth_global(q_res.path, q_res.design, d_q, cfg.undersmooth,
                               q_res.report);
      break;
    case Rule::sparse_support:
      sel = undersmooth_sparsity(q_res.path, q_res.design, d_q, cfg.undersmooth,
                                 q_res.report);
      break;
    case Rule::targeted_eic:
      sel = undersmooth_targeted(q_res.path, q_res.design, d_q, eic_of,
                                 cfg.undersmooth, q_res.report);
      break;
  }

  const HalFit& fit = q_res.path.fits[sel.selected_index];
  const Eigen::VectorXd qbar = qbar_of(fit);

  AteEstimate est;
  est.psi = qbar.mean();
  est.eic = eic_ate(qbar, qbar, gbar, a, data.y, est.psi);
  est.qbar = qbar;
  est.gbar = gbar;
  fill_interval(est.psi, est.eic, cfg.ci_level, est.se, est.ci_lo, est.ci_hi);
  est.outcome_report = std::move(sel);
  est.gbar_report = g_res.report;

  const double sqrt_n = std::sqrt(static_cast<double>(n));
  est.diagnostics.sqrt_n_pn_dstar = sqrt_n * est.eic.mean();
  const Eigen::VectorXd eic_cv =
      eic_of(q_res.path.fits[est.outcome_report.cv_index]);
  est.diagnostics.sqrt_n_pn_dstar_at_cv = sqrt_n * eic_cv.mean();
  est.diagnostics.min_active_pn_phi = min_active_pn_phi(fit, q_res.design);
  est.diagnostics.c_cv = est.outcome_report.c_cv;
  est.diagnostics.c_selected = est.outcome_report.c_selected;
  est.diagnostics.not_met = est.outcome_report.not_met;
  est.diagnostics.g_truncated_fraction = trunc_frac;
  return est;
}

double psi_density(const HazardDensity& d) {
  double s = 0.0;
  for (double v : d.density) s += v * v;
  return s * d.binwidth;
}

Eigen::VectorXd eic_density(const std::vector<double>& o, const HazardDensity& d,
                            double psi) {
  const std::size_t bins = d.density.size();
  Eigen::VectorXd eic(static_cast<Eigen::Index>(o.size()));
  const double lo = d.bin_edges.front();
  const double hi = d.bin_edges.back();
  for (std::size_t i = 0; i < o.size(); ++i) {
    double p = 0.0;
    if (o[i] >= lo && o[i] <= hi) {
      auto b = static_cast<std::size_t>((o[i] - lo) / d.binwidth);
      if (b >= bins) b = bins - 1;
      p = d.density[b];
    }
    eic(static_cast<Eigen::Index>(i)) = 2.0 * (p - psi);
  }
  return eic;
}

namespace {

struct BinCounts {
  std::vector<double> at_risk;
  std::vector<double> events;
};

BinCounts count_bins(const std::vector<int>& bin_of, std::span<const int> subset,
                     int rows) {
  BinCounts c;
  c.at_risk.assign(static_cast<std::size_t>(rows), 0.0);
  c.events.assign(static_cast<std::size_t>(rows), 0.0);
  if (subset.empty()) {
    for (int b : bin_of) c.events[static_cast<std::size_t>(b)] += 1.0;
  } else {
    for (int i : subset) {
      c.events[static_cast<std::size_t>(bin_of[static_cast<std::size_t>(i)])] += 1.0;
    }
  }
  // at_risk(b) counts observations landing in bin b or later.
  double tail = 0.0;
  for (int b = rows - 1; b >= 0; --b) {
    tail += c.events[static_cast<std::size_t>(b)];
    c.at_risk[static_cast<std::size_t>(b)] = tail;
  }
  return c;
}

HazardDensity hazard_density_from_fit(const HalFit& fit,
                                      const Eigen::MatrixXd& pred_design,
                                      const std::vector<double>& edges,
                                      double width, double clamp) {
  const Eigen::Index bins = pred_design.rows();
  const Eigen::VectorXd q = fitted_values(pred_design, fit);
  HazardDensity d;
  d.bin_edges = edges;
  d.binwidth = width;
  d.hazard.resize(static_cast<std::size_t>(bins));
  d.density.resize(static_cast<std::size_t>(bins));
  double surv = 1.0;
  for (Eigen::Index b = 0; b < bins; ++b) {
    const double h = expit(clamp01(q(b), -clamp, clamp));
    d.hazard[static_cast<std::size_t>(b)] = h;
    d.density[static_cast<std::size_t>(b)] = h * surv / width;
    surv *= (1.0 - h);
  }
  d.shortfall = surv;
  return d;
}

}  // namespace

DensityFitResult fit_density_hal(const std::vector<double>& o, int bins,
                                 const DensityConfig& cfg) {
  const int n = static_cast<int>(o.size());
  if (bins < 10) throw std::invalid_argument("fit_density_hal: need bins >= 10");
  if (n < 50) throw std::invalid_argument("fit_density_hal: need n >= 50");
  if (static_cast<long long>(n) * bins > cfg.max_long_rows) {
    throw std::invalid_argument(
        "fit_density_hal: n * bins exceeds the long-format budget; reduce bins or n");
  }
  for (double v : o) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("fit_density_hal: nonfinite observation");
    }
  }

  const double omin = *std::min_element(o.begin(), o.end());
  const double omax = *std::max_element(o.begin(), o.end());
  double pad = cfg.pad_fraction * (omax - omin);
  if (pad <= 0.0) pad = std::max(1.0, std::abs(omin)) * 1e-3;
  const double lo = omin - pad;
  const double hi = omax + pad;
  const double width = (hi - lo) / bins;

  std::vector<double> edges(static_cast<std::size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b) edges[static_cast<std::size_t>(b)] = lo + b * width;

  std::vector<int> bin_of(static_cast<std::size_t>(n));
  int bmax = 0;
  for (int i = 0; i < n; ++i) {
    int b = static_cast<int>((o[static_cast<std::size_t>(i)] - lo) / width);
    b = std::clamp(b, 0, bins - 1);
    bin_of[static_cast<std::size_t>(i)] = b;
    bmax = std::max(bmax, b);
  }
  const int rows = bmax + 1;

  // Aggregated long format: one row per bin with at-risk counts as
  // frequency weights; identical likelihood to the row-per-(obs, bin)
  // expansion.
  Eigen::MatrixXd mid(rows, 1);
  for (int b = 0; b < rows; ++b) mid(b, 0) = lo + (b + 0.5) * width;
  const BinCounts full = count_bins(bin_of, {}, rows);
  auto make_agg = [&](const BinCounts& c) {
    Eigen::VectorXd y(rows);
    for (int b = 0; b < rows; ++b) {
      y(b) = c.at_risk[static_cast<std::size_t>(b)] > 0.0
                 ? c.events[static_cast<std::size_t>(b)] /
                       c.at_risk[static_cast<std::size_t>(b)]
                 : 0.0;
    }
    return make_dataset(mid, y);
  };
  auto make_loss = [&](const BinCounts& c) {
    LossKind loss;
    loss.family = LossFamily::binomial_loglik;
    loss.weights = Eigen::Map<const Eigen::VectorXd>(c.at_risk.data(), rows);
    loss.frequency_weights = true;
    return loss;
  };

  const Dataset agg = make_agg(full);
  const LossKind loss = make_loss(full);
  const BasisDictionary dict = enumerate_basis(agg, 0, cfg.caps);
  const Eigen::MatrixXd design = design_matrix(agg, dict);

  // Prediction design over every bin midpoint, including bins past the last
  // observation (the fitted step extends to the right).
  Eigen::MatrixXd pred_design(bins, dict.size());
  for (int b = 0; b < bins; ++b) {
    const double xb = lo + (b + 0.5) * width;
    pred_design.row(b) = dictionary_row(dict, std::span<const double>(&xb, 1)).transpose();
  }

  const double lmax = lambda_max(design, agg, loss, cfg.cv.solve);
  const std::vector<double> grid =
      !cfg.cv.lambda_grid.empty()
          ? cfg.cv.lambda_grid
          : default_lambda_grid(std::max(lmax, 1e-12), cfg.cv.grid_size,
                                cfg.cv.lambda_min_ratio);
  const std::size_t g = grid.size();

  // V-fold CV over original observations with re-aggregated counts,
  // grid-major so the curve can stop early past its minimizer.
  const std::vector<int> assignment = vfold_split(n, cfg.cv.folds, cfg.cv.seed);
  std::vector<double> risk_sum(g, 0.0);
  std::vector<int> risk_count(g, 0);
  std::vector<char> aborted(g, 0);
  struct Fold {
    Dataset agg_val;
    LossKind loss_val;
    Dataset agg_train;
    LossKind loss_train;
    std::unique_ptr<PathStream> stream;
  };
  std::vector<Fold> fold_state;
  {
    std::vector<int> train, val;
    for (int f = 0; f < cfg.cv.folds; ++f) {
      train.clear();
      val.clear();
      for (int i = 0; i < n; ++i) {
        (assignment[static_cast<std::size_t>(i)] == f ? val : train).push_back(i);
      }
      const BinCounts tc = count_bins(bin_of, train, rows);
      const BinCounts vc = count_bins(bin_of, val, rows);
      Fold fold;
      fold.agg_train = make_agg(tc);
      fold.agg_val = make_agg(vc);
      fold.loss_train = make_loss(tc);
      fold.loss_val = make_loss(vc);
      fold_state.push_back(std::move(fold));
    }
    for (Fold& fold : fold_state) {
      fold.stream = std::make_unique<PathStream>(design, fold.agg_train,
                                                 fold.loss_train, cfg.cv.solve);
    }
  }
  std::size_t running_best = 0;
  double running_best_risk = std::numeric_limits<double>::infinity();
  bool have_valid = false;
  for (std::size_t j = 0; j < g; ++j) {
    for (Fold& fold : fold_state) {
      try {
        const HalFit fit = fold.stream->fit(grid[j]);
        const Eigen::VectorXd q = fitted_values(design, fit);
        risk_sum[j] += risk(q, fold.agg_val, fold.loss_val);
        risk_count[j] += 1;
      } catch (const std::exception&) {
        aborted[j] = 1;
      }
    }
    if (!aborted[j] && risk_count[j] == cfg.cv.folds) {
      const double avg = risk_sum[j] / cfg.cv.folds;
      if (avg < running_best_risk) {
        running_best_risk = avg;
        running_best = j;
      }
      have_valid = true;
    }
    if (cfg.cv.early_stop_patience > 0 && have_valid &&
        j >= running_best +
                 static_cast<std::size_t>(cfg.cv.early_stop_patience)) {
      break;
    }
  }
  fold_state.clear();
  if (!have_valid) {
    throw std::runtime_error("fit_density_hal: every grid point failed");
  }

  SelectorReport cv_report;
  cv_report.rule = Rule::cv;
  cv_report.m_selected = 0;
  cv_report.cv_risk_curve.assign(g, kNaN);
  for (std::size_t j = 0; j < g; ++j) {
    if (!aborted[j] && risk_count[j] == cfg.cv.folds) {
      cv_report.cv_risk_curve[j] = risk_sum[j] / cfg.cv.folds;
    }
  }
  cv_report.cv_index = running_best;

  const double clamp = loss.predictor_clamp;
  auto density_of = [&](const HalFit& fit) {
    return hazard_density_from_fit(fit, pred_design, edges, width, clamp);
  };
  auto eic_of = [&](const HalFit& fit) {
    const HazardDensity d = density_of(fit);
    return eic_density(o, d, psi_density(d));
  };

  // Full-data path, extended lazily: with the targeted rule the walk stops
  // at the first criterion point past the CV index, so the deepest fits are
  // computed only when actually selected.
  PathResult path;
  path.fits.reserve(g);
  SelectorReport sel;
  {
    PathStream stream(design, agg, loss, cfg.cv.solve);
    const bool lazy = cfg.undersmooth.rule == Rule::targeted_eic;
    std::vector<double> pn, pn_sq, thresholds;
    std::size_t selected = g;  // g = not found
    for (std::size_t j = 0; j < g; ++j) {
      path.fits.push_back(stream.fit(grid[j]));
      if (lazy) {
        const Eigen::VectorXd eic = eic_of(path.fits.back());
        const double nn = static_cast<double>(eic.size());
        pn.push_back(eic.mean());
        pn_sq.push_back(eic.squaredNorm() / nn);
        thresholds.push_back(pn_sq.back() / (std::sqrt(nn) * std::log(nn)));
        if (j >= cv_report.cv_index && selected == g &&
            std::abs(pn.back()) < thresholds.back()) {
          selected = j;
          break;
        }
      }
    }
    cv_report.selected_index = cv_report.cv_index;
    cv_report.c_cv = path.fits[cv_report.cv_index].C;
    cv_report.c_selected = cv_report.c_cv;
    cv_report.lambda_cv = path.fits[cv_report.cv_index].lambda;
    cv_report.lambda_selected = cv_report.lambda_cv;

    switch (cfg.undersmooth.rule) {
      case Rule::cv:
        sel = cv_report;
        break;
      case Rule::global_score:
        sel = undersmooth_global(path, design, agg, cfg.undersmooth, cv_report);
        break;
      case Rule::sparse_support:
        sel = undersmooth_sparsity(path, design, agg, cfg.undersmooth,
                                   cv_report);
        break;
      case Rule::targeted_eic: {
        sel = cv_report;
        sel.rule = Rule::targeted_eic;
        sel.not_met = selected == g;
        sel.selected_index = sel.not_met ? path.fits.size() - 1 : selected;
        sel.threshold = thresholds[sel.selected_index];
        sel.c_selected = path.fits[sel.selected_index].C;
        sel.lambda_selected = path.fits[sel.selected_index].lambda;
        sel.trace.pn_dstar = pn;
        sel.trace.pn_dstar_sq = pn_sq;
        break;
      }
    }
    // Trace over the computed prefix.
    const std::size_t computed = path.fits.size();
    sel.trace.lambda.resize(computed);
    sel.trace.c.resize(computed);
    sel.trace.cv_risk.assign(computed, kNaN);
    for (std::size_t j = 0; j < computed; ++j) {
      sel.trace.lambda[j] = path.fits[j].lambda;
      sel.trace.c[j] = path.fits[j].C;
      sel.trace.cv_risk[j] = cv_report.cv_risk_curve[j];
    }
  }

  DensityFitResult out;
  out.report = sel;
  out.density = density_of(path.fits[sel.selected_index]);
  out.density_cv = density_of(path.fits[cv_report.cv_index]);

  const double sqrt_n = std::sqrt(static_cast<double>(n));
  auto estimate_of = [&](const HazardDensity& d, const HalFit& fit,
                         const SelectorReport& rep) {
    DensityEstimate e;
    e.psi = psi_density(d);
    e.eic = eic_density(o, d, e.psi);
    fill_interval(e.psi, e.eic, cfg.ci_level, e.se, e.ci_lo, e.ci_hi);
    e.diagnostics.sqrt_n_pn_dstar = sqrt_n * e.eic.mean();
    e.diagnostics.min_active_pn_phi = min_active_pn_phi(fit, design);
    e.diagnostics.c_cv = cv_report.c_cv;
    e.diagnostics.c_selected = rep.c_selected;
    e.diagnostics.not_met = rep.not_met;
    e.diagnostics.shortfall = d.shortfall;
    return e;
  };
  out.estimate = estimate_of(out.density, path.fits[sel.selected_index], sel);
  out.estimate_cv =
      estimate_of(out.density_cv, path.fits[cv_report.cv_index], cv_report);
  out.estimate.diagnostics.sqrt_n_pn_dstar_at_cv =
      out.estimate_cv.diagnostics.sqrt_n_pn_dstar;
  return out;
}

}  // namespace hal
