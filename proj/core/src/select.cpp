#include "hal/select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>

#include "hal/rng.hpp"

namespace hal {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

std::string rule_name(Rule rule) {
  switch (rule) {
    case Rule::cv: return "cv";
    case Rule::global_score: return "global";
    case Rule::sparse_support: return "sparse";
    case Rule::targeted_eic: return "targeted";
  }
  return "cv";
}

Rule rule_from_name(const std::string& name) {
  if (name == "cv") return Rule::cv;
  if (name == "global") return Rule::global_score;
  if (name == "sparse") return Rule::sparse_support;
  if (name == "targeted") return Rule::targeted_eic;
  throw std::invalid_argument("unknown rule: " + name);
}

std::vector<int> vfold_split(int n, int folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("vfold_split: need folds >= 2");
  if (n < folds) throw std::invalid_argument("vfold_split: n < folds");
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  RngStream rng = make_stream(seed, 0, 0x666f6c64ull);  // "fold"
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  std::vector<int> assignment(static_cast<std::size_t>(n));
  const int base = n / folds;
  const int extra = n % folds;
  int pos = 0;
  for (int f = 0; f < folds; ++f) {
    const int size = base + (f < extra ? 1 : 0);
    for (int r = 0; r < size; ++r) {
      assignment[static_cast<std::size_t>(order[static_cast<std::size_t>(pos++)])] = f;
    }
  }
  return assignment;
}

namespace {

std::vector<double> resolve_lambda_grid(const Eigen::MatrixXd& design,
                                        const Dataset& data, const LossKind& loss,
                                        const CvConfig& cfg) {
  if (!cfg.lambda_grid.empty()) return cfg.lambda_grid;
  const double lmax = lambda_max(design, data, loss, cfg.solve);
  if (lmax <= 0.0) {
    // Degenerate outcome; a single null fit still defines the curve.
    return {1e-12};
  }
  return default_lambda_grid(lmax, cfg.grid_size, cfg.lambda_min_ratio);
}

double effective_n(const LossKind& loss, Eigen::Index n) {
  return loss_norm(loss, {}, n);
}

// Shared walk: first path index at or above the CV index whose criterion
// value passes; otherwise the last index with not_met.
SelectorReport walk_path(const PathResult& path, const SelectorReport& cv_report,
                         Rule rule, const std::vector<double>& criterion,
                         double threshold, bool strict) {
  SelectorReport rep = cv_report;
  rep.rule = rule;
  rep.threshold = threshold;
  rep.not_met = true;
  rep.selected_index = path.fits.size() - 1;
  for (std::size_t i = rep.cv_index; i < path.fits.size(); ++i) {
    const double v = criterion[i];
    const bool pass = strict ? (v < threshold) : (v <= threshold);
    if (pass) {
      rep.selected_index = i;
      rep.not_met = false;
      break;
    }
  }
  rep.c_selected = path.fits[rep.selected_index].C;
  rep.lambda_selected = path.fits[rep.selected_index].lambda;
  return rep;
}

void fill_base_trace(CriterionTrace& trace, const PathResult& path,
                     const std::vector<double>& cv_curve) {
  const std::size_t m = path.fits.size();
  trace.lambda.resize(m);
  trace.c.resize(m);
  trace.cv_risk.assign(m, kNaN);
  trace.min_active_score.assign(m, kNaN);
  trace.min_active_pn_phi.assign(m, kNaN);
  trace.pn_dstar.assign(m, kNaN);
  trace.pn_dstar_sq.assign(m, kNaN);
  for (std::size_t i = 0; i < m; ++i) {
    trace.lambda[i] = path.fits[i].lambda;
    trace.c[i] = path.fits[i].C;
    if (i < cv_curve.size()) trace.cv_risk[i] = cv_curve[i];
  }
}

}  // namespace

CvResult cv_select_C(const Dataset& data, const BasisDictionary& dict,
                     const LossKind& loss, const CvConfig& cfg) {
  if (cfg.folds < 2) throw std::invalid_argument("cv_select_C: folds >= 2");
  CvResult out;
  out.design = design_matrix(data, dict);
  const Eigen::MatrixXd& design = out.design;
  const int n = static_cast<int>(data.n());

  const std::vector<int> assignment = vfold_split(n, cfg.folds, cfg.seed);

  // Full-data fits over the grid.
  if (!cfg.c_grid.empty()) {
    std::vector<double> cs = cfg.c_grid;
    std::sort(cs.begin(), cs.end());
    for (double c : cs) {
      out.path.fits.push_back(fit_constrained(design, data, loss, c, cfg.solve));
    }
    std::sort(out.path.fits.begin(), out.path.fits.end(),
              [](const HalFit& a, const HalFit& b) { return a.lambda > b.lambda; });
  } else {
    const std::vector<double> grid = resolve_lambda_grid(design, data, loss, cfg);
    out.path = lasso_path(design, data, loss, grid, cfg.solve);
  }
  const std::size_t g = out.path.fits.size();

  // Per-fold validation risks, grid-major so the averaged curve can stop
  // early once the minimizer has clearly passed.
  std::vector<double> risk_sum(g, 0.0);
  std::vector<int> risk_count(g, 0);
  std::vector<char> aborted(g, 0);
  std::vector<std::vector<int>> train(static_cast<std::size_t>(cfg.folds));
  std::vector<std::vector<int>> val(static_cast<std::size_t>(cfg.folds));
  for (int i = 0; i < n; ++i) {
    const int f = assignment[static_cast<std::size_t>(i)];
    for (int other = 0; other < cfg.folds; ++other) {
      (other == f ? val : train)[static_cast<std::size_t>(other)].push_back(i);
    }
  }
  std::vector<std::unique_ptr<PathStream>> streams;
  if (cfg.c_grid.empty()) {
    for (int f = 0; f < cfg.folds; ++f) {
      streams.push_back(std::make_unique<PathStream>(
          design, data, loss, cfg.solve, train[static_cast<std::size_t>(f)]));
    }
  }
  std::size_t running_best = 0;
  double running_best_risk = kInf;
  bool have_valid = false;
  for (std::size_t j = 0; j < g; ++j) {
    for (int f = 0; f < cfg.folds; ++f) {
      try {
        const HalFit fit =
            cfg.c_grid.empty()
                ? streams[static_cast<std::size_t>(f)]->fit(out.path.fits[j].lambda)
                : fit_constrained(design, data, loss, out.path.fits[j].C,
                                  cfg.solve, train[static_cast<std::size_t>(f)]);
        const Eigen::VectorXd q = fitted_values(design, fit);
        risk_sum[j] += risk(q, data, loss, val[static_cast<std::size_t>(f)]);
        risk_count[j] += 1;
      } catch (const std::exception&) {
        aborted[j] = 1;  // solver failure aborts this grid point
      }
    }
    if (!aborted[j] && risk_count[j] == cfg.folds) {
      const double avg = risk_sum[j] / cfg.folds;
      if (avg < running_best_risk) {
        running_best_risk = avg;
        running_best = j;
      }
      have_valid = true;
    }
    if (cfg.early_stop_patience > 0 && have_valid &&
        j >= running_best + static_cast<std::size_t>(cfg.early_stop_patience)) {
      break;
    }
  }

  SelectorReport& rep = out.report;
  rep.rule = Rule::cv;
  rep.m_selected = dict.order;
  rep.cv_risk_curve.assign(g, kNaN);
  std::size_t best = g;
  double best_risk = kInf;
  for (std::size_t j = 0; j < g; ++j) {
    if (aborted[j] || risk_count[j] != cfg.folds) continue;
    rep.cv_risk_curve[j] = risk_sum[j] / cfg.folds;
    if (rep.cv_risk_curve[j] < best_risk) {
      best_risk = rep.cv_risk_curve[j];
      best = j;
    }
  }
  if (best == g) {
    throw std::runtime_error("cv_select_C: every grid point failed");
  }
  rep.cv_index = best;
  rep.selected_index = best;
  rep.c_cv = out.path.fits[best].C;
  rep.c_selected = rep.c_cv;
  rep.lambda_cv = out.path.fits[best].lambda;
  rep.lambda_selected = rep.lambda_cv;
  fill_base_trace(rep.trace, out.path, rep.cv_risk_curve);
  return out;
}

MSelection cv_select_m(const Dataset& data, const LossKind& loss,
                       const CvConfig& cfg) {
  if (cfg.m_grid.empty()) throw std::invalid_argument("cv_select_m: empty m grid");
  MSelection sel;
  sel.m_grid = cfg.m_grid;
  double best_risk = kInf;
  for (int m : cfg.m_grid) {
    BasisDictionary dict = enumerate_basis(data, m, cfg.caps);
    CvResult r = cv_select_C(data, dict, loss, cfg);
    const double risk_m = r.report.cv_risk_curve[r.report.cv_index];
    if (risk_m < best_risk) {
      best_risk = risk_m;
      sel.m_selected = m;
    }
    sel.per_m.push_back(std::move(r));
    sel.dictionaries.push_back(std::move(dict));
  }
  return sel;
}

namespace {

struct ActiveMins {
  std::vector<double> min_score;   // +inf when no active non-intercept term
  std::vector<double> min_pn_phi;
  bool any_active = false;
  Eigen::VectorXd cv_pointwise_score;
};

ActiveMins active_minima(const PathResult& path, const Eigen::MatrixXd& design,
                         const Dataset& data, std::size_t cv_index) {
  ActiveMins out;
  const std::size_t m = path.fits.size();
  out.min_score.assign(m, kInf);
  out.min_pn_phi.assign(m, kInf);
  const double norm = effective_n(path.fits.empty() ? LossKind{} : path.fits[0].loss,
                                  data.n());
  // P_n phi: frequency-weighted column means for aggregated rows, plain
  // column means otherwise.
  Eigen::VectorXd col_mean(design.cols());
  if (!path.fits.empty() && path.fits[0].loss.frequency_weights) {
    const Eigen::VectorXd& w = path.fits[0].loss.weights;
    col_mean = design.transpose() * w / norm;
  } else {
    col_mean = design.colwise().mean();
  }
  for (std::size_t i = 0; i < m; ++i) {
    const HalFit& fit = path.fits[i];
    const Eigen::VectorXd scores = basis_scores(fit, design, data);
    for (int j : fit.active_set) {
      if (j == fit.intercept_index) continue;
      out.any_active = true;
      out.min_score[i] = std::min(out.min_score[i], std::abs(scores(j)));
      out.min_pn_phi[i] = std::min(out.min_pn_phi[i], col_mean(j));
    }
    if (i == cv_index) {
      const Eigen::VectorXd q = fitted_values(design, fit);
      out.cv_pointwise_score = pointwise_score(q, data, fit.loss);
    }
  }
  return out;
}

}  // namespace

SelectorReport undersmooth_global(const PathResult& path,
                                  const Eigen::MatrixXd& design,
                                  const Dataset& data,
                                  const UndersmoothConfig& cfg,
                                  const SelectorReport& cv_report) {
  if (path.fits.empty()) throw std::invalid_argument("undersmooth_global: empty path");
  const ActiveMins mins = active_minima(path, design, data, cv_report.cv_index);
  if (!mins.any_active) {
    throw std::runtime_error("undersmooth_global: no active basis functions on path");
  }
  const double n_eff = effective_n(path.fits[0].loss, data.n());
  double a = cfg.global_a;
  if (a <= 0.0) {
    // Empirical score scale at the CV fit keeps the threshold equivariant in y.
    a = std::sqrt(mins.cv_pointwise_score.squaredNorm() / n_eff);
  }
  const double threshold = a / (std::sqrt(n_eff) * std::log(n_eff));
  SelectorReport rep =
      walk_path(path, cv_report, Rule::global_score, mins.min_score, threshold,
                /*strict=*/false);
  fill_base_trace(rep.trace, path, cv_report.cv_risk_curve);
  rep.trace.min_active_score = mins.min_score;
  rep.trace.min_active_pn_phi = mins.min_pn_phi;
  return rep;
}

SelectorReport undersmooth_sparsity(const PathResult& path,
                                    const Eigen::MatrixXd& design,
                                    const Dataset& data,
                                    const UndersmoothConfig& cfg,
                                    const SelectorReport& cv_report) {
  if (path.fits.empty()) throw std::invalid_argument("undersmooth_sparsity: empty path");
  const ActiveMins mins = active_minima(path, design, data, cv_report.cv_index);
  if (!mins.any_active) {
    throw std::runtime_error("undersmooth_sparsity: no active basis functions on path");
  }
  const double n_eff = effective_n(path.fits[0].loss, data.n());
  const int k1 = cfg.k1 > 0 ? cfg.k1 : static_cast<int>(data.k());
  const double alpha = 1.0 / (2.0 * (k1 + 2.0));
  const double threshold = cfg.sparse_c * std::pow(n_eff, -0.5 + alpha);
  SelectorReport rep =
      walk_path(path, cv_report, Rule::sparse_support, mins.min_pn_phi, threshold,
                /*strict=*/false);
  fill_base_trace(rep.trace, path, cv_report.cv_risk_curve);
  rep.trace.min_active_score = mins.min_score;
  rep.trace.min_active_pn_phi = mins.min_pn_phi;
  for (std::size_t i = rep.cv_index + 1; i < path.fits.size(); ++i) {
    if (mins.min_pn_phi[i] > mins.min_pn_phi[i - 1] + 1e-12) {
      rep.trace_monotonicity_violated = true;
    }
  }
  return rep;
}

SelectorReport undersmooth_targeted(const PathResult& path,
                                    const Eigen::MatrixXd& design,
                                    const Dataset& data,
                                    const EicEvaluator& evaluator,
                                    const UndersmoothConfig& cfg,
                                    const SelectorReport& cv_report) {
  (void)design;
  (void)data;
  (void)cfg;
  if (path.fits.empty()) throw std::invalid_argument("undersmooth_targeted: empty path");
  const std::size_t m = path.fits.size();
  std::vector<double> pn(m, kNaN), pn_sq(m, kNaN), criterion(m, kInf);
  std::vector<double> thresholds(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const Eigen::VectorXd eic = evaluator(path.fits[i]);
    if (eic.size() == 0) {
      throw std::runtime_error("undersmooth_targeted: empty influence vector");
    }
    const double n = static_cast<double>(eic.size());
    pn[i] = eic.mean();
    pn_sq[i] = eic.squaredNorm() / n;
    thresholds[i] = pn_sq[i] / (std::sqrt(n) * std::log(n));
    criterion[i] = std::abs(pn[i]);
  }
  SelectorReport rep = cv_report;
  rep.rule = Rule::targeted_eic;
  rep.not_met = true;
  rep.selected_index = m - 1;
  for (std::size_t i = rep.cv_index; i < m; ++i) {
    if (criterion[i] < thresholds[i]) {
      rep.selected_index = i;
      rep.not_met = false;
      break;
    }
  }
  rep.threshold = thresholds[rep.selected_index];
  rep.c_selected = path.fits[rep.selected_index].C;
  rep.lambda_selected = path.fits[rep.selected_index].lambda;
  fill_base_trace(rep.trace, path, cv_report.cv_risk_curve);
  rep.trace.pn_dstar = pn;
  rep.trace.pn_dstar_sq = pn_sq;
  return rep;
}

}  // namespace hal
