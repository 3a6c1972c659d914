#include <algorithm>
#include <cmath>
#include <map>

#include "doctest.h"
#include "hal/io.hpp"
#include "hal/rng.hpp"
#include "hal/select.hpp"

using namespace hal;

namespace {

Dataset step_data(int n, std::uint64_t seed, double signal, double noise_sd) {
  RngStream rng = make_stream(seed, 0, 100);
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.uniform();
    y(i) = signal * (x(i, 0) >= 0.5 ? 1.0 : 0.0) + noise_sd * rng.normal();
  }
  return make_dataset(x, y);
}

}  // namespace

TEST_CASE("vfold split shapes and determinism") {
  const auto loo = vfold_split(10, 10, 3);
  std::vector<int> counts(10, 0);
  for (int f : loo) counts[static_cast<std::size_t>(f)]++;
  for (int c : counts) CHECK(c == 1);

  CHECK(vfold_split(57, 5, 9) == vfold_split(57, 5, 9));
  CHECK(vfold_split(57, 5, 9) != vfold_split(57, 5, 10));

  const auto split = vfold_split(103, 10, 1);
  std::map<int, int> hist;
  for (int f : split) hist[f]++;
  int tens = 0, elevens = 0;
  for (const auto& [f, c] : hist) {
    if (c == 10) ++tens;
    if (c == 11) ++elevens;
  }
  CHECK(tens == 7);
  CHECK(elevens == 3);

  CHECK_THROWS_AS(vfold_split(4, 5, 0), std::invalid_argument);
  CHECK_THROWS_AS(vfold_split(10, 1, 0), std::invalid_argument);
}

TEST_CASE("cv_select_C basics") {
  const Dataset d = step_data(60, 5, 2.0, 0.3);
  const BasisDictionary dict = enumerate_basis(d, 0, {1, 0});
  LossKind sq;
  CvConfig cfg;
  cfg.folds = 5;
  cfg.grid_size = 30;
  cfg.seed = 7;
  const CvResult res = cv_select_C(d, dict, sq, cfg);
  CHECK(res.report.cv_risk_curve.size() == 30);
  CHECK(res.path.fits.size() == 30);
  CHECK(res.report.c_cv == res.path.fits[res.report.cv_index].C);
  CHECK(res.report.c_selected == res.report.c_cv);

  // single grid element selects that element
  CvConfig single = cfg;
  single.lambda_grid = {res.path.fits[10].lambda};
  const CvResult one = cv_select_C(d, dict, sq, single);
  CHECK(one.report.cv_index == 0);
  CHECK(one.report.cv_risk_curve.size() == 1);
}

TEST_CASE("pure-noise outcome selects a near-null constraint") {
  RngStream rng = make_stream(13, 0, 101);
  Eigen::MatrixXd x(90, 1);
  Eigen::VectorXd y(90);
  for (int i = 0; i < 90; ++i) {
    x(i, 0) = rng.uniform();
    y(i) = rng.normal();
  }
  const Dataset d = make_dataset(x, y);
  const BasisDictionary dict = enumerate_basis(d, 0, {1, 0});
  LossKind sq;
  CvConfig cfg;
  cfg.folds = 5;
  cfg.grid_size = 40;
  cfg.seed = 2;
  const CvResult res = cv_select_C(d, dict, sq, cfg);
  const double c_max = res.path.fits.back().C;
  CHECK(res.report.c_cv <= 0.1 * c_max);
}

TEST_CASE("cv agrees on the truth's risk when the truth is in the model") {
  // Deterministic design so the jump sits exactly on an observed knot.
  const int n = 400;
  const double sd = 0.1;
  RngStream rng = make_stream(11, 0, 102);
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  Eigen::VectorXd truth_fit(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = (i + 0.5) / n;
    truth_fit(i) = 2.0 * (x(i, 0) >= x(n / 2, 0) ? 1.0 : 0.0);
    y(i) = truth_fit(i) + sd * rng.normal();
  }
  const Dataset d = make_dataset(x, y);
  const BasisDictionary dict = enumerate_basis(d, 0, {1, 0});
  LossKind sq;
  CvConfig cfg;
  cfg.folds = 5;
  cfg.grid_size = 50;
  cfg.seed = 3;
  const CvResult res = cv_select_C(d, dict, sq, cfg);

  // grid point whose realized C is closest to the truth's norm C* = 2
  std::size_t at = 0;
  double best = 1e300;
  for (std::size_t j = 0; j < res.path.fits.size(); ++j) {
    if (std::isnan(res.report.cv_risk_curve[j])) continue;
    const double gap = std::abs(res.path.fits[j].C - 2.0);
    if (gap < best) {
      best = gap;
      at = j;
    }
  }
  Eigen::VectorXd losses(d.n());
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    const double r = d.y(i) - truth_fit(i);
    losses(i) = 0.5 * r * r;
  }
  const double truth_risk = losses.mean();
  const double se = std::sqrt((losses.array() - truth_risk).square().sum() /
                              (d.n() - 1.0)) /
                    std::sqrt(static_cast<double>(d.n()));
  CHECK(std::abs(res.report.cv_risk_curve[at] - truth_risk) <= 2.0 * se + 1e-3);
}

namespace {

// Piecewise-constant truth on a discrete support: both classes can hit the
// support values exactly, so the order-0 class wins the risk vote.
Dataset discrete_saw_data(int n, std::uint64_t seed) {
  RngStream rng = make_stream(seed, 0, 105);
  const int levels = 12;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const int lv = static_cast<int>(rng.next_u64() % levels);
    x(i, 0) = lv / static_cast<double>(levels);
    y(i) = (lv % 2 == 0 ? 0.0 : 2.0) + 0.25 * rng.normal();
  }
  return make_dataset(x, y);
}

}  // namespace

TEST_CASE("cv_select_m returns the loss-minimizing order") {
  LossKind sq;
  CvConfig cfg;
  cfg.folds = 5;
  cfg.grid_size = 25;
  cfg.caps = {1, 0};

  // m_grid with a single entry returns it
  cfg.m_grid = {0};
  const Dataset d0 = step_data(100, 21, 1.5, 0.25);
  const MSelection only = cv_select_m(d0, sq, cfg);
  CHECK(only.m_selected == 0);
  CHECK(only.per_m.size() == 1);

  // the selection is exactly the argmin of the per-order best risks
  cfg.m_grid = {0, 1, 2};
  cfg.seed = 4;
  const Dataset d1 = step_data(120, 33, 1.5, 0.3);
  const MSelection sel = cv_select_m(d1, sq, cfg);
  CHECK(sel.per_m.size() == 3);
  double best = 1e300;
  int best_m = -1;
  for (std::size_t i = 0; i < sel.per_m.size(); ++i) {
    const SelectorReport& r = sel.per_m[i].report;
    if (r.cv_risk_curve[r.cv_index] < best) {
      best = r.cv_risk_curve[r.cv_index];
      best_m = sel.m_grid[i];
    }
  }
  CHECK(sel.m_selected == best_m);
}

TEST_CASE("cv_select_m favors order 0 on a piecewise-constant truth") {
  LossKind sq;
  CvConfig cfg;
  cfg.folds = 5;
  cfg.grid_size = 25;
  cfg.caps = {1, 0};
  cfg.m_grid = {0, 1};
  int wins = 0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    const Dataset d = discrete_saw_data(240, 500 + static_cast<std::uint64_t>(s));
    cfg.seed = static_cast<std::uint64_t>(s);
    const MSelection sel = cv_select_m(d, sq, cfg);
    CHECK(sel.per_m.size() == 2);
    if (sel.m_selected == 0) ++wins;
  }
  CHECK(wins > seeds / 2);
}

namespace {

struct Undersmoothed {
  CvResult cv;
  Dataset data;
};

Undersmoothed fit_for_selectors(int n = 150) {
  Undersmoothed u{{}, step_data(n, 77, 1.0, 0.4)};
  const BasisDictionary dict = enumerate_basis(u.data, 0, {1, 0});
  LossKind sq;
  CvConfig cfg;
  cfg.folds = 5;
  cfg.grid_size = 40;
  cfg.seed = 5;
  u.cv = cv_select_C(u.data, dict, sq, cfg);
  return u;
}

}  // namespace

TEST_CASE("global selector walk and edge thresholds") {
  const Undersmoothed u = fit_for_selectors();

  UndersmoothConfig inf_cfg;
  inf_cfg.rule = Rule::global_score;
  inf_cfg.global_a = 1e300;  // threshold effectively +inf
  const SelectorReport at_cv = undersmooth_global(u.cv.path, u.cv.design,
                                                  u.data, inf_cfg, u.cv.report);
  CHECK(at_cv.selected_index == at_cv.cv_index);
  CHECK(at_cv.c_selected == at_cv.c_cv);
  CHECK(!at_cv.not_met);

  UndersmoothConfig zero_cfg;
  zero_cfg.rule = Rule::global_score;
  zero_cfg.global_a = 1e-300;  // threshold effectively 0
  const SelectorReport never = undersmooth_global(u.cv.path, u.cv.design,
                                                  u.data, zero_cfg, u.cv.report);
  CHECK(never.not_met);
  CHECK(never.selected_index == u.cv.path.fits.size() - 1);

  UndersmoothConfig def;
  def.rule = Rule::global_score;
  const SelectorReport rep =
      undersmooth_global(u.cv.path, u.cv.design, u.data, def, u.cv.report);
  CHECK(rep.c_selected >= rep.c_cv);
  CHECK(rep.trace.min_active_score.size() == u.cv.path.fits.size());
  CHECK(rep.trace.lambda.size() == u.cv.path.fits.size());
}

TEST_CASE("sparsity selector threshold and trace") {
  const Undersmoothed u = fit_for_selectors();
  UndersmoothConfig cfg;
  cfg.rule = Rule::sparse_support;
  cfg.k1 = 3;
  const SelectorReport rep =
      undersmooth_sparsity(u.cv.path, u.cv.design, u.data, cfg, u.cv.report);
  // alpha(3) = 1/10, threshold = c * n^{-2/5}
  const double n = static_cast<double>(u.data.n());
  CHECK(rep.threshold == doctest::Approx(std::pow(n, -0.4)).epsilon(1e-12));
  CHECK(rep.c_selected >= rep.c_cv);

  UndersmoothConfig huge;
  huge.rule = Rule::sparse_support;
  huge.sparse_c = 1e300;
  const SelectorReport at_cv =
      undersmooth_sparsity(u.cv.path, u.cv.design, u.data, huge, u.cv.report);
  CHECK(at_cv.selected_index == at_cv.cv_index);
}

TEST_CASE("targeted selector walk") {
  const Undersmoothed u = fit_for_selectors();
  UndersmoothConfig cfg;

  // A mean-zero influence vector satisfies the bound immediately.
  int calls = 0;
  EicEvaluator balanced = [&](const HalFit&) {
    ++calls;
    Eigen::VectorXd eic(u.data.n());
    for (Eigen::Index i = 0; i < eic.size(); ++i) {
      eic(i) = i % 2 == 0 ? 1.0 : -1.0;
    }
    return eic;
  };
  const SelectorReport at_cv = undersmooth_targeted(
      u.cv.path, u.cv.design, u.data, balanced, cfg, u.cv.report);
  CHECK(at_cv.selected_index == at_cv.cv_index);
  CHECK(!at_cv.not_met);
  CHECK(calls == static_cast<int>(u.cv.path.fits.size()));
  CHECK(at_cv.trace.pn_dstar.size() == u.cv.path.fits.size());

  // A constant influence vector never satisfies the strict bound.
  EicEvaluator constant = [&](const HalFit&) {
    return Eigen::VectorXd::Constant(u.data.n(), 0.5).eval();
  };
  const SelectorReport never = undersmooth_targeted(
      u.cv.path, u.cv.design, u.data, constant, cfg, u.cv.report);
  CHECK(never.not_met);
  CHECK(never.c_selected == u.cv.path.fits.back().C);
}

TEST_CASE("selector reports are bit-identical across repeated runs") {
  const Dataset d = step_data(120, 99, 1.0, 0.5);
  const BasisDictionary dict = enumerate_basis(d, 0, {1, 0});
  LossKind sq;
  CvConfig cfg;
  cfg.folds = 4;
  cfg.grid_size = 30;
  cfg.seed = 17;
  const CvResult a = cv_select_C(d, dict, sq, cfg);
  const CvResult b = cv_select_C(d, dict, sq, cfg);
  CHECK(selector_report_to_json(a.report) == selector_report_to_json(b.report));

  UndersmoothConfig uc;
  uc.rule = Rule::global_score;
  const SelectorReport ga =
      undersmooth_global(a.path, a.design, d, uc, a.report);
  const SelectorReport gb =
      undersmooth_global(b.path, b.design, d, uc, b.report);
  CHECK(selector_report_to_json(ga) == selector_report_to_json(gb));
}

TEST_CASE("early stopping keeps the argmin") {
  const Dataset d = step_data(150, 31, 1.2, 0.4);
  const BasisDictionary dict = enumerate_basis(d, 0, {1, 0});
  LossKind sq;
  CvConfig full;
  full.folds = 5;
  full.grid_size = 40;
  full.seed = 23;
  CvConfig stopped = full;
  stopped.early_stop_patience = 12;
  const CvResult a = cv_select_C(d, dict, sq, full);
  const CvResult b = cv_select_C(d, dict, sq, stopped);
  CHECK(a.report.cv_index == b.report.cv_index);
  CHECK(a.report.c_cv == b.report.c_cv);
}

TEST_CASE("c-grid mode honors the constraint scale") {
  const Dataset d = step_data(80, 41, 1.5, 0.3);
  const BasisDictionary dict = enumerate_basis(d, 0, {1, 0});
  LossKind sq;
  CvConfig cfg;
  cfg.folds = 4;
  cfg.seed = 1;
  cfg.c_grid = {0.25, 0.75, 1.5, 3.0};
  const CvResult res = cv_select_C(d, dict, sq, cfg);
  CHECK(res.path.fits.size() == 4);
  CHECK(res.report.cv_risk_curve.size() == 4);
  for (std::size_t j = 1; j < res.path.fits.size(); ++j) {
    CHECK(res.path.fits[j].C >= res.path.fits[j - 1].C - 1e-6);
  }
}

TEST_CASE("undersmoothing without active basis functions is an error") {
  // A constant outcome keeps every penalized coefficient at zero along the
  // whole path.
  RngStream rng = make_stream(3, 0, 106);
  Eigen::MatrixXd x(40, 1);
  for (int i = 0; i < 40; ++i) x(i, 0) = rng.uniform();
  const Dataset d = make_dataset(x, Eigen::VectorXd::Constant(40, 1.5));
  const BasisDictionary dict = enumerate_basis(d, 0, {1, 0});
  LossKind sq;
  CvConfig cfg;
  cfg.folds = 4;
  cfg.grid_size = 10;
  const CvResult res = cv_select_C(d, dict, sq, cfg);
  UndersmoothConfig uc;
  uc.rule = Rule::global_score;
  CHECK_THROWS_AS(undersmooth_global(res.path, res.design, d, uc, res.report),
                  std::runtime_error);
  CHECK_THROWS_AS(undersmooth_sparsity(res.path, res.design, d, uc, res.report),
                  std::runtime_error);
}

TEST_CASE("rule names round trip") {
  for (Rule rule : {Rule::cv, Rule::global_score, Rule::sparse_support,
                    Rule::targeted_eic}) {
    CHECK(rule_from_name(rule_name(rule)) == rule);
  }
  CHECK_THROWS_AS(rule_from_name("nope"), std::invalid_argument);
}
