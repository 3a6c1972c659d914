#include <cmath>

#include "doctest.h"
#include "hal/io.hpp"
#include "hal/lasso.hpp"
#include "hal/rng.hpp"
#include "oracles.hpp"

using namespace hal;

namespace {

struct Instance {
  Dataset data;
  Eigen::MatrixXd design;  // column 0 is the intercept
};

Instance random_instance(RngStream& rng, int n, int p_extra,
                         bool binary_y = false) {
  Eigen::MatrixXd x(n, p_extra);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p_extra; ++j) x(i, j) = rng.normal();
    double lin = 0.3 * x(i, 0);
    if (p_extra > 1) lin -= 0.5 * x(i, 1);
    y(i) = binary_y ? static_cast<double>(rng.bernoulli(expit(lin)))
                    : lin + 0.5 * rng.normal();
  }
  Instance inst{make_dataset(x, y), {}};
  inst.design.resize(n, p_extra + 1);
  inst.design.col(0).setOnes();
  inst.design.rightCols(p_extra) = inst.data.x;
  return inst;
}

}  // namespace

TEST_CASE("null model at and above lambda_max") {
  RngStream rng = make_stream(51, 0, 7);
  const Instance inst = random_instance(rng, 30, 4);
  LossKind sq;
  const double lmax = lambda_max(inst.design, inst.data, sq);
  for (double lam : {lmax, 2.0 * lmax}) {
    const HalFit fit = fit_penalized(inst.design, inst.data, sq, lam);
    CHECK(fit.C == 0.0);
    CHECK(fit.beta(0) == doctest::Approx(inst.data.y.mean()).epsilon(1e-9));
    const KktReport kkt = kkt_check(fit, inst.design, inst.data, 1e-7);
    CHECK(kkt.max_violation <= 1e-7);
  }
  // binomial flavor
  const Instance binst = random_instance(rng, 40, 3, true);
  LossKind bl;
  bl.family = LossFamily::binomial_loglik;
  const double blmax = lambda_max(binst.design, binst.data, bl);
  const HalFit bfit = fit_penalized(binst.design, binst.data, bl, blmax);
  CHECK(bfit.C == 0.0);
}

TEST_CASE("lambda zero matches the normal equations") {
  RngStream rng = make_stream(53, 0, 8);
  const Instance inst = random_instance(rng, 25, 3);
  LossKind sq;
  const HalFit fit = fit_penalized(inst.design, inst.data, sq, 0.0);
  const Eigen::VectorXd beta_ls = oracle::normal_equations(
      inst.design, inst.data.y, Eigen::VectorXd::Ones(25));
  CHECK((fit.beta - beta_ls).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("tiny instance matches a dense grid search") {
  Eigen::MatrixXd design(4, 2);
  design << 1.0, 0.2, 1.0, 1.4, 1.0, -0.7, 1.0, 0.9;
  Eigen::VectorXd y(4);
  y << 0.3, 1.9, -1.1, 1.2;
  const Dataset d =
      make_dataset(Eigen::MatrixXd::Zero(4, 1), y);
  LossKind sq;
  const double lam = 0.07;
  SolveOptions opts;
  opts.penalize_intercept = true;  // both coordinates penalized in the oracle
  const HalFit fit = fit_penalized(design, d, sq, lam, nullptr, opts);

  auto objective = [&](double b0, double b1) {
    double s = 0.0;
    for (int i = 0; i < 4; ++i) {
      const double r = y(i) - b0 * design(i, 0) - b1 * design(i, 1);
      s += 0.5 * r * r;
    }
    return s / 4.0 + lam * (std::abs(b0) + std::abs(b1));
  };
  const Eigen::Vector2d best = oracle::grid_search_2d(objective, -3.0, 3.0);
  CHECK(std::abs(fit.beta(0) - best(0)) <= 1e-5);
  CHECK(std::abs(fit.beta(1) - best(1)) <= 1e-5);
  CHECK(objective(fit.beta(0), fit.beta(1)) <=
        objective(best(0), best(1)) + 1e-6);
}

TEST_CASE("constrained fit endpoints") {
  RngStream rng = make_stream(59, 0, 9);
  const Instance inst = random_instance(rng, 30, 4);
  LossKind sq;

  const HalFit null_fit = fit_constrained(inst.design, inst.data, sq, 0.0);
  CHECK(null_fit.C == 0.0);
  CHECK(null_fit.active_set.size() <= 1);  // intercept only

  const HalFit slack = fit_constrained(inst.design, inst.data, sq, 1e9);
  CHECK(slack.constraint_slack);

  const double target = 0.5 * slack.C;
  const HalFit mid = fit_constrained(inst.design, inst.data, sq, target);
  CHECK(!mid.constraint_slack);
  CHECK(std::abs(mid.C - target) <= std::max(1e-6, 1e-4 * target));
  // the realized norm is the sectional variation norm of the fit
  CHECK(sectional_variation_norm(mid) == doctest::Approx(mid.C).epsilon(1e-12));
  CHECK_THROWS_AS(fit_constrained(inst.design, inst.data, sq, -1.0),
                  std::invalid_argument);
}

TEST_CASE("constrained objective matches the projected-gradient oracle") {
  RngStream rng = make_stream(61, 0, 10);
  for (int rep = 0; rep < 8; ++rep) {
    const int n = 8 + static_cast<int>(rng.next_u64() % 13);
    const int p_extra = 1 + static_cast<int>(rng.next_u64() % 4);
    const Instance inst = random_instance(rng, n, p_extra);
    LossKind sq;
    const HalFit slack = fit_constrained(inst.design, inst.data, sq, 1e9);
    const double c = (0.2 + 0.6 * rng.uniform()) * std::max(slack.C, 0.1);
    const HalFit fit = fit_constrained(inst.design, inst.data, sq, c);
    const auto pg = oracle::projected_gradient_constrained(
        inst.design, inst.data.y, fit.C, 0);
    const Eigen::VectorXd r = inst.data.y - inst.design * fit.beta;
    const double obj = 0.5 * r.squaredNorm() / n;
    CHECK(obj <= pg.objective + 1e-5);
  }
}

TEST_CASE("path basics and KKT along the path") {
  RngStream rng = make_stream(67, 0, 11);
  const Instance inst = random_instance(rng, 40, 5);
  LossKind sq;
  const double lmax = lambda_max(inst.design, inst.data, sq);
  const auto grid = default_lambda_grid(lmax, 25);
  CHECK(grid.front() == doctest::Approx(lmax));
  CHECK(grid.back() == doctest::Approx(lmax * 1e-4).epsilon(1e-9));

  const PathResult path = lasso_path(inst.design, inst.data, sq, grid);
  REQUIRE(path.fits.size() == grid.size());
  CHECK(path.fits.front().C == 0.0);
  for (std::size_t i = 1; i < path.fits.size(); ++i) {
    CHECK(path.fits[i].C >= path.fits[i - 1].C - 1e-8);
  }
  CHECK(!path.c_monotonicity_violated);
  for (const HalFit& fit : path.fits) {
    const KktReport kkt = kkt_check(fit, inst.design, inst.data, 1e-5);
    CHECK(kkt.max_violation <= 1e-8);
    CHECK(fit.max_objective_increase <= 1e-10);
  }

  std::vector<double> bad = {1.0, 1.0};
  CHECK_THROWS_AS(lasso_path(inst.design, inst.data, sq, bad),
                  std::invalid_argument);
}

TEST_CASE("basis scores and kkt sensitivity") {
  RngStream rng = make_stream(71, 0, 12);
  const Instance inst = random_instance(rng, 30, 4);
  LossKind sq;
  const double lmax = lambda_max(inst.design, inst.data, sq);
  HalFit fit = fit_penalized(inst.design, inst.data, sq, 0.3 * lmax);
  REQUIRE(fit.active_set.size() >= 2);

  const Eigen::VectorXd scores = basis_scores(fit, inst.design, inst.data);
  for (int j : fit.active_set) {
    if (j == fit.intercept_index) continue;
    CHECK(std::abs(scores(j)) == doctest::Approx(fit.lambda).epsilon(1e-6));
  }
  for (Eigen::Index j = 0; j < scores.size(); ++j) {
    if (fit.beta(j) == 0.0) {
      CHECK(std::abs(scores(j)) <= fit.lambda + 1e-9);
    }
  }

  const KktReport before = kkt_check(fit, inst.design, inst.data, 1e-5);
  CHECK(before.max_violation <= 1e-8);

  // nudging one active coefficient must surface as a KKT violation
  for (int j : fit.active_set) {
    if (j == fit.intercept_index) continue;
    HalFit bumped = fit;
    bumped.beta(j) += 1e-2;
    const KktReport after = kkt_check(bumped, inst.design, inst.data, 1e-5);
    CHECK(after.max_violation > 1e-4);
    break;
  }

  // unpenalized least squares: every score vanishes
  const HalFit ls = fit_penalized(inst.design, inst.data, sq, 0.0);
  CHECK(basis_scores(ls, inst.design, inst.data).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("score equation holds for sign-balanced active contrasts") {
  RngStream rng = make_stream(73, 0, 13);
  const Instance inst = random_instance(rng, 30, 5);
  LossKind sq;
  const double lmax = lambda_max(inst.design, inst.data, sq);
  const HalFit fit = fit_penalized(inst.design, inst.data, sq, 0.2 * lmax);
  const Eigen::VectorXd scores = basis_scores(fit, inst.design, inst.data);
  std::vector<int> active;
  for (int j : fit.active_set) {
    if (j != fit.intercept_index) active.push_back(j);
  }
  REQUIRE(active.size() >= 2);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd h(static_cast<Eigen::Index>(active.size()));
    double habs_dot = 0.0, abs_sum = 0.0;
    for (Eigen::Index i = 0; i < h.size(); ++i) {
      h(i) = rng.normal();
      habs_dot += h(i) * std::abs(fit.beta(active[static_cast<std::size_t>(i)]));
      abs_sum += std::abs(fit.beta(active[static_cast<std::size_t>(i)]));
    }
    h.array() -= habs_dot / abs_sum;  // now sum h_j |beta_j| = 0
    double lhs = 0.0;
    for (Eigen::Index i = 0; i < h.size(); ++i) {
      const int j = active[static_cast<std::size_t>(i)];
      lhs += h(i) * fit.beta(j) * scores(j);
    }
    CHECK(std::abs(lhs) <= 1e-6 * h.cwiseAbs().maxCoeff() * fit.C);
  }
}

TEST_CASE("binomial fits agree with squared error conventions") {
  RngStream rng = make_stream(79, 0, 14);
  const Instance inst = random_instance(rng, 60, 3, true);
  LossKind bl;
  bl.family = LossFamily::binomial_loglik;
  const double lmax = lambda_max(inst.design, inst.data, bl);
  const PathResult path =
      lasso_path(inst.design, inst.data, bl, default_lambda_grid(lmax, 20));
  CHECK(path.fits.front().C == 0.0);
  for (const HalFit& fit : path.fits) {
    CHECK(fit.max_objective_increase <= 1e-9);
    const KktReport kkt = kkt_check(fit, inst.design, inst.data, 1e-5);
    CHECK(kkt.max_violation <= 5e-5);
  }
}

TEST_CASE("row subsets fit only the requested rows") {
  RngStream rng = make_stream(83, 0, 15);
  const Instance inst = random_instance(rng, 40, 2);
  LossKind sq;
  std::vector<int> rows;
  for (int i = 0; i < 20; ++i) rows.push_back(i);
  const HalFit sub = fit_penalized(inst.design, inst.data, sq, 0.0, nullptr,
                                   SolveOptions{}, rows);
  Eigen::MatrixXd xr = inst.design.topRows(20);
  Eigen::VectorXd yr = inst.data.y.head(20);
  const Eigen::VectorXd ls =
      oracle::normal_equations(xr, yr, Eigen::VectorXd::Ones(20));
  CHECK((sub.beta - ls).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("fit serialization round trips") {
  RngStream rng = make_stream(89, 0, 16);
  const Instance inst = random_instance(rng, 30, 4);
  LossKind sq;
  const double lmax = lambda_max(inst.design, inst.data, sq);
  const HalFit fit = fit_penalized(inst.design, inst.data, sq, 0.25 * lmax);
  const std::string json = fit_to_json(fit);
  const HalFit back = fit_from_json(json, fit.beta.size());
  CHECK((back.beta - fit.beta).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.lambda == fit.lambda);
  CHECK(back.C == fit.C);
  CHECK(back.active_set == fit.active_set);
}
