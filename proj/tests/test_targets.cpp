#include <cmath>

#include "doctest.h"
#include "hal/rng.hpp"
#include "hal/sim.hpp"
#include "hal/targets.hpp"
#include "oracles.hpp"

using namespace hal;

TEST_CASE("eic_ate arithmetic") {
  const auto ones = Eigen::VectorXd::Constant(1, 1.0);
  const auto halves = Eigen::VectorXd::Constant(1, 0.5);
  const Eigen::VectorXd eic =
      eic_ate(halves, halves, halves, ones, ones, 0.5);
  CHECK(eic(0) == doctest::Approx(1.0).epsilon(1e-12));

  const auto zeros = Eigen::VectorXd::Constant(1, 0.0);
  const Eigen::VectorXd control =
      eic_ate(halves, halves, halves, zeros, ones, 0.2);
  CHECK(control(0) == doctest::Approx(0.3).epsilon(1e-12));

  CHECK_THROWS_AS(eic_ate(halves, halves, zeros, ones, ones, 0.5),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      eic_ate(halves, halves, halves, ones, Eigen::VectorXd::Zero(2), 0.5),
      std::invalid_argument);
}

TEST_CASE("eic_ate is mean zero at the truth") {
  const int n = 40000;
  const Dataset d = dgp_ate(n, 4242, 0);
  Eigen::VectorXd qbar(n), gbar(n);
  for (int i = 0; i < n; ++i) {
    const double lin = d.x(i, 0) - 2.0 * d.x(i, 0) * d.x(i, 1);
    qbar(i) = expit(lin);
    gbar(i) = expit(lin);
  }
  const Eigen::VectorXd eic = eic_ate(qbar, qbar, gbar, *d.a, d.y, 0.5);
  const double sd = std::sqrt(eic.squaredNorm() / n);
  CHECK(std::abs(eic.mean()) <= 4.0 * sd / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("wald_ci conventions") {
  Eigen::VectorXd eic(100);
  for (int i = 0; i < 100; ++i) eic(i) = i % 2 == 0 ? 1.0 : -1.0;
  const WaldInterval w = wald_ci(0.0, eic, 0.95);
  CHECK(w.se == doctest::Approx(0.1 * std::sqrt(100.0 / 99.0)).epsilon(1e-12));
  CHECK(w.hi == doctest::Approx(1.959964 * w.se).epsilon(1e-9));
  CHECK(w.lo == doctest::Approx(-1.959964 * w.se).epsilon(1e-9));

  const WaldInterval w90 = wald_ci(0.0, eic, 0.90);
  CHECK(w90.hi < w.hi);

  CHECK_THROWS_AS(wald_ci(0.0, Eigen::VectorXd::Constant(5, 2.0), 0.95),
                  std::invalid_argument);
  CHECK_THROWS_AS(wald_ci(0.0, eic, 1.5), std::invalid_argument);
}

TEST_CASE("fit_ate on a constant outcome degenerates cleanly") {
  RngStream rng = make_stream(7, 0, 200);
  const int n = 80;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y = Eigen::VectorXd::Constant(n, 0.7);
  Eigen::VectorXd a(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.uniform();
    x(i, 1) = static_cast<double>(rng.bernoulli(0.5));
    a(i) = static_cast<double>(rng.bernoulli(0.5));
  }
  const Dataset d = make_dataset(x, y, a);
  AteConfig cfg;
  cfg.cv.folds = 4;
  cfg.cv.grid_size = 15;
  const AteEstimate est = fit_ate(d, cfg);
  CHECK(est.psi == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(est.eic.cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(est.se == 0.0);
}

TEST_CASE("fit_ate input validation") {
  Eigen::MatrixXd x(4, 1);
  x << 0.1, 0.2, 0.3, 0.4;
  Eigen::VectorXd y(4);
  y << 1, 2, 3, 4;
  const Dataset no_a = make_dataset(x, y);
  CHECK_THROWS_AS(fit_ate(no_a, AteConfig{}), std::invalid_argument);

  const Dataset all_one =
      make_dataset(x, y, Eigen::VectorXd::Constant(4, 1.0));
  CHECK_THROWS_AS(fit_ate(all_one, AteConfig{}), std::invalid_argument);
}

TEST_CASE("fit_ate positivity screen names offending rows") {
  const Dataset d = dgp_ate(120, 55, 0);
  AteConfig cfg;
  cfg.cv.folds = 4;
  cfg.cv.grid_size = 15;
  cfg.caps = {2, 30};
  // An absurdly tight truncation band with no budget must trip the screen.
  cfg.gmin = 0.49;
  cfg.truncation_budget = 0.0;
  try {
    fit_ate(d, cfg);
    FAIL("expected a positivity error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("positivity") != std::string::npos);
    CHECK(std::string(e.what()).find("offenders") != std::string::npos);
  }
}

TEST_CASE("empirical-measure component is solved exactly") {
  const Dataset d = dgp_ate(150, 99, 0);
  AteConfig cfg;
  cfg.cv.folds = 4;
  cfg.cv.grid_size = 25;
  cfg.caps = {2, 40};
  const AteEstimate est = fit_ate(d, cfg);
  // P_n{Qbar_n(1,.) - psi_n} = 0 to machine precision
  const double pn_d2 = (est.qbar.array() - est.psi).mean();
  CHECK(std::abs(pn_d2) <= 1e-14);
  // reported P_n D* equals mean(eic) exactly
  CHECK(est.diagnostics.sqrt_n_pn_dstar ==
        std::sqrt(static_cast<double>(d.n())) * est.eic.mean());
  // eic assembles from the stored components
  const Eigen::VectorXd rebuilt =
      eic_ate(est.qbar, est.qbar, est.gbar, *d.a, d.y, est.psi);
  CHECK((rebuilt - est.eic).cwiseAbs().maxCoeff() == 0.0);
  // truncation respected
  CHECK(est.gbar.minCoeff() >= cfg.gmin);
  CHECK(est.gbar.maxCoeff() <= 1.0 - cfg.gmin);
  // undersmoothing never selects below the CV constraint
  CHECK(est.diagnostics.c_selected >= est.diagnostics.c_cv - 1e-12);
}

TEST_CASE("psi_density closed forms") {
  HazardDensity uniform;
  uniform.binwidth = 0.25;
  uniform.bin_edges = {0.0, 0.25, 0.5, 0.75, 1.0};
  uniform.hazard = {0.25, 1.0 / 3.0, 0.5, 1.0};
  uniform.density = {1.0, 1.0, 1.0, 1.0};
  CHECK(psi_density(uniform) == doctest::Approx(1.0).epsilon(1e-12));

  HazardDensity spike;
  spike.binwidth = 0.1;
  spike.bin_edges = {0.0, 0.1, 0.2};
  spike.hazard = {1.0, 0.0};
  spike.density = {10.0, 0.0};
  CHECK(psi_density(spike) == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("eic_density basics and truth oracle") {
  HazardDensity uniform;
  uniform.binwidth = 0.5;
  uniform.bin_edges = {0.0, 0.5, 1.0};
  uniform.hazard = {0.5, 1.0};
  uniform.density = {1.0, 1.0};
  const std::vector<double> obs = {0.2, 0.7, 2.0};
  const Eigen::VectorXd eic = eic_density(obs, uniform, 1.0);
  CHECK(eic(0) == 0.0);
  CHECK(eic(1) == 0.0);
  CHECK(eic(2) == doctest::Approx(-2.0));  // outside the range: density 0

  // With the binned truth plugged in, a fresh draw has near-zero mean.
  const double sigma = std::sqrt(5.0 / 3.0);
  const int bins = 400;
  const double lo = -4.0 - 8.0 * sigma, hi = -4.0 + 8.0 * sigma;
  const double w = (hi - lo) / bins;
  HazardDensity truth;
  truth.binwidth = w;
  truth.bin_edges.resize(bins + 1);
  for (int b = 0; b <= bins; ++b) truth.bin_edges[b] = lo + b * w;
  truth.density.resize(bins);
  truth.hazard.assign(bins, 0.0);
  for (int b = 0; b < bins; ++b) {
    const double mid = lo + (b + 0.5) * w;
    truth.density[b] = normal_pdf((mid + 4.0) / sigma) / sigma;
  }
  double psi_t = psi_density(truth);
  const std::vector<double> fresh = dgp_density(20000, 31, 0);
  const Eigen::VectorXd te = eic_density(fresh, truth, psi_t);
  const double sd = std::sqrt(te.squaredNorm() / 20000.0);
  CHECK(std::abs(te.mean()) <= 4.0 * sd / std::sqrt(20000.0) + 1e-3);
}

TEST_CASE("fit_density_hal validation and degenerate data") {
  const std::vector<double> too_few(20, 1.0);
  DensityConfig cfg;
  cfg.cv.folds = 4;
  CHECK_THROWS_AS(fit_density_hal(too_few, 80, cfg), std::invalid_argument);

  std::vector<double> o(60, 0.0);
  CHECK_THROWS_AS(fit_density_hal(o, 5, cfg), std::invalid_argument);

  DensityConfig budget = cfg;
  budget.max_long_rows = 100;
  CHECK_THROWS_AS(fit_density_hal(o, 80, budget), std::invalid_argument);

  // all observations share one value: the mass concentrates in one bin
  cfg.cv.grid_size = 15;
  const DensityFitResult res = fit_density_hal(o, 12, cfg);
  double mass = 0.0, total = 0.0;
  for (double dv : res.density.density) total += dv * res.density.binwidth;
  for (std::size_t b = 0; b < res.density.density.size(); ++b) {
    mass = std::max(mass, res.density.density[b] * res.density.binwidth);
  }
  CHECK(total >= 0.99);
  CHECK(mass >= 0.99);
}

TEST_CASE("hazard normalization identity") {
  const std::vector<double> o = dgp_density(400, 17, 0);
  DensityConfig cfg;
  cfg.cv.folds = 4;
  cfg.cv.grid_size = 30;
  const DensityFitResult res = fit_density_hal(o, 60, cfg);
  for (const HazardDensity* d : {&res.density, &res.density_cv}) {
    double total = 0.0;
    for (double v : d->density) total += v * d->binwidth;
    CHECK(total <= 1.0 + 1e-12);
    CHECK(total + d->shortfall == doctest::Approx(1.0).epsilon(1e-9));
    for (double v : d->density) CHECK(v >= 0.0);
  }
  CHECK(res.estimate.diagnostics.sqrt_n_pn_dstar ==
        doctest::Approx(std::sqrt(400.0) * res.estimate.eic.mean())
            .epsilon(1e-12));
}

TEST_CASE("density estimate approaches the truth in L1 at n = 5000") {
  const std::vector<double> o = dgp_density(5000, 2024, 0);
  DensityConfig cfg;
  cfg.cv.folds = 5;
  cfg.cv.early_stop_patience = 12;
  const DensityFitResult res = fit_density_hal(o, 80, cfg);

  const double sigma = std::sqrt(5.0 / 3.0);
  auto p0 = [&](double v) { return normal_pdf((v + 4.0) / sigma) / sigma; };
  // L1 distance: piecewise quadrature inside the binned range plus the
  // true mass outside it.
  double l1 = 0.0;
  const HazardDensity& den = res.density;
  for (std::size_t b = 0; b < den.density.size(); ++b) {
    const double a = den.bin_edges[b], h = den.bin_edges[b + 1];
    const double db = den.density[b];
    l1 += oracle::simpson([&](double v) { return std::abs(db - p0(v)); }, a, h,
                          64);
  }
  const double lo = den.bin_edges.front(), hi = den.bin_edges.back();
  l1 += oracle::simpson(p0, lo - 30.0, lo) + oracle::simpson(p0, hi, hi + 30.0);
  CHECK(l1 <= 0.15);
}
