#include "hal/sim.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "hal/io.hpp"
#include "hal/plots.hpp"
#include "hal/rng.hpp"
#include "json.hpp"

namespace hal {

namespace {

constexpr std::uint64_t kPurposeZ = 1;
constexpr std::uint64_t kPurposeW2 = 2;
constexpr std::uint64_t kPurposeA = 3;
constexpr std::uint64_t kPurposeEps = 4;
constexpr std::uint64_t kPurposeO = 5;
constexpr std::uint64_t kPurposeW1 = 6;
constexpr std::uint64_t kPurposeY = 7;

RngStream stream_for(std::uint64_t base_seed, std::uint64_t replicate,
                     std::uint64_t purpose, int n) {
  // n is folded into the purpose so per-n runs are independent.
  return make_stream(base_seed, replicate,
                     mix64(purpose) ^ static_cast<std::uint64_t>(n));
}

// --- quadrature -----------------------------------------------------------

struct GaussLegendre {
  std::vector<double> nodes;    // on (-1, 1)
  std::vector<double> weights;
};

GaussLegendre gauss_legendre(int n) {
  GaussLegendre gl;
  gl.nodes.resize(static_cast<std::size_t>(n));
  gl.weights.resize(static_cast<std::size_t>(n));
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    gl.nodes[static_cast<std::size_t>(i)] = -x;
    gl.nodes[static_cast<std::size_t>(n - 1 - i)] = x;
    gl.weights[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - x * x) * pp * pp);
    gl.weights[static_cast<std::size_t>(n - 1 - i)] =
        gl.weights[static_cast<std::size_t>(i)];
  }
  return gl;
}

template <typename F>
double integrate(const GaussLegendre& gl, double a, double b, F f) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double s = 0.0;
  for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
    s += gl.weights[i] * f(mid + half * gl.nodes[i]);
  }
  return s * half;
}

// E f(Z) for Z ~ Beta(0.85, 0.85). The endpoint singularities z^(a-1) and
// (1-z)^(b-1) are absorbed by the substitutions z = u^(1/a) and
// z = 1 - v^(1/b) on the two halves.
template <typename F>
double beta_expect(F f) {
  const double a = 0.85, b = 0.85;
  static const GaussLegendre gl = gauss_legendre(200);
  const double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  const double norm = std::exp(lbeta);
  const double i1 = integrate(gl, 0.0, std::pow(0.5, a), [&](double u) {
    const double z = std::pow(u, 1.0 / a);
    return std::pow(1.0 - z, b - 1.0) * f(z) / a;
  });
  const double i2 = integrate(gl, 0.0, std::pow(0.5, b), [&](double v) {
    const double z = 1.0 - std::pow(v, 1.0 / b);
    return std::pow(z, a - 1.0) * f(z) / b;
  });
  return (i1 + i2) / norm;
}

}  // namespace

std::string dgp_name(DgpKind kind) {
  switch (kind) {
    case DgpKind::ate_sim61: return "ate_sim61";
    case DgpKind::density_sim62: return "density_sim62";
    case DgpKind::custom_null: return "custom_null";
  }
  return "ate_sim61";
}

DgpKind dgp_from_name(const std::string& name) {
  if (name == "ate_sim61") return DgpKind::ate_sim61;
  if (name == "density_sim62") return DgpKind::density_sim62;
  if (name == "custom_null") return DgpKind::custom_null;
  throw std::invalid_argument("unknown dgp: " + name);
}

Dataset dgp_ate(int n, std::uint64_t base_seed, std::uint64_t replicate) {
  if (n < 1) throw std::invalid_argument("dgp_ate: n >= 1");
  RngStream sz = stream_for(base_seed, replicate, kPurposeZ, n);
  RngStream sw2 = stream_for(base_seed, replicate, kPurposeW2, n);
  RngStream sa = stream_for(base_seed, replicate, kPurposeA, n);
  RngStream se = stream_for(base_seed, replicate, kPurposeEps, n);
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n), a(n);
  for (int i = 0; i < n; ++i) {
    const double w1 = 4.0 * sz.beta(0.85, 0.85) - 2.0;
    const double w2 = static_cast<double>(sw2.bernoulli(0.5));
    const double lin = w1 - 2.0 * w1 * w2;
    const double truth = expit(lin);
    x(i, 0) = w1;
    x(i, 1) = w2;
    a(i) = static_cast<double>(sa.bernoulli(truth));
    y(i) = truth + se.normal(0.0, 0.5);  // variance 0.25
  }
  return make_dataset(std::move(x), std::move(y), std::move(a), {"w1", "w2"});
}

std::vector<double> dgp_density(int n, std::uint64_t base_seed,
                                std::uint64_t replicate) {
  if (n < 1) throw std::invalid_argument("dgp_density: n >= 1");
  RngStream s = stream_for(base_seed, replicate, kPurposeO, n);
  const double sd = std::sqrt(5.0 / 3.0);
  std::vector<double> o(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    o[static_cast<std::size_t>(i)] = s.normal(-4.0, sd);
  }
  return o;
}

Dataset dgp_null(int n, std::uint64_t base_seed, std::uint64_t replicate) {
  if (n < 1) throw std::invalid_argument("dgp_null: n >= 1");
  RngStream sw1 = stream_for(base_seed, replicate, kPurposeW1, n);
  RngStream sw2 = stream_for(base_seed, replicate, kPurposeW2, n);
  RngStream sa = stream_for(base_seed, replicate, kPurposeA, n);
  RngStream sy = stream_for(base_seed, replicate, kPurposeY, n);
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n), a(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = sw1.uniform();
    x(i, 1) = static_cast<double>(sw2.bernoulli(0.5));
    a(i) = static_cast<double>(sa.bernoulli(0.5));
    y(i) = sy.normal();
  }
  return make_dataset(std::move(x), std::move(y), std::move(a), {"w1", "w2"});
}

TrueValues true_values(DgpKind kind) {
  TrueValues t;
  switch (kind) {
    case DgpKind::ate_sim61: {
      // psi0 = E expit(W1 - 2 W1 W2) = 1/2 by expit(w) + expit(-w) = 1.
      t.psi0 = 0.5;
      const double sigma2 = 0.25;
      const double e_cosh = beta_expect([](double z) {
        return std::cosh(4.0 * z - 2.0);
      });
      const double e_qdev = beta_expect([](double z) {
        const double d = expit(4.0 * z - 2.0) - 0.5;
        return d * d;
      });
      // Var D* = sigma^2 E[1/Gbar0] + Var Qbar0(W); averaging over W2 gives
      // E[1/Gbar0 | W1] = 1 + cosh(W1) and symmetric Qbar deviations.
      t.efficiency_bound = sigma2 * (1.0 + e_cosh) + e_qdev;
      break;
    }
    case DgpKind::density_sim62: {
      const double sigma2 = 5.0 / 3.0;
      const double sigma = std::sqrt(sigma2);
      t.density_sigma2 = sigma2;
      t.psi0 = 1.0 / (2.0 * sigma * std::sqrt(M_PI));
      const double p3 = 1.0 / (2.0 * std::sqrt(3.0) * M_PI * sigma2);
      t.efficiency_bound = 4.0 * (p3 - t.psi0 * t.psi0);
      t.psi0_alt = 1.0 / (2.0 * (5.0 / 3.0) * std::sqrt(M_PI));
      break;
    }
    case DgpKind::custom_null: {
      t.psi0 = 0.0;
      // D* = 2 A Y under Gbar = 1/2, Qbar = 0.
      t.efficiency_bound = 2.0;
      break;
    }
  }
  return t;
}

McConfig default_mc_config(DgpKind kind) {
  McConfig cfg;
  cfg.kind = kind;
  cfg.threads = 1;
  cfg.ate.undersmooth.rule = Rule::targeted_eic;
  cfg.ate.cv.folds = 5;
  cfg.ate.cv.grid_size = 60;
  cfg.ate.cv.early_stop_patience = 12;
  cfg.ate.caps.max_interaction_degree = 2;
  cfg.ate.caps.max_knots_per_subset = 100;
  cfg.density.undersmooth.rule = Rule::targeted_eic;
  cfg.density.cv.folds = 5;
  cfg.density.cv.early_stop_patience = 12;
  switch (kind) {
    case DgpKind::ate_sim61:
      cfg.n_grid = {250, 500, 1000, 2000};
      cfg.replicates = 200;
      break;
    case DgpKind::density_sim62:
      cfg.n_grid = {250, 1000, 5000};
      cfg.replicates = 200;
      // Desk-scale resolution: the criterion-selected fit sits near the
      // empirical hazard, whose plug-in carries a 1/(n * binwidth) term;
      // 80 bins keep that term well under the efficiency bound at these n.
      cfg.density_bins_small = 80;
      cfg.density_bins_large = 80;
      break;
    case DgpKind::custom_null:
      cfg.n_grid = {200};
      cfg.replicates = 20;
      break;
  }
  return cfg;
}

int density_bins_for(const McConfig& cfg, int n) {
  return n >= cfg.density_bins_threshold ? cfg.density_bins_large
                                         : cfg.density_bins_small;
}

namespace {

void parallel_for(int jobs, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || jobs <= 1) {
    for (int i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  const int workers = std::min(threads, jobs);
  pool.reserve(static_cast<std::size_t>(workers));
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= jobs) return;
        fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

ReplicateRow base_row(int n, int r, std::string estimator) {
  ReplicateRow row;
  row.n = n;
  row.replicate = r;
  row.estimator = std::move(estimator);
  return row;
}

void fill_common(ReplicateRow& row, double psi, double se, double lo, double hi,
                 const EstimateDiagnostics& diag, double psi0, int n) {
  row.psi = psi;
  row.se = se;
  row.ci_lo = lo;
  row.ci_hi = hi;
  row.c_cv = diag.c_cv;
  row.c_selected = diag.c_selected;
  row.not_met = diag.not_met;
  row.sqrt_n_pn_dstar = diag.sqrt_n_pn_dstar;
  row.sqrt_n_pn_dstar_at_cv = diag.sqrt_n_pn_dstar_at_cv;
  row.sqrt_n_min_active_pn_phi =
      std::sqrt(static_cast<double>(n)) * diag.min_active_pn_phi;
  row.shortfall = diag.shortfall;
  row.covered = lo <= psi0 && psi0 <= hi;
  row.dominance_ok = diag.c_selected >= diag.c_cv - 1e-12;
}

}  // namespace

McReport run_monte_carlo(const McConfig& cfg) {
  if (cfg.replicates < 2) {
    throw std::invalid_argument("run_monte_carlo: need at least 2 replicates");
  }
  if (cfg.n_grid.empty()) {
    throw std::invalid_argument("run_monte_carlo: empty n grid");
  }
  McReport report;
  report.config = cfg;
  report.truth = true_values(cfg.kind);
  const double psi0 = report.truth.psi0;

  const int jobs = static_cast<int>(cfg.n_grid.size()) * cfg.replicates;
  std::vector<std::vector<ReplicateRow>> slots(static_cast<std::size_t>(jobs));

  const std::string primary_name =
      cfg.kind == DgpKind::density_sim62
          ? "hal_" + rule_name(cfg.density.undersmooth.rule)
          : "hal_" + rule_name(cfg.ate.undersmooth.rule);

  parallel_for(jobs, cfg.threads, [&](int job) {
    const int gi = job / cfg.replicates;
    const int r = job % cfg.replicates;
    const int n = cfg.n_grid[static_cast<std::size_t>(gi)];
    auto& out = slots[static_cast<std::size_t>(job)];
    try {
      if (cfg.kind == DgpKind::density_sim62) {
        const std::vector<double> o =
            dgp_density(n, cfg.base_seed, static_cast<std::uint64_t>(r));
        const DensityFitResult res =
            fit_density_hal(o, density_bins_for(cfg, n), cfg.density);
        ReplicateRow row = base_row(n, r, primary_name);
        fill_common(row, res.estimate.psi, res.estimate.se, res.estimate.ci_lo,
                    res.estimate.ci_hi, res.estimate.diagnostics, psi0, n);
        out.push_back(std::move(row));
        if (cfg.density.undersmooth.rule != Rule::cv) {
          ReplicateRow cvrow = base_row(n, r, "hal_cv");
          fill_common(cvrow, res.estimate_cv.psi, res.estimate_cv.se,
                      res.estimate_cv.ci_lo, res.estimate_cv.ci_hi,
                      res.estimate_cv.diagnostics, psi0, n);
          out.push_back(std::move(cvrow));
        }
      } else {
        const Dataset ds =
            cfg.kind == DgpKind::ate_sim61
                ? dgp_ate(n, cfg.base_seed, static_cast<std::uint64_t>(r))
                : dgp_null(n, cfg.base_seed, static_cast<std::uint64_t>(r));
        const AteEstimate est = fit_ate(ds, cfg.ate);
        ReplicateRow row = base_row(n, r, primary_name);
        fill_common(row, est.psi, est.se, est.ci_lo, est.ci_hi, est.diagnostics,
                    psi0, n);
        out.push_back(std::move(row));
      }
    } catch (const std::exception& e) {
      out.clear();
      ReplicateRow row = base_row(n, r, primary_name);
      row.failed = true;
      row.error = e.what();
      out.push_back(std::move(row));
      if (cfg.kind == DgpKind::density_sim62 &&
          cfg.density.undersmooth.rule != Rule::cv) {
        ReplicateRow cvrow = base_row(n, r, "hal_cv");
        cvrow.failed = true;
        cvrow.error = e.what();
        out.push_back(std::move(cvrow));
      }
    }
  });

  // Deterministic replicate order regardless of execution interleaving.
  for (auto& slot : slots) {
    for (auto& row : slot) report.replicates.push_back(std::move(row));
  }

  std::vector<std::string> estimators = {primary_name};
  if (cfg.kind == DgpKind::density_sim62 &&
      cfg.density.undersmooth.rule != Rule::cv) {
    estimators.push_back("hal_cv");
  }
  for (int n : cfg.n_grid) {
    for (const std::string& est : estimators) {
      McRow row;
      row.n = n;
      row.estimator = est;
      row.efficiency_bound = report.truth.efficiency_bound;
      double sum_psi = 0.0;
      std::vector<double> psis;
      double sum_cover = 0.0, sum_dstar = 0.0, sum_minphi = 0.0;
      for (const ReplicateRow& r : report.replicates) {
        if (r.n != n || r.estimator != est) continue;
        ++row.replicates;
        if (r.failed) {
          ++row.failures;
          continue;
        }
        psis.push_back(r.psi);
        sum_psi += r.psi;
        sum_cover += r.covered ? 1.0 : 0.0;
        sum_dstar += std::abs(r.sqrt_n_pn_dstar);
        sum_minphi += r.sqrt_n_min_active_pn_phi;
      }
      const auto ok = static_cast<double>(psis.size());
      if (ok > 0.0) {
        const double mean = sum_psi / ok;
        double var = 0.0, mse = 0.0;
        for (double p : psis) {
          var += (p - mean) * (p - mean);
          mse += (p - psi0) * (p - psi0);
        }
        row.sqrt_n_bias = std::sqrt(static_cast<double>(n)) * (mean - psi0);
        row.n_variance = n * var / ok;
        row.n_mse = n * mse / ok;
        row.coverage_95 = sum_cover / ok;
        row.mean_sqrt_n_pn_dstar = sum_dstar / ok;
        row.mean_sqrt_n_min_active_pn_phi = sum_minphi / ok;
      }
      if (row.failures >
          cfg.max_failure_rate * static_cast<double>(row.replicates)) {
        report.flagged_failed = true;
      }
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

namespace {

std::string csv_sanitize(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == ',' || c == '\n' || c == '\r') {
      out.push_back(';');
    } else {
      out.push_back(c);
    }
  }
  return out;
}

nlohmann::json config_json(const McReport& report) {
  const McConfig& cfg = report.config;
  nlohmann::json j;
  j["kind"] = dgp_name(cfg.kind);
  j["n_grid"] = cfg.n_grid;
  j["replicates"] = cfg.replicates;
  j["base_seed"] = cfg.base_seed;
  j["threads"] = cfg.threads;
  j["max_failure_rate"] = cfg.max_failure_rate;
  j["estimator"] = {
      {"rule", rule_name(cfg.kind == DgpKind::density_sim62
                             ? cfg.density.undersmooth.rule
                             : cfg.ate.undersmooth.rule)},
      {"folds", cfg.kind == DgpKind::density_sim62 ? cfg.density.cv.folds
                                                   : cfg.ate.cv.folds},
      {"grid_size", cfg.kind == DgpKind::density_sim62
                        ? cfg.density.cv.grid_size
                        : cfg.ate.cv.grid_size},
      {"lambda_min_ratio", cfg.kind == DgpKind::density_sim62
                               ? cfg.density.cv.lambda_min_ratio
                               : cfg.ate.cv.lambda_min_ratio},
      {"m", cfg.ate.m},
      {"outcome_loss", cfg.ate.outcome_loss == LossFamily::squared_error
                           ? "squared_error"
                           : "binomial_loglik"},
      {"gmin", cfg.ate.gmin},
      {"max_interaction_degree", cfg.ate.caps.max_interaction_degree},
      {"max_knots_per_subset", cfg.ate.caps.max_knots_per_subset},
  };
  j["density"] = {
      {"bins_small", cfg.density_bins_small},
      {"bins_large", cfg.density_bins_large},
      {"bins_threshold", cfg.density_bins_threshold},
      {"pad_fraction", cfg.density.pad_fraction},
  };
  j["resolved"] = {
      {"ate_noise", "normal(0, variance 0.25)"},
      {"density_obs", "normal(-4, variance 5/3)"},
      {"beta_sampler", "johnk-rejection"},
  };
  // Figure diagnostics with no data-level definition are not emitted.
  j["not_reproduced"] = {"sqrt_n (P_n - P_0)(D_n - D_0)", "norm of f_n"};
  j["truth"] = {
      {"psi0", report.truth.psi0},
      {"efficiency_bound", report.truth.efficiency_bound},
      {"density_sigma2", report.truth.density_sigma2},
      {"psi0_alt_sd_reading", report.truth.psi0_alt},
  };
  j["flagged_failed"] = report.flagged_failed;
  return j;
}

}  // namespace

void emit_report(const McReport& report, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) {
    throw std::runtime_error("emit_report: cannot create output directory " +
                             out_dir);
  }

  {
    std::ostringstream s;
    s << "n,estimator,replicates,failures,sqrt_n_bias,n_variance,n_mse,"
         "coverage_95,mean_sqrt_n_PnDstar,mean_sqrt_n_min_active_Pn_phi,"
         "efficiency_bound\n";
    for (const McRow& r : report.rows) {
      s << r.n << ',' << r.estimator << ',' << r.replicates << ','
        << r.failures << ',' << format_double(r.sqrt_n_bias) << ','
        << format_double(r.n_variance) << ',' << format_double(r.n_mse) << ','
        << format_double(r.coverage_95) << ','
        << format_double(r.mean_sqrt_n_pn_dstar) << ','
        << format_double(r.mean_sqrt_n_min_active_pn_phi) << ','
        << format_double(r.efficiency_bound) << '\n';
    }
    write_text_file(out_dir + "/summary.csv", s.str());
  }
  {
    std::ostringstream s;
    s << "n,replicate,estimator,failed,psi,se,ci_lo,ci_hi,c_cv,c_selected,"
         "not_met,sqrt_n_PnDstar,sqrt_n_PnDstar_at_cv,"
         "sqrt_n_min_active_Pn_phi,shortfall,covered,dominance_ok,error\n";
    for (const ReplicateRow& r : report.replicates) {
      s << r.n << ',' << r.replicate << ',' << r.estimator << ','
        << (r.failed ? 1 : 0) << ',' << format_double(r.psi) << ','
        << format_double(r.se) << ',' << format_double(r.ci_lo) << ','
        << format_double(r.ci_hi) << ',' << format_double(r.c_cv) << ','
        << format_double(r.c_selected) << ',' << (r.not_met ? 1 : 0) << ','
        << format_double(r.sqrt_n_pn_dstar) << ','
        << format_double(r.sqrt_n_pn_dstar_at_cv) << ','
        << format_double(r.sqrt_n_min_active_pn_phi) << ','
        << format_double(r.shortfall) << ',' << (r.covered ? 1 : 0) << ','
        << (r.dominance_ok ? 1 : 0) << ',' << csv_sanitize(r.error) << '\n';
    }
    write_text_file(out_dir + "/replicates.csv", s.str());
  }
  write_text_file(out_dir + "/config.json", config_json(report).dump(2) + "\n");
  emit_plots_from_files(out_dir);
}

void emit_plots_from_files(const std::string& out_dir) {
  const nlohmann::json cfg =
      nlohmann::json::parse(read_text_file(out_dir + "/config.json"));
  const double psi0 = cfg.at("truth").at("psi0").get<double>();
  const double bound = cfg.at("truth").at("efficiency_bound").get<double>();
  const std::string kind = cfg.at("kind").get<std::string>();

  const CsvTable table = read_csv(out_dir + "/replicates.csv");
  auto col = [&](const std::string& name) {
    for (std::size_t i = 0; i < table.header.size(); ++i) {
      if (table.header[i] == name) return i;
    }
    throw std::runtime_error("replicates.csv missing column " + name);
  };
  const std::size_t c_n = col("n"), c_est = col("estimator"),
                    c_failed = col("failed"), c_psi = col("psi"),
                    c_dstar = col("sqrt_n_PnDstar"),
                    c_minphi = col("sqrt_n_min_active_Pn_phi");

  struct Group {
    std::vector<double> psi, dstar, minphi;
  };
  std::map<std::string, std::map<int, Group>> groups;
  for (const auto& row : table.rows) {
    if (row[c_failed] == "1") continue;
    const int n = std::stoi(row[c_n]);
    Group& g = groups[row[c_est]][n];
    g.psi.push_back(std::strtod(row[c_psi].c_str(), nullptr));
    g.dstar.push_back(std::strtod(row[c_dstar].c_str(), nullptr));
    g.minphi.push_back(std::strtod(row[c_minphi].c_str(), nullptr));
  }

  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };

  std::vector<PlotSeries> bias, variance, mse, diag;
  std::vector<HistogramPanel> panels;
  for (const auto& [est, by_n] : groups) {
    PlotSeries sb{est, {}, {}}, sv{est, {}, {}}, sm{est, {}, {}};
    PlotSeries sd{est + " |sqrt(n) Pn D*|", {}, {}};
    PlotSeries sp{est + " sqrt(n) min Pn phi", {}, {}};
    for (const auto& [n, g] : by_n) {
      const double m = mean(g.psi);
      const double nn = static_cast<double>(n);
      double var = 0.0, msev = 0.0;
      for (double p : g.psi) {
        var += (p - m) * (p - m);
        msev += (p - psi0) * (p - psi0);
      }
      const auto count = static_cast<double>(g.psi.size());
      sb.x.push_back(nn);
      sb.y.push_back(std::abs(std::sqrt(nn) * (m - psi0)));
      sv.x.push_back(nn);
      sv.y.push_back(count > 0 ? nn * var / count : 0.0);
      sm.x.push_back(nn);
      sm.y.push_back(count > 0 ? nn * msev / count : 0.0);
      std::vector<double> abs_d;
      abs_d.reserve(g.dstar.size());
      for (double d : g.dstar) abs_d.push_back(std::abs(d));
      sd.x.push_back(nn);
      sd.y.push_back(mean(abs_d));
      sp.x.push_back(nn);
      sp.y.push_back(mean(g.minphi));

      HistogramPanel panel;
      panel.label = est + ", n=" + std::to_string(n);
      panel.overlay_variance = bound;
      for (double p : g.psi) {
        panel.values.push_back(std::sqrt(nn) * (p - psi0));
      }
      panels.push_back(std::move(panel));
    }
    bias.push_back(std::move(sb));
    variance.push_back(std::move(sv));
    mse.push_back(std::move(sm));
    diag.push_back(std::move(sd));
    diag.push_back(std::move(sp));
  }

  write_line_plot_svg(out_dir + "/bias.svg", kind + ": sqrt(n) |bias|", "n",
                      "sqrt(n) |bias|", bias, 0.0, true);
  write_line_plot_svg(out_dir + "/variance.svg", kind + ": n variance", "n",
                      "n Var", variance, bound, true);
  write_line_plot_svg(out_dir + "/mse.svg", kind + ": n MSE", "n", "n MSE",
                      mse, bound, true);
  write_line_plot_svg(out_dir + "/diagnostics.svg",
                      kind + ": selector diagnostics", "n", "value", diag,
                      std::nullopt, true);
  write_histogram_svg(out_dir + "/sampling_distribution.svg",
                      kind + ": sqrt(n)(psi_n - psi_0)", "sqrt(n)(psi - psi0)",
                      panels);
}

}  // namespace hal
