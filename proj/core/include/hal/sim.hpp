#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hal/targets.hpp"

namespace hal {

enum class DgpKind { ate_sim61, density_sim62, custom_null };

std::string dgp_name(DgpKind kind);
DgpKind dgp_from_name(const std::string& name);

// W1 = 4Z - 2 with Z ~ Beta(0.85, 0.85); W2 ~ Bernoulli(1/2);
// A ~ Bernoulli(expit(w1 - 2 w1 w2)); Y = expit(w1 - 2 w1 w2) + eps with
// eps ~ Normal(0, variance 0.25). Deterministic given (base_seed, replicate):
// each variable draws from its own counter stream.
Dataset dgp_ate(int n, std::uint64_t base_seed, std::uint64_t replicate = 0);

// iid Normal(-4, variance 5/3).
std::vector<double> dgp_density(int n, std::uint64_t base_seed,
                                std::uint64_t replicate = 0);

// Null regression: independent covariates, A ~ Bernoulli(1/2), Y ~ N(0,1).
Dataset dgp_null(int n, std::uint64_t base_seed, std::uint64_t replicate = 0);

struct TrueValues {
  double psi0 = 0.0;
  double efficiency_bound = 0.0;
  // Resolved density parameterization (variance) plus the alternative
  // sd-reading value of psi0, kept for the record.
  double density_sigma2 = 0.0;
  double psi0_alt = 0.0;
};

// Target values and efficiency bounds by quadrature (Gauss-Legendre after
// singularity-absorbing substitutions for the Beta(0.85, 0.85) factor).
TrueValues true_values(DgpKind kind);

struct McConfig {
  DgpKind kind = DgpKind::ate_sim61;
  std::vector<int> n_grid;
  int replicates = 200;
  std::uint64_t base_seed = 1;
  int threads = 1;
  AteConfig ate;
  DensityConfig density;
  int density_bins_small = 80;   // used when n < density_bins_threshold
  int density_bins_large = 320;
  int density_bins_threshold = 1000;
  double max_failure_rate = 0.05;
};

// Desk-scale defaults per kind (n grid, replicate count, estimator tuning).
McConfig default_mc_config(DgpKind kind);

int density_bins_for(const McConfig& cfg, int n);

struct ReplicateRow {
  int n = 0;
  int replicate = 0;
  std::string estimator;
  bool failed = false;
  std::string error;
  double psi = 0.0, se = 0.0, ci_lo = 0.0, ci_hi = 0.0;
  double c_cv = 0.0, c_selected = 0.0;
  bool not_met = false;
  double sqrt_n_pn_dstar = 0.0;
  double sqrt_n_pn_dstar_at_cv = 0.0;
  double sqrt_n_min_active_pn_phi = 0.0;
  double shortfall = 0.0;
  bool covered = false;
  bool dominance_ok = true;
};

struct McRow {
  int n = 0;
  std::string estimator;
  int replicates = 0;
  int failures = 0;
  double sqrt_n_bias = 0.0;
  double n_variance = 0.0;
  double n_mse = 0.0;
  double coverage_95 = 0.0;
  double mean_sqrt_n_pn_dstar = 0.0;  // mean of |sqrt(n) P_n D*|
  double mean_sqrt_n_min_active_pn_phi = 0.0;
  double efficiency_bound = 0.0;
};

struct McReport {
  McConfig config;
  TrueValues truth;
  std::vector<McRow> rows;
  std::vector<ReplicateRow> replicates;
  bool flagged_failed = false;
};

// Runs the replicate grid (parallel across a worker pool, aggregation in
// deterministic replicate order), pairing undersmoothed and CV estimators on
// identical datasets for the density study. Failed replicates are recorded,
// excluded from aggregates, and flip flagged_failed past max_failure_rate.
McReport run_monte_carlo(const McConfig& cfg);

// Writes summary.csv, replicates.csv, config.json and the SVG panels into
// out_dir, then regenerates the plots from the persisted files so `plot`
// reproduces them byte-identically.
void emit_report(const McReport& report, const std::string& out_dir);

// Rebuilds every SVG from out_dir/replicates.csv + out_dir/config.json.
void emit_plots_from_files(const std::string& out_dir);

}  // namespace hal
