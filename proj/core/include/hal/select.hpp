#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hal/lasso.hpp"

namespace hal {

enum class Rule { cv, global_score, sparse_support, targeted_eic };

std::string rule_name(Rule rule);
Rule rule_from_name(const std::string& name);

struct CvConfig {
  int folds = 10;
  std::vector<double> lambda_grid;  // empty = auto log grid
  std::vector<double> c_grid;       // alternative grid on the constraint scale
  int grid_size = 100;
  double lambda_min_ratio = 1e-4;
  std::vector<int> m_grid = {0};
  std::uint64_t seed = 0;
  SolveOptions solve;
  EnumerationCaps caps;  // dictionary construction inside cv_select_m
  // When positive, stop evaluating fold risks once the running minimizer has
  // gone unbeaten for this many grid points (the curve keeps NaN tails; the
  // full-data path is unaffected). 0 evaluates the whole grid.
  int early_stop_patience = 0;
};

struct UndersmoothConfig {
  Rule rule = Rule::targeted_eic;
  // Global rule constant a; 0 picks the empirical score scale of the CV fit.
  double global_a = 0.0;
  // Sparse rule constant c; the exponent is alpha(k1) = 1/(2*(k1+2)).
  double sparse_c = 1.0;
  int k1 = 0;  // 0 = covariate count of the fitted data
};

// Per-path-point criterion values; entries not applicable to the rule hold
// NaN. Written to CSV with the fixed column set
// lambda,C,cv_risk,min_active_score,min_active_Pn_phi,Pn_Dstar,Pn_Dstar_sq.
struct CriterionTrace {
  std::vector<double> lambda;
  std::vector<double> c;
  std::vector<double> cv_risk;
  std::vector<double> min_active_score;
  std::vector<double> min_active_pn_phi;
  std::vector<double> pn_dstar;
  std::vector<double> pn_dstar_sq;
};

struct SelectorReport {
  Rule rule = Rule::cv;
  double c_cv = 0.0;
  double c_selected = 0.0;
  int m_selected = 0;
  std::size_t cv_index = 0;
  std::size_t selected_index = 0;
  double lambda_cv = 0.0;
  double lambda_selected = 0.0;
  std::vector<double> cv_risk_curve;
  CriterionTrace trace;
  double threshold = 0.0;
  bool not_met = false;
  bool trace_monotonicity_violated = false;
};

// Deterministic fold assignment; fold sizes differ by at most one.
// Throws std::invalid_argument when n < folds.
std::vector<int> vfold_split(int n, int folds, std::uint64_t seed);

struct CvResult {
  SelectorReport report;
  PathResult path;        // full-data path over the grid
  Eigen::MatrixXd design; // full-data design used by the path
};

// V-fold cross-validation over the penalty grid: for each grid value the
// fold-average validation risk of fold-trained fits; the minimizer (ties
// toward smaller C) becomes the CV selection. Solver failures inside a fold
// abort that grid point; an all-failed grid is an error.
CvResult cv_select_C(const Dataset& data, const BasisDictionary& dict,
                     const LossKind& loss, const CvConfig& cfg);

struct MSelection {
  int m_selected = 0;
  std::vector<int> m_grid;
  std::vector<CvResult> per_m;
  std::vector<BasisDictionary> dictionaries;
};

// Nests cv_select_C inside each m of cfg.m_grid and keeps the pair with the
// smallest fold-average validation risk.
MSelection cv_select_m(const Dataset& data, const LossKind& loss,
                       const CvConfig& cfg);

// Walks the path upward from the CV selection to the smallest C whose fit
// has min over active non-intercept basis scores <= a / (sqrt(n) log n).
// Falls back to the largest path C with not_met set when never satisfied.
SelectorReport undersmooth_global(const PathResult& path,
                                  const Eigen::MatrixXd& design,
                                  const Dataset& data,
                                  const UndersmoothConfig& cfg,
                                  const SelectorReport& cv_report);

// Same walk on min active P_n phi <= c * n^(-1/2 + alpha(k1)).
SelectorReport undersmooth_sparsity(const PathResult& path,
                                    const Eigen::MatrixXd& design,
                                    const Dataset& data,
                                    const UndersmoothConfig& cfg,
                                    const SelectorReport& cv_report);

// Canonical-gradient values of a candidate fit, one entry per observation of
// the estimand's sample (the nuisance stays fixed across the path).
using EicEvaluator = std::function<Eigen::VectorXd(const HalFit&)>;

// Same walk on |P_n D*| < P_n{D*^2} / (sqrt(n) log n), both sides evaluated
// with the candidate fit.
SelectorReport undersmooth_targeted(const PathResult& path,
                                    const Eigen::MatrixXd& design,
                                    const Dataset& data,
                                    const EicEvaluator& evaluator,
                                    const UndersmoothConfig& cfg,
                                    const SelectorReport& cv_report);

}  // namespace hal
