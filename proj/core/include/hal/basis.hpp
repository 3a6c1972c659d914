#pragma once

#include <Eigen/Core>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hal/dataset.hpp"

namespace hal {

struct HalFit;

// One univariate spline factor. Order 0 is the right-closed indicator
// I(x >= knot); order o >= 1 is (x - knot)_+^o / o!, which is what o-fold
// integration of the indicator over its knot yields.
struct UnivariateSpline {
  int order = 0;
  double knot = 0.0;
};

// Tensor product of univariate factors over a subset of coordinates, kept
// sorted by ascending coordinate index so evaluation order is deterministic.
// An empty term list is the intercept (constant 1).
struct BasisFunction {
  std::vector<std::pair<int, UnivariateSpline>> terms;
  int id = 0;

  bool is_intercept() const { return terms.empty(); }
};

double eval_univariate(int order, double knot, double x);

// Product of eval_univariate over the terms, multiplied in ascending
// coordinate order. x is in shifted coordinates (column minimum at 0).
// Throws std::out_of_range when a term indexes past x.
double eval_basis(const BasisFunction& b, std::span<const double> x);

struct EnumerationCaps {
  int max_interaction_degree = 2;
  // 0 keeps every observed knot vector; otherwise knot vectors per
  // (subset, free-coordinate set) are thinned by rank stratification,
  // always keeping the extremes.
  int max_knots_per_subset = 0;
};

struct BasisDictionary {
  std::vector<BasisFunction> basis_list;
  int order = 0;            // spline order m of the generating class
  int covariate_count = 0;
  std::string knot_source;
  // Basis coordinates are raw values minus column_shift (observed minima),
  // so the zero-knot pieces are anchored at the observed origin.
  std::vector<double> column_shift;
  // Per-column maxima after shifting; the valid knot domain is [0, max].
  std::vector<double> column_max;

  Eigen::Index size() const {
    return static_cast<Eigen::Index>(basis_list.size());
  }
};

// Builds the order-m tensor spline dictionary over knots observed in the
// data: the intercept, the zero-knot lower-order pieces, and order-m pieces
// with free knots at observed rows. Binary columns contribute a single
// indicator at their positive level. Columns identical on the data are
// deduplicated keeping the lowest id. Supported m: 0..3.
BasisDictionary enumerate_basis(const Dataset& data, int m,
                                const EnumerationCaps& caps);

// Row of basis evaluations at a raw covariate vector (shift applied here).
Eigen::VectorXd dictionary_row(const BasisDictionary& dict,
                               std::span<const double> x_raw);

// n x p matrix with entry (i, j) = basis j evaluated at row i.
Eigen::MatrixXd design_matrix(const Dataset& data, const BasisDictionary& dict);

// Smooths b by one integration step on each coordinate in smooth_set:
// per-coordinate order increments by one, the coordinate's knot becomes
// new_knots.at(j) where provided and 0 otherwise. Coordinates outside
// smooth_set keep their factor. column_max, when nonempty, bounds the
// admissible knot domain [0, column_max[j]].
BasisFunction integrate_basis(const BasisFunction& b,
                              std::span<const int> smooth_set,
                              const std::map<int, double>& new_knots,
                              std::span<const double> column_max = {});

// L1 norm of the fitted coefficients. The default follows the fit's
// penalization: an unpenalized intercept is excluded (so the value matches
// the realized constraint C); include_intercept overrides.
double sectional_variation_norm(const HalFit& fit);
double sectional_variation_norm(const HalFit& fit, bool include_intercept);

}  // namespace hal
