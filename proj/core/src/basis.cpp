#include "hal/basis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "hal/lasso.hpp"

namespace hal {

namespace {

double factorial(int o) {
  double f = 1.0;
  for (int i = 2; i <= o; ++i) f *= i;
  return f;
}

}  // namespace

double eval_univariate(int order, double knot, double x) {
  if (order < 0) {
    throw std::invalid_argument("eval_univariate: order must be >= 0");
  }
  if (order == 0) {
    return x >= knot ? 1.0 : 0.0;
  }
  const double d = x - knot;
  if (d < 0.0) return 0.0;
  return std::pow(d, order) / factorial(order);
}

double eval_basis(const BasisFunction& b, std::span<const double> x) {
  double v = 1.0;
  for (const auto& [coord, spline] : b.terms) {
    if (coord < 0 || static_cast<std::size_t>(coord) >= x.size()) {
      throw std::out_of_range("eval_basis: coordinate index out of range");
    }
    v *= eval_univariate(spline.order, spline.knot, x[static_cast<std::size_t>(coord)]);
    if (v == 0.0) return 0.0;
  }
  return v;
}

BasisFunction integrate_basis(const BasisFunction& b,
                              std::span<const int> smooth_set,
                              const std::map<int, double>& new_knots,
                              std::span<const double> column_max) {
  BasisFunction out = b;
  for (int coord : smooth_set) {
    auto it = std::find_if(out.terms.begin(), out.terms.end(),
                           [coord](const auto& t) { return t.first == coord; });
    if (it == out.terms.end()) {
      throw std::invalid_argument(
          "integrate_basis: smooth_set coordinate not active in basis");
    }
    double knot = 0.0;
    if (auto kn = new_knots.find(coord); kn != new_knots.end()) {
      knot = kn->second;
    }
    const bool have_max =
        !column_max.empty() && static_cast<std::size_t>(coord) < column_max.size();
    if (knot < 0.0 || (have_max && knot > column_max[static_cast<std::size_t>(coord)])) {
      throw std::domain_error("integrate_basis: knot outside [0, column max]");
    }
    it->second.order += 1;
    it->second.knot = knot;
  }
  return out;
}

namespace {

struct ColumnInfo {
  bool is_binary = false;
  double positive_shifted = 0.0;  // positive level after shifting
};

// Order vectors over the continuous coordinates of a subset: free
// coordinates are pinned at order m, the rest range over 1..m.
void order_vectors(const std::vector<int>& cont, const std::vector<char>& is_free,
                   int m, std::vector<std::vector<int>>& out) {
  std::vector<int> cur(cont.size(), 0);
  std::size_t d = cont.size();
  // odometer over non-free positions
  std::vector<std::size_t> pos;
  for (std::size_t i = 0; i < d; ++i) {
    if (is_free[i]) {
      cur[i] = m;
    } else {
      cur[i] = 1;
      pos.push_back(i);
    }
  }
  for (;;) {
    out.push_back(cur);
    std::size_t i = 0;
    for (; i < pos.size(); ++i) {
      if (cur[pos[i]] < m) {
        ++cur[pos[i]];
        for (std::size_t r = 0; r < i; ++r) cur[pos[r]] = 1;
        break;
      }
    }
    if (i == pos.size()) break;
  }
}

// Rank-stratified thinning: order knot vectors by their joint rank sum and
// take an even stride, always keeping the last (sparsest support) element.
std::vector<std::size_t> thin_indices(std::size_t count, int cap) {
  std::vector<std::size_t> keep;
  if (cap <= 0 || count <= static_cast<std::size_t>(cap)) {
    keep.resize(count);
    std::iota(keep.begin(), keep.end(), std::size_t{0});
    return keep;
  }
  const double stride = static_cast<double>(count - 1) / (cap - 1);
  for (int i = 0; i < cap; ++i) {
    keep.push_back(static_cast<std::size_t>(std::llround(i * stride)));
  }
  keep.back() = count - 1;
  keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
  return keep;
}

struct VectorHash {
  std::size_t operator()(const std::vector<std::uint64_t>& v) const {
    std::size_t h = 1469598103934665603ull;
    for (std::uint64_t x : v) {
      h ^= static_cast<std::size_t>(x);
      h *= 1099511628211ull;
    }
    return h;
  }
};

}  // namespace

BasisDictionary enumerate_basis(const Dataset& data, int m,
                                const EnumerationCaps& caps) {
  if (data.n() < 1) {
    throw std::invalid_argument("enumerate_basis: empty dataset");
  }
  if (m < 0 || m > 3) {
    throw std::invalid_argument("enumerate_basis: supported order range is 0..3");
  }
  if (caps.max_interaction_degree < 1) {
    throw std::invalid_argument("enumerate_basis: caps must be positive");
  }

  const int k = static_cast<int>(data.k());
  const Eigen::Index n = data.n();

  BasisDictionary dict;
  dict.order = m;
  dict.covariate_count = k;
  dict.knot_source = "observed";
  dict.column_shift.resize(static_cast<std::size_t>(k));
  dict.column_max.resize(static_cast<std::size_t>(k));
  std::vector<ColumnInfo> info(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    const ColumnMeta& meta = data.column_meta[static_cast<std::size_t>(j)];
    dict.column_shift[static_cast<std::size_t>(j)] = meta.min;
    dict.column_max[static_cast<std::size_t>(j)] = meta.max - meta.min;
    info[static_cast<std::size_t>(j)].is_binary = meta.is_binary;
    info[static_cast<std::size_t>(j)].positive_shifted =
        meta.positive_level - meta.min;
  }

  // Shifted copy of the data for knot extraction and dedup evaluation.
  Eigen::MatrixXd xs = data.x;
  for (int j = 0; j < k; ++j) {
    xs.col(j).array() -= dict.column_shift[static_cast<std::size_t>(j)];
  }

  std::vector<BasisFunction> candidates;
  candidates.push_back(BasisFunction{});  // intercept

  const int max_deg = std::min(caps.max_interaction_degree, k);

  // All nonempty subsets s of {0..k-1} with |s| <= max_deg, in increasing
  // cardinality then lexicographic order for stable ids.
  std::vector<std::vector<int>> subsets;
  std::vector<int> comb;
  for (int deg = 1; deg <= max_deg; ++deg) {
    comb.assign(static_cast<std::size_t>(deg), 0);
    std::iota(comb.begin(), comb.end(), 0);
    for (;;) {
      subsets.push_back(comb);
      int i = deg - 1;
      while (i >= 0 && comb[static_cast<std::size_t>(i)] == k - deg + i) --i;
      if (i < 0) break;
      ++comb[static_cast<std::size_t>(i)];
      for (int r = i + 1; r < deg; ++r) {
        comb[static_cast<std::size_t>(r)] = comb[static_cast<std::size_t>(r - 1)] + 1;
      }
    }
  }

  for (const std::vector<int>& s : subsets) {
    std::vector<int> cont, bin;
    for (int c : s) {
      (info[static_cast<std::size_t>(c)].is_binary ? bin : cont).push_back(c);
    }
    // Degenerate binary columns (single value) cannot carry a knot.
    bool degenerate = false;
    for (int c : bin) {
      if (info[static_cast<std::size_t>(c)].positive_shifted <= 0.0) degenerate = true;
    }
    if (degenerate) continue;

    auto binary_terms = [&]() {
      std::vector<std::pair<int, UnivariateSpline>> t;
      for (int c : bin) {
        t.emplace_back(c, UnivariateSpline{0, info[static_cast<std::size_t>(c)].positive_shifted});
      }
      return t;
    };

    if (cont.empty()) {
      BasisFunction b;
      b.terms = binary_terms();
      std::sort(b.terms.begin(), b.terms.end(),
                [](const auto& l, const auto& r) { return l.first < r.first; });
      candidates.push_back(std::move(b));
      continue;
    }

    // Zero-knot pieces: every order vector in {1..m}^cont, all knots 0.
    if (m >= 1) {
      std::vector<std::vector<int>> orders;
      order_vectors(cont, std::vector<char>(cont.size(), 0), m, orders);
      // order_vectors pins nothing here, so it enumerates {1..m}^cont
      for (const auto& ov : orders) {
        BasisFunction b;
        b.terms = binary_terms();
        for (std::size_t i = 0; i < cont.size(); ++i) {
          b.terms.emplace_back(cont[i], UnivariateSpline{ov[i], 0.0});
        }
        std::sort(b.terms.begin(), b.terms.end(),
                  [](const auto& l, const auto& r) { return l.first < r.first; });
        candidates.push_back(std::move(b));
      }
    }

    // Free-knot pieces: nonempty free set F over the continuous coordinates,
    // orders m on F and 1..m elsewhere, knots at observed rows. Rows whose
    // binary coordinates sit below the positive level only duplicate smaller
    // subsets, so knot rows are restricted to binary-positive rows.
    const std::size_t d = cont.size();
    for (std::uint64_t mask = 1; mask < (1ull << d); ++mask) {
      std::vector<char> is_free(d, 0);
      std::vector<int> free_coords;
      for (std::size_t i = 0; i < d; ++i) {
        if (mask & (1ull << i)) {
          is_free[i] = 1;
          free_coords.push_back(cont[i]);
        }
      }
      std::vector<std::vector<int>> orders;
      order_vectors(cont, is_free, m, orders);

      // Unique knot vectors over the free coordinates, from rows where
      // every binary coordinate in s is positive. Knots exactly at the
      // origin degenerate (order-0 factor is constant 1), so order-0 free
      // knots must be positive.
      std::vector<std::vector<double>> knots;
      for (Eigen::Index i = 0; i < n; ++i) {
        bool ok = true;
        for (int c : bin) {
          if (xs(i, c) < info[static_cast<std::size_t>(c)].positive_shifted) ok = false;
        }
        if (!ok) continue;
        std::vector<double> kv;
        kv.reserve(free_coords.size());
        for (int c : free_coords) kv.push_back(xs(i, c));
        if (m == 0) {
          bool degenerate_knot = false;
          for (double u : kv) {
            if (u <= 0.0) degenerate_knot = true;
          }
          if (degenerate_knot) continue;
        }
        knots.push_back(std::move(kv));
      }
      std::sort(knots.begin(), knots.end());
      knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
      const auto kept = thin_indices(knots.size(), caps.max_knots_per_subset);

      for (const auto& ov : orders) {
        for (std::size_t ki : kept) {
          BasisFunction b;
          b.terms = binary_terms();
          std::size_t fpos = 0;
          for (std::size_t i = 0; i < d; ++i) {
            const double knot = is_free[i] ? knots[ki][fpos] : 0.0;
            if (is_free[i]) ++fpos;
            b.terms.emplace_back(cont[i], UnivariateSpline{ov[i], knot});
          }
          std::sort(b.terms.begin(), b.terms.end(),
                    [](const auto& l, const auto& r) { return l.first < r.first; });
          candidates.push_back(std::move(b));
        }
      }
    }
  }

  // Dedup on the evaluation vector over the data, keeping the lowest id.
  std::unordered_map<std::vector<std::uint64_t>, int, VectorHash> seen;
  std::vector<double> row(static_cast<std::size_t>(k));
  dict.basis_list.reserve(candidates.size());
  std::vector<std::uint64_t> key(static_cast<std::size_t>(n));
  for (BasisFunction& cand : candidates) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int j = 0; j < k; ++j) row[static_cast<std::size_t>(j)] = xs(i, j);
      double v = eval_basis(cand, row);
      if (v == 0.0) v = 0.0;  // normalize -0
      std::uint64_t bits;
      static_assert(sizeof(bits) == sizeof(v));
      std::memcpy(&bits, &v, sizeof(bits));
      key[static_cast<std::size_t>(i)] = bits;
    }
    if (seen.emplace(key, static_cast<int>(dict.basis_list.size())).second) {
      cand.id = static_cast<int>(dict.basis_list.size());
      dict.basis_list.push_back(std::move(cand));
    }
  }
  return dict;
}

Eigen::VectorXd dictionary_row(const BasisDictionary& dict,
                               std::span<const double> x_raw) {
  if (x_raw.size() != static_cast<std::size_t>(dict.covariate_count)) {
    throw std::invalid_argument("dictionary_row: dimension mismatch");
  }
  std::vector<double> xs(x_raw.size());
  for (std::size_t j = 0; j < xs.size(); ++j) {
    xs[j] = x_raw[j] - dict.column_shift[j];
  }
  Eigen::VectorXd out(dict.size());
  for (Eigen::Index j = 0; j < dict.size(); ++j) {
    out(j) = eval_basis(dict.basis_list[static_cast<std::size_t>(j)], xs);
  }
  return out;
}

Eigen::MatrixXd design_matrix(const Dataset& data, const BasisDictionary& dict) {
  if (data.k() != dict.covariate_count) {
    throw std::invalid_argument("design_matrix: dimension mismatch");
  }
  Eigen::MatrixXd m(data.n(), dict.size());
  std::vector<double> xs(static_cast<std::size_t>(data.k()));
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    for (Eigen::Index j = 0; j < data.k(); ++j) {
      xs[static_cast<std::size_t>(j)] =
          data.x(i, j) - dict.column_shift[static_cast<std::size_t>(j)];
    }
    for (Eigen::Index p = 0; p < dict.size(); ++p) {
      m(i, p) = eval_basis(dict.basis_list[static_cast<std::size_t>(p)], xs);
    }
  }
  return m;
}

double sectional_variation_norm(const HalFit& fit) {
  return sectional_variation_norm(fit, fit.intercept_penalized);
}

double sectional_variation_norm(const HalFit& fit, bool include_intercept) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < fit.beta.size(); ++j) {
    if (!include_intercept && static_cast<int>(j) == fit.intercept_index) continue;
    s += std::abs(fit.beta(j));
  }
  return s;
}

}  // namespace hal
