#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

namespace hal {

struct ColumnMeta {
  double min = 0.0;
  double max = 0.0;
  bool is_binary = false;
  // Smallest observed value above the minimum; the single knot used for
  // binary columns.
  double positive_level = 0.0;
};

// Columnar observations: covariate matrix x, outcome y, optional binary
// treatment a, all sharing row order.
struct Dataset {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::optional<Eigen::VectorXd> a;
  std::vector<ColumnMeta> column_meta;
  std::vector<std::string> column_names;

  Eigen::Index n() const { return x.rows(); }
  Eigen::Index k() const { return x.cols(); }
};

// Validates shapes, finiteness and a in {0,1}, and fills column_meta.
// Throws std::invalid_argument on violation.
Dataset make_dataset(Eigen::MatrixXd x, Eigen::VectorXd y,
                     std::optional<Eigen::VectorXd> a = std::nullopt,
                     std::vector<std::string> names = {});

}  // namespace hal
