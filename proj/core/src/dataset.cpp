#include "hal/dataset.hpp"

#include <cmath>
#include <stdexcept>

namespace hal {

Dataset make_dataset(Eigen::MatrixXd x, Eigen::VectorXd y,
                     std::optional<Eigen::VectorXd> a,
                     std::vector<std::string> names) {
  if (x.rows() < 1) {
    throw std::invalid_argument("dataset: need at least one row");
  }
  if (y.size() != x.rows()) {
    throw std::invalid_argument("dataset: y length does not match x rows");
  }
  if (!x.allFinite() || !y.allFinite()) {
    throw std::invalid_argument("dataset: nonfinite value");
  }
  if (a) {
    if (a->size() != x.rows()) {
      throw std::invalid_argument("dataset: a length does not match x rows");
    }
    for (Eigen::Index i = 0; i < a->size(); ++i) {
      const double v = (*a)(i);
      if (v != 0.0 && v != 1.0) {
        throw std::invalid_argument("dataset: treatment must be 0/1");
      }
    }
  }
  if (!names.empty() && static_cast<Eigen::Index>(names.size()) != x.cols()) {
    throw std::invalid_argument("dataset: column name count mismatch");
  }

  Dataset d;
  d.x = std::move(x);
  d.y = std::move(y);
  d.a = std::move(a);
  d.column_names = std::move(names);
  d.column_meta.resize(static_cast<std::size_t>(d.x.cols()));
  for (Eigen::Index j = 0; j < d.x.cols(); ++j) {
    ColumnMeta& m = d.column_meta[static_cast<std::size_t>(j)];
    m.min = d.x.col(j).minCoeff();
    m.max = d.x.col(j).maxCoeff();
    // Binary means at most two distinct values.
    double second = m.min;
    bool more_than_two = false;
    for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
      const double v = d.x(i, j);
      if (v != m.min) {
        if (second == m.min) {
          second = v;
        } else if (v != second) {
          more_than_two = true;
          break;
        }
      }
    }
    m.is_binary = !more_than_two;
    m.positive_level = second;
  }
  return d;
}

}  // namespace hal
