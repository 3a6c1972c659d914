#include "hal/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace hal {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

CsvTable read_csv(const std::string& path) {
  const std::string text = read_text_file(path);
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (line.back() == ',') fields.emplace_back();
    if (first) {
      table.header = std::move(fields);
      first = false;
    } else {
      table.rows.push_back(std::move(fields));
    }
  }
  return table;
}

Dataset read_csv_dataset(const std::string& path, const CsvRoles& roles) {
  const CsvTable table = read_csv(path);
  if (table.header.empty()) throw std::runtime_error("empty csv: " + path);
  auto find_col = [&](const std::string& name) {
    for (std::size_t i = 0; i < table.header.size(); ++i) {
      if (table.header[i] == name) return static_cast<int>(i);
    }
    throw std::runtime_error("csv column not found: " + name);
  };
  const int y_col = find_col(roles.outcome);
  const int a_col = roles.treatment.empty() ? -1 : find_col(roles.treatment);
  std::vector<int> x_cols;
  std::vector<std::string> x_names;
  if (roles.covariates.empty()) {
    for (std::size_t i = 0; i < table.header.size(); ++i) {
      const int ci = static_cast<int>(i);
      if (ci == y_col || ci == a_col) continue;
      x_cols.push_back(ci);
      x_names.push_back(table.header[i]);
    }
  } else {
    for (const std::string& name : roles.covariates) {
      x_cols.push_back(find_col(name));
      x_names.push_back(name);
    }
  }
  if (x_cols.empty()) throw std::runtime_error("csv has no covariate columns");

  const auto n = static_cast<Eigen::Index>(table.rows.size());
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(x_cols.size()));
  Eigen::VectorXd y(n);
  Eigen::VectorXd a;
  if (a_col >= 0) a.resize(n);
  auto parse = [&](const std::string& s, Eigen::Index row, const char* what) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str()) {
      throw std::runtime_error(std::string("csv parse error in ") + what +
                               " at row " + std::to_string(row));
    }
    return v;
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    if (row.size() != table.header.size()) {
      throw std::runtime_error("csv row width mismatch at row " +
                               std::to_string(i));
    }
    for (std::size_t j = 0; j < x_cols.size(); ++j) {
      x(i, static_cast<Eigen::Index>(j)) =
          parse(row[static_cast<std::size_t>(x_cols[j])], i, "covariate");
    }
    y(i) = parse(row[static_cast<std::size_t>(y_col)], i, "outcome");
    if (a_col >= 0) {
      a(i) = parse(row[static_cast<std::size_t>(a_col)], i, "treatment");
    }
  }
  return make_dataset(std::move(x), std::move(y),
                      a_col >= 0 ? std::optional<Eigen::VectorXd>(std::move(a))
                                 : std::nullopt,
                      std::move(x_names));
}

std::string dictionary_to_json(const BasisDictionary& dict) {
  nlohmann::json j;
  j["order"] = dict.order;
  j["covariate_count"] = dict.covariate_count;
  j["knot_source"] = dict.knot_source;
  j["column_shift"] = dict.column_shift;
  j["column_max"] = dict.column_max;
  nlohmann::json basis = nlohmann::json::array();
  for (const BasisFunction& b : dict.basis_list) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& [coord, spline] : b.terms) {
      terms.push_back({{"coord", coord},
                       {"order", spline.order},
                       {"knot", spline.knot}});
    }
    basis.push_back({{"id", b.id}, {"terms", std::move(terms)}});
  }
  j["basis"] = std::move(basis);
  return j.dump();
}

BasisDictionary dictionary_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  BasisDictionary dict;
  dict.order = j.at("order").get<int>();
  dict.covariate_count = j.at("covariate_count").get<int>();
  dict.knot_source = j.at("knot_source").get<std::string>();
  dict.column_shift = j.at("column_shift").get<std::vector<double>>();
  dict.column_max = j.at("column_max").get<std::vector<double>>();
  for (const auto& jb : j.at("basis")) {
    BasisFunction b;
    b.id = jb.at("id").get<int>();
    for (const auto& jt : jb.at("terms")) {
      b.terms.emplace_back(jt.at("coord").get<int>(),
                           UnivariateSpline{jt.at("order").get<int>(),
                                            jt.at("knot").get<double>()});
    }
    dict.basis_list.push_back(std::move(b));
  }
  return dict;
}

std::string fit_to_json(const HalFit& fit) {
  nlohmann::json j;
  j["lambda"] = fit.lambda;
  j["C"] = fit.C;
  j["loss"] = fit.loss.family == LossFamily::squared_error ? "squared_error"
                                                           : "binomial_loglik";
  j["intercept_penalized"] = fit.intercept_penalized;
  j["intercept_index"] = fit.intercept_index;
  j["constraint_slack"] = fit.constraint_slack;
  nlohmann::json ids = nlohmann::json::array();
  nlohmann::json values = nlohmann::json::array();
  for (Eigen::Index i = 0; i < fit.beta.size(); ++i) {
    if (fit.beta(i) != 0.0) {
      ids.push_back(static_cast<int>(i));
      values.push_back(fit.beta(i));
    }
  }
  j["basis_ids"] = std::move(ids);
  j["beta"] = std::move(values);
  return j.dump();
}

HalFit fit_from_json(const std::string& text, Eigen::Index p) {
  const nlohmann::json j = nlohmann::json::parse(text);
  HalFit fit;
  fit.lambda = j.at("lambda").get<double>();
  fit.C = j.at("C").get<double>();
  fit.loss.family = j.at("loss").get<std::string>() == "squared_error"
                        ? LossFamily::squared_error
                        : LossFamily::binomial_loglik;
  fit.intercept_penalized = j.at("intercept_penalized").get<bool>();
  fit.intercept_index = j.at("intercept_index").get<int>();
  fit.constraint_slack = j.at("constraint_slack").get<bool>();
  fit.beta = Eigen::VectorXd::Zero(p);
  const auto ids = j.at("basis_ids").get<std::vector<int>>();
  const auto values = j.at("beta").get<std::vector<double>>();
  if (ids.size() != values.size()) {
    throw std::runtime_error("fit_from_json: id/value length mismatch");
  }
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= p) {
      throw std::runtime_error("fit_from_json: basis id out of range");
    }
    fit.beta(ids[i]) = values[i];
    fit.active_set.push_back(ids[i]);
  }
  return fit;
}

namespace {

nlohmann::json trace_json(const CriterionTrace& t) {
  nlohmann::json j;
  j["lambda"] = t.lambda;
  j["C"] = t.c;
  j["cv_risk"] = t.cv_risk;
  j["min_active_score"] = t.min_active_score;
  j["min_active_Pn_phi"] = t.min_active_pn_phi;
  j["Pn_Dstar"] = t.pn_dstar;
  j["Pn_Dstar_sq"] = t.pn_dstar_sq;
  return j;
}

nlohmann::json diagnostics_json(const EstimateDiagnostics& d) {
  return {{"sqrt_n_PnDstar", d.sqrt_n_pn_dstar},
          {"sqrt_n_PnDstar_at_cv", d.sqrt_n_pn_dstar_at_cv},
          {"min_active_Pn_phi", d.min_active_pn_phi},
          {"C_cv", d.c_cv},
          {"C_selected", d.c_selected},
          {"not_met", d.not_met},
          {"g_truncated_fraction", d.g_truncated_fraction},
          {"shortfall", d.shortfall}};
}

}  // namespace

std::string selector_report_to_json(const SelectorReport& report) {
  nlohmann::json j;
  j["rule"] = rule_name(report.rule);
  j["C_cv"] = report.c_cv;
  j["C_selected"] = report.c_selected;
  j["m_selected"] = report.m_selected;
  j["cv_index"] = report.cv_index;
  j["selected_index"] = report.selected_index;
  j["lambda_cv"] = report.lambda_cv;
  j["lambda_selected"] = report.lambda_selected;
  j["threshold"] = report.threshold;
  j["not_met"] = report.not_met;
  j["trace_monotonicity_violated"] = report.trace_monotonicity_violated;
  j["cv_risk_curve"] = report.cv_risk_curve;
  j["trace"] = trace_json(report.trace);
  return j.dump();
}

void write_trace_csv(const std::string& path, const SelectorReport& report) {
  const CriterionTrace& t = report.trace;
  std::ostringstream s;
  s << "lambda,C,cv_risk,min_active_score,min_active_Pn_phi,Pn_Dstar,"
       "Pn_Dstar_sq\n";
  auto cell = [&](const std::vector<double>& v, std::size_t i) {
    if (i >= v.size() || std::isnan(v[i])) return std::string();
    return format_double(v[i]);
  };
  for (std::size_t i = 0; i < t.lambda.size(); ++i) {
    s << cell(t.lambda, i) << ',' << cell(t.c, i) << ',' << cell(t.cv_risk, i)
      << ',' << cell(t.min_active_score, i) << ','
      << cell(t.min_active_pn_phi, i) << ',' << cell(t.pn_dstar, i) << ','
      << cell(t.pn_dstar_sq, i) << '\n';
  }
  write_text_file(path, s.str());
}

std::string ate_estimate_to_json(const AteEstimate& est) {
  nlohmann::json j;
  j["psi"] = est.psi;
  j["se"] = est.se;
  j["ci"] = {est.ci_lo, est.ci_hi};
  j["C_cv"] = est.outcome_report.c_cv;
  j["C_selected"] = est.outcome_report.c_selected;
  j["rule"] = rule_name(est.outcome_report.rule);
  j["diagnostics"] = diagnostics_json(est.diagnostics);
  return j.dump(2);
}

std::string density_estimate_to_json(const DensityEstimate& est,
                                     const SelectorReport& report) {
  nlohmann::json j;
  j["psi"] = est.psi;
  j["se"] = est.se;
  j["ci"] = {est.ci_lo, est.ci_hi};
  j["C_cv"] = report.c_cv;
  j["C_selected"] = report.c_selected;
  j["rule"] = rule_name(report.rule);
  j["diagnostics"] = diagnostics_json(est.diagnostics);
  return j.dump(2);
}

void write_eic_csv(const std::string& path, const Eigen::VectorXd& eic) {
  std::ostringstream s;
  s << "eic\n";
  for (Eigen::Index i = 0; i < eic.size(); ++i) {
    s << format_double(eic(i)) << '\n';
  }
  write_text_file(path, s.str());
}

void write_density_csv(const std::string& path, const HazardDensity& d) {
  std::ostringstream s;
  s << "bin_lo,bin_hi,hazard,density\n";
  for (std::size_t b = 0; b < d.density.size(); ++b) {
    s << format_double(d.bin_edges[b]) << ',' << format_double(d.bin_edges[b + 1])
      << ',' << format_double(d.hazard[b]) << ',' << format_double(d.density[b])
      << '\n';
  }
  write_text_file(path, s.str());
}

}  // namespace hal
