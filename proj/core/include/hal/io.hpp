#pragma once

#include <string>
#include <vector>

#include "hal/select.hpp"
#include "hal/targets.hpp"

namespace hal {

// Column roles for CSV ingestion. Empty covariates means every column not
// named as outcome/treatment.
struct CsvRoles {
  std::string outcome;
  std::string treatment;  // optional
  std::vector<std::string> covariates;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::string& path);
Dataset read_csv_dataset(const std::string& path, const CsvRoles& roles);

// %.17g formatting; round-trips doubles exactly.
std::string format_double(double v);

std::string dictionary_to_json(const BasisDictionary& dict);
BasisDictionary dictionary_from_json(const std::string& text);

// Sparse coefficient serialization against a dictionary's ids.
std::string fit_to_json(const HalFit& fit);
HalFit fit_from_json(const std::string& text, Eigen::Index p);

std::string selector_report_to_json(const SelectorReport& report);

// Fixed columns: lambda,C,cv_risk,min_active_score,min_active_Pn_phi,
// Pn_Dstar,Pn_Dstar_sq. Entries not applicable to the rule are empty.
void write_trace_csv(const std::string& path, const SelectorReport& report);

std::string ate_estimate_to_json(const AteEstimate& est);
std::string density_estimate_to_json(const DensityEstimate& est,
                                     const SelectorReport& report);
void write_eic_csv(const std::string& path, const Eigen::VectorXd& eic);
void write_density_csv(const std::string& path, const HazardDensity& d);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace hal
