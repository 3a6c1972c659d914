#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "hal/io.hpp"
#include "hal/sim.hpp"
#include "json.hpp"

namespace {

using nlohmann::json;

json load_json_file(const std::string& path) {
  if (path.empty()) return json::object();
  return json::parse(hal::read_text_file(path));
}

hal::CsvRoles roles_from_config(const json& cfg) {
  hal::CsvRoles roles;
  roles.outcome = cfg.value("outcome", "y");
  roles.treatment = cfg.value("treatment", "");
  if (cfg.contains("covariates")) {
    roles.covariates = cfg.at("covariates").get<std::vector<std::string>>();
  }
  return roles;
}

hal::LossFamily loss_from_config(const json& cfg, const char* fallback) {
  const std::string name = cfg.value("loss", fallback);
  if (name == "squared_error") return hal::LossFamily::squared_error;
  if (name == "binomial" || name == "binomial_loglik") {
    return hal::LossFamily::binomial_loglik;
  }
  throw std::runtime_error("unknown loss: " + name);
}

void apply_cv_config(hal::CvConfig& cv, const json& cfg, std::uint64_t seed,
                     int grid_size) {
  cv.folds = cfg.value("folds", cv.folds);
  cv.seed = seed;
  if (grid_size > 0) cv.grid_size = grid_size;
  cv.lambda_min_ratio = cfg.value("lambda_min_ratio", cv.lambda_min_ratio);
}

void apply_caps(hal::EnumerationCaps& caps, const json& cfg) {
  caps.max_interaction_degree =
      cfg.value("max_interaction_degree", caps.max_interaction_degree);
  caps.max_knots_per_subset =
      cfg.value("max_knots_per_subset", caps.max_knots_per_subset);
}

void ensure_dir(const std::string& out) {
  std::filesystem::create_directories(out);
  if (!std::filesystem::is_directory(out)) {
    throw std::runtime_error("cannot create output directory " + out);
  }
}

int run_fit(const std::string& data_path, const std::string& config_path,
            const std::string& out, std::uint64_t seed, int m, int grid_size,
            const std::string& rule) {
  const json cfg = load_json_file(config_path);
  const hal::Dataset data = hal::read_csv_dataset(data_path, roles_from_config(cfg));
  hal::LossKind loss;
  loss.family = loss_from_config(cfg, "squared_error");
  if (data.a && loss.weights.size() == 0 && cfg.value("restrict_to_treated", false)) {
    loss.weights = *data.a;
  }
  hal::CvConfig cv;
  apply_cv_config(cv, cfg, seed, grid_size);
  hal::EnumerationCaps caps;
  apply_caps(caps, cfg);

  const hal::BasisDictionary dict = hal::enumerate_basis(data, m, caps);
  const hal::CvResult res = hal::cv_select_C(data, dict, loss, cv);

  hal::SelectorReport report = res.report;
  const hal::Rule selected_rule = hal::rule_from_name(rule);
  hal::UndersmoothConfig uc;
  uc.rule = selected_rule;
  switch (selected_rule) {
    case hal::Rule::cv:
      break;
    case hal::Rule::global_score:
      report = hal::undersmooth_global(res.path, res.design, data, uc, res.report);
      break;
    case hal::Rule::sparse_support:
      report = hal::undersmooth_sparsity(res.path, res.design, data, uc, res.report);
      break;
    case hal::Rule::targeted_eic:
      throw std::runtime_error(
          "the targeted rule needs an estimand; use the ate or density subcommand");
  }

  ensure_dir(out);
  hal::write_text_file(out + "/dictionary.json", hal::dictionary_to_json(dict) + "\n");
  hal::write_text_file(out + "/fit.json",
                       hal::fit_to_json(res.path.fits[report.selected_index]) + "\n");
  hal::write_text_file(out + "/selector.json",
                       hal::selector_report_to_json(report) + "\n");
  hal::write_trace_csv(out + "/trace.csv", report);
  std::cout << "fit: p=" << dict.size() << " C_cv=" << report.c_cv
            << " C_selected=" << report.c_selected << "\n";
  return 0;
}

int run_ate(const std::string& data_path, const std::string& config_path,
            const std::string& out, std::uint64_t seed, int m, int grid_size,
            const std::string& rule, bool dump_eic) {
  const json cfg = load_json_file(config_path);
  hal::CsvRoles roles = roles_from_config(cfg);
  if (roles.treatment.empty()) roles.treatment = "a";
  const hal::Dataset data = hal::read_csv_dataset(data_path, roles);

  hal::AteConfig acfg;
  acfg.outcome_loss = loss_from_config(cfg, "squared_error");
  acfg.undersmooth.rule = hal::rule_from_name(rule);
  acfg.m = m;
  acfg.gmin = cfg.value("gmin", acfg.gmin);
  apply_cv_config(acfg.cv, cfg, seed, grid_size);
  apply_caps(acfg.caps, cfg);

  const hal::AteEstimate est = hal::fit_ate(data, acfg);
  ensure_dir(out);
  hal::write_text_file(out + "/estimate.json", hal::ate_estimate_to_json(est) + "\n");
  hal::write_text_file(out + "/selector.json",
                       hal::selector_report_to_json(est.outcome_report) + "\n");
  hal::write_trace_csv(out + "/trace.csv", est.outcome_report);
  if (dump_eic) hal::write_eic_csv(out + "/eic.csv", est.eic);
  std::cout << "ate: psi=" << est.psi << " se=" << est.se << " ci=["
            << est.ci_lo << ", " << est.ci_hi << "]\n";
  return 0;
}

int run_density(const std::string& data_path, const std::string& column,
                const std::string& config_path, const std::string& out,
                std::uint64_t seed, int bins, int grid_size,
                const std::string& rule, bool dump_eic) {
  const json cfg = load_json_file(config_path);
  const hal::CsvTable table = hal::read_csv(data_path);
  std::size_t ci = 0;
  if (!column.empty()) {
    bool found = false;
    for (std::size_t i = 0; i < table.header.size(); ++i) {
      if (table.header[i] == column) {
        ci = i;
        found = true;
        break;
      }
    }
    if (!found) throw std::runtime_error("csv column not found: " + column);
  }
  std::vector<double> o;
  o.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    o.push_back(std::strtod(row.at(ci).c_str(), nullptr));
  }

  hal::DensityConfig dcfg;
  dcfg.undersmooth.rule = hal::rule_from_name(rule);
  apply_cv_config(dcfg.cv, cfg, seed, grid_size);
  dcfg.pad_fraction = cfg.value("pad_fraction", dcfg.pad_fraction);

  const hal::DensityFitResult res = hal::fit_density_hal(o, bins, dcfg);
  ensure_dir(out);
  hal::write_text_file(out + "/estimate.json",
                       hal::density_estimate_to_json(res.estimate, res.report) + "\n");
  hal::write_density_csv(out + "/density.csv", res.density);
  hal::write_trace_csv(out + "/trace.csv", res.report);
  if (dump_eic) hal::write_eic_csv(out + "/eic.csv", res.estimate.eic);
  std::cout << "density: psi=" << res.estimate.psi << " se=" << res.estimate.se
            << " shortfall=" << res.density.shortfall << "\n";
  return 0;
}

int run_simulate(const std::string& config_path, const std::string& out,
                 std::uint64_t seed, int threads, int grid_size,
                 const std::string& rule, int m) {
  const json cfg = load_json_file(config_path);
  const std::string kind_name = cfg.value("kind", "ate_sim61");
  hal::McConfig mc = hal::default_mc_config(hal::dgp_from_name(kind_name));
  if (cfg.contains("n_grid")) mc.n_grid = cfg.at("n_grid").get<std::vector<int>>();
  mc.replicates = cfg.value("replicates", mc.replicates);
  mc.base_seed = seed;
  mc.threads = threads;
  if (!rule.empty()) {
    mc.ate.undersmooth.rule = hal::rule_from_name(rule);
    mc.density.undersmooth.rule = mc.ate.undersmooth.rule;
  }
  if (grid_size > 0) {
    mc.ate.cv.grid_size = grid_size;
    mc.density.cv.grid_size = grid_size;
  }
  if (m >= 0) mc.ate.m = m;
  if (cfg.contains("estimator")) {
    const json& est = cfg.at("estimator");
    mc.ate.cv.folds = est.value("folds", mc.ate.cv.folds);
    mc.density.cv.folds = est.value("folds", mc.density.cv.folds);
    apply_caps(mc.ate.caps, est);
    if (est.contains("outcome_loss")) {
      mc.ate.outcome_loss =
          est.at("outcome_loss").get<std::string>() == "binomial_loglik"
              ? hal::LossFamily::binomial_loglik
              : hal::LossFamily::squared_error;
    }
  }
  if (cfg.contains("density")) {
    const json& d = cfg.at("density");
    mc.density_bins_small = d.value("bins_small", mc.density_bins_small);
    mc.density_bins_large = d.value("bins_large", mc.density_bins_large);
    mc.density_bins_threshold =
        d.value("bins_threshold", mc.density_bins_threshold);
  }

  const hal::McReport report = hal::run_monte_carlo(mc);
  hal::emit_report(report, out);
  std::cout << "simulate: " << report.replicates.size() << " replicate rows, "
            << (report.flagged_failed ? "FLAGGED FAILED" : "ok") << "\n";
  return report.flagged_failed ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tensor-spline L1 regression toolkit"};
  app.require_subcommand(1);

  std::string data_path, config_path, out = "hal_out", column, rule = "cv";
  std::uint64_t seed = 1;
  int threads = 1, grid_size = 0, m = 0, bins = 320;
  bool dump_eic = false;

  auto add_common = [&](CLI::App* sub, bool needs_data) {
    if (needs_data) {
      sub->add_option("--data", data_path, "input CSV with a header row")
          ->required();
    }
    sub->add_option("--config", config_path, "JSON configuration file");
    sub->add_option("--out", out, "output directory");
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--threads", threads, "worker threads");
    sub->add_option("--grid-size", grid_size, "penalty grid size");
    sub->add_option("--rule", rule, "selector rule: cv|global|sparse|targeted");
    sub->add_option("--m", m, "spline order");
  };

  CLI::App* fit = app.add_subcommand("fit", "HAL regression from CSV");
  add_common(fit, true);

  CLI::App* ate = app.add_subcommand("ate", "treatment-specific mean plug-in");
  add_common(ate, true);
  ate->add_flag("--eic", dump_eic, "write influence-curve values to eic.csv");

  CLI::App* density =
      app.add_subcommand("density", "integral of the squared density");
  add_common(density, true);
  density->add_option("--column", column, "CSV column holding the variable");
  density->add_option("--bins", bins, "equidistant bin count");
  density->add_flag("--eic", dump_eic, "write influence-curve values to eic.csv");

  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo study");
  add_common(simulate, false);

  CLI::App* plot = app.add_subcommand("plot", "regenerate SVGs from outputs");
  plot->add_option("--out", out, "directory holding replicates.csv + config.json");

  // subcommand defaults: ate/density default to the targeted rule
  rule = "cv";

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(fit)) {
      return run_fit(data_path, config_path, out, seed, m, grid_size, rule);
    }
    if (app.got_subcommand(ate)) {
      if (!ate->count("--rule")) rule = "targeted";
      return run_ate(data_path, config_path, out, seed, m, grid_size, rule,
                     dump_eic);
    }
    if (app.got_subcommand(density)) {
      if (!density->count("--rule")) rule = "targeted";
      return run_density(data_path, column, config_path, out, seed, bins,
                         grid_size, rule, dump_eic);
    }
    if (app.got_subcommand(simulate)) {
      if (!simulate->count("--rule")) rule.clear();
      return run_simulate(config_path, out, seed, threads, grid_size, rule,
                          simulate->count("--m") ? m : -1);
    }
    if (app.got_subcommand(plot)) {
      hal::emit_plots_from_files(out);
      std::cout << "plot: regenerated SVGs in " << out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
