// feqr command line: fit panels, reproduce the Monte Carlo tables,
// generate synthetic panels. See FORMATS.md for file schemas and exit codes.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "feqr/feqr.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBadArgs = 2;
constexpr int kExitDataError = 3;
constexpr int kExitSolverError = 4;
constexpr int kExitStudyAborted = 5;

int exit_code_for(const feqr::Error& e) {
  switch (e.code()) {
    case feqr::ErrorCode::MissingFile:
    case feqr::ErrorCode::SchemaMismatch:
    case feqr::ErrorCode::MissingCell:
    case feqr::ErrorCode::DuplicateCell:
    case feqr::ErrorCode::NonFiniteValue:
    case feqr::ErrorCode::DuplicateId:
      return kExitDataError;
    case feqr::ErrorCode::StudyAborted:
      return kExitStudyAborted;
    case feqr::ErrorCode::InvalidArgument:
    case feqr::ErrorCode::IndexOutOfRange:
      return kExitBadArgs;
    default:
      return kExitSolverError;
  }
}

int resolve_workers(const std::optional<int>& cli_value, int config_value) {
  if (cli_value && *cli_value > 0) return *cli_value;
  if (const char* env = std::getenv("FEQR_WORKERS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  if (config_value > 0) return config_value;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct TauReport {
  double tau;
  const feqr::FeqrFit* fit;
  double bandwidth;
  bool bandwidth_degenerate;
  std::optional<feqr::CovarianceEstimate> robust;
  std::optional<feqr::CovarianceEstimate> standard;
  std::vector<feqr::ConfidenceInterval> ci_robust;
  std::vector<feqr::ConfidenceInterval> ci_standard;
};

void print_text_report(const std::vector<TauReport>& reports,
                       const feqr::PanelData& panel, double level, bool alphas) {
  std::printf("panel: N=%d T=%d p=%d\n", panel.n_units(), panel.n_periods(),
              panel.n_regressors());
  for (const auto& r : reports) {
    std::printf("\ntau = %g   (bandwidth %.6g%s)\n", r.tau, r.bandwidth,
                r.bandwidth_degenerate ? ", floored: sd(resid)=0" : "");
    std::printf("  objective %.10g, iterations %d, converged %s\n",
                r.fit->objective_value, r.fit->iterations,
                r.fit->converged ? "yes" : "no");
    std::printf("  certificate: max|H1|=%.3e (bound %.3e)  |H2|inf=%.3e (bound %.3e)  %s\n",
                r.fit->certificate.max_h1, r.fit->certificate.bound_h1,
                r.fit->certificate.h2_norm, r.fit->certificate.bound_h2,
                r.fit->certificate.passes ? "pass" : "FAIL");
    for (int j = 0; j < r.fit->theta.beta.size(); ++j) {
      std::printf("  beta[%d] = %.8g\n", j, r.fit->theta.beta(j));
      if (!r.ci_robust.empty())
        std::printf("    robust   se %.6g  %g%% CI [%.8g, %.8g]\n",
                    r.ci_robust[j].std_error, 100 * level, r.ci_robust[j].lower,
                    r.ci_robust[j].upper);
      if (!r.ci_standard.empty())
        std::printf("    standard se %.6g  %g%% CI [%.8g, %.8g]\n",
                    r.ci_standard[j].std_error, 100 * level, r.ci_standard[j].lower,
                    r.ci_standard[j].upper);
    }
    if (alphas) {
      std::printf("  alpha:");
      for (int i = 0; i < r.fit->theta.alpha.size(); ++i)
        std::printf(" %.8g", r.fit->theta.alpha(i));
      std::printf("\n");
    }
  }
}

nlohmann::json ci_to_json(const feqr::ConfidenceInterval& ci) {
  return {{"coefficient_index", ci.coefficient_index},
          {"estimate", ci.estimate},
          {"std_error", ci.std_error},
          {"lower", ci.lower},
          {"upper", ci.upper},
          {"level", ci.level},
          {"degenerate", ci.degenerate}};
}

void print_json_report(const std::vector<TauReport>& reports,
                       const feqr::PanelData& panel, bool alphas) {
  nlohmann::json out;
  out["n_units"] = panel.n_units();
  out["n_periods"] = panel.n_periods();
  out["n_regressors"] = panel.n_regressors();
  out["taus"] = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json jt;
    jt["tau"] = r.tau;
    jt["bandwidth"] = r.bandwidth;
    jt["bandwidth_degenerate"] = r.bandwidth_degenerate;
    jt["objective"] = r.fit->objective_value;
    jt["iterations"] = r.fit->iterations;
    jt["converged"] = r.fit->converged;
    jt["certificate"] = {{"max_h1", r.fit->certificate.max_h1},
                         {"h2_norm", r.fit->certificate.h2_norm},
                         {"bound_h1", r.fit->certificate.bound_h1},
                         {"bound_h2", r.fit->certificate.bound_h2},
                         {"passes", r.fit->certificate.passes}};
    jt["beta_hat"] = std::vector<double>(
        r.fit->theta.beta.data(), r.fit->theta.beta.data() + r.fit->theta.beta.size());
    if (alphas)
      jt["alpha_hat"] = std::vector<double>(
          r.fit->theta.alpha.data(),
          r.fit->theta.alpha.data() + r.fit->theta.alpha.size());
    nlohmann::json methods;
    if (!r.ci_robust.empty()) {
      nlohmann::json m;
      m["intervals"] = nlohmann::json::array();
      for (const auto& ci : r.ci_robust) m["intervals"].push_back(ci_to_json(ci));
      methods["robust"] = m;
    }
    if (!r.ci_standard.empty()) {
      nlohmann::json m;
      m["intervals"] = nlohmann::json::array();
      for (const auto& ci : r.ci_standard) m["intervals"].push_back(ci_to_json(ci));
      methods["standard"] = m;
    }
    jt["methods"] = methods;
    out["taus"].push_back(jt);
  }
  std::printf("%s\n", out.dump(2).c_str());
}

void print_csv_report(const std::vector<TauReport>& reports) {
  std::printf("tau,method,coefficient,estimate,std_error,lower,upper,level,bandwidth\n");
  for (const auto& r : reports) {
    auto emit = [&](const char* method, const std::vector<feqr::ConfidenceInterval>& cis) {
      for (const auto& ci : cis)
        std::printf("%s,%s,%d,%s,%s,%s,%s,%s,%s\n", fmt(r.tau).c_str(), method,
                    ci.coefficient_index, fmt(ci.estimate).c_str(),
                    fmt(ci.std_error).c_str(), fmt(ci.lower).c_str(),
                    fmt(ci.upper).c_str(), fmt(ci.level).c_str(),
                    fmt(r.bandwidth).c_str());
    };
    emit("robust", r.ci_robust);
    emit("standard", r.ci_standard);
  }
}

int cmd_fit(const std::string& data_path, std::vector<double> taus, double level,
            const std::string& method, const std::string& format, bool alphas,
            const std::string& bandwidth_rule) {
  if (taus.empty()) taus.push_back(0.5);
  std::vector<feqr::QuantileLevel> levels;
  for (double t : taus) levels.emplace_back(t);
  if (!(level > 0.0 && level < 1.0))
    throw feqr::Error(feqr::ErrorCode::InvalidArgument,
                      "confidence level must lie in (0,1)");

  const feqr::PanelData panel = feqr::load_panel(data_path);
  const auto path = feqr::fit_path(panel, levels);

  std::vector<TauReport> reports;
  for (std::size_t q = 0; q < path.size(); ++q) {
    if (!path[q].fit)
      throw feqr::Error(feqr::ErrorCode::DidNotConverge,
                        "tau=" + std::to_string(taus[q]) + ": " + path[q].error);
    const feqr::FeqrFit& fit = *path[q].fit;
    for (const auto& w : fit.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());

    TauReport rep{taus[q], &fit, 0.0, false, {}, {}, {}, {}};
    const auto bw = bandwidth_rule == "nt"
                        ? feqr::silverman_bandwidth_nt(fit.residuals)
                        : feqr::silverman_bandwidth(fit.residuals, panel.n_units());
    rep.bandwidth = bw.value;
    rep.bandwidth_degenerate = bw.degenerate;
    const feqr::KernelSpec spec{feqr::KernelKind::Gaussian, bw.value};
    if (method == "robust" || method == "both") {
      rep.robust = feqr::robust_covariance(panel, fit, levels[q], spec);
      rep.ci_robust = feqr::confidence_intervals(fit, *rep.robust, panel, level);
    }
    if (method == "standard" || method == "both") {
      rep.standard = feqr::standard_covariance(panel, fit, levels[q], spec);
      rep.ci_standard = feqr::confidence_intervals(fit, *rep.standard, panel, level);
    }
    reports.push_back(std::move(rep));
  }

  if (format == "json")
    print_json_report(reports, panel, alphas);
  else if (format == "csv")
    print_csv_report(reports);
  else
    print_text_report(reports, panel, level, alphas);
  return kExitOk;
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 const std::optional<int>& workers,
                 const std::optional<int>& replications) {
  feqr::StudyPlan plan = feqr::parse_study_config(config_path);
  plan.workers = resolve_workers(workers, plan.workers);
  if (replications) {
    if (*replications < 1)
      throw feqr::Error(feqr::ErrorCode::InvalidArgument,
                        "replications must be >= 1");
    plan.replications = *replications;
  }
  std::fprintf(stderr, "running %zu (N,T) cells x %zu taus, %d replications, %d workers\n",
               plan.nt_cells.size(), plan.dgp.taus.size(), plan.replications,
               plan.workers);

  const feqr::StudyReport report = feqr::run_study_plan(plan);

  std::filesystem::create_directories(out_dir);
  auto write = [&](const std::string& name, const std::string& content) {
    const auto p = std::filesystem::path(out_dir) / name;
    std::ofstream out(p, std::ios::binary);
    if (!out)
      throw feqr::Error(feqr::ErrorCode::MissingFile,
                        "cannot write '" + p.string() + "'");
    out << content;
  };
  write("report.csv", feqr::report_csv(report));
  write("table1.csv", feqr::table1_csv(report));
  write("table2.csv", feqr::table2_csv(report));
  std::printf("%s", feqr::render_text_tables(report).c_str());
  return kExitOk;
}

int cmd_generate(int n, int t, std::uint64_t seed, bool no_common_shock,
                 double beta, double gamma_scale, const std::string& out_path) {
  feqr::DgpConfig dgp;
  dgp.n_units = n;
  dgp.n_periods = t;
  dgp.base_seed = seed;
  dgp.common_shock = !no_common_shock;
  dgp.beta = beta;
  dgp.gamma_scale = gamma_scale;
  const auto panel = feqr::generate_panel(dgp, 0);
  feqr::save_panel(panel, out_path);
  std::fprintf(stderr, "wrote %d rows to %s\n", n * t, out_path.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fixed-effects panel quantile regression with common-shock-robust inference"};
  app.require_subcommand(1);

  auto* fit = app.add_subcommand("fit", "Fit FEQR on a panel CSV and report inference");
  std::string data_path, method = "both", bandwidth_rule = "n";
  std::vector<double> taus;
  double level = 0.95;
  bool as_json = false, as_csv = false, alphas = false;
  fit->add_option("--data", data_path, "panel CSV (unit,time,y,x1..xp)")->required();
  fit->add_option("--tau", taus, "quantile level(s), repeatable");
  fit->add_option("--level", level, "confidence level (default 0.95)");
  fit->add_option("--method", method, "robust|standard|both (default both)")
      ->check(CLI::IsMember({"robust", "standard", "both"}));
  fit->add_flag("--json", as_json, "machine-readable JSON on stdout");
  fit->add_flag("--csv", as_csv, "machine-readable CSV on stdout");
  fit->add_flag("--alphas", alphas, "include unit intercepts in the report");
  fit->add_option("--bandwidth-rule", bandwidth_rule, "n|nt exponent base (default n)")
      ->check(CLI::IsMember({"n", "nt"}));

  auto* sim = app.add_subcommand("simulate", "Run a Monte Carlo study from a config file");
  std::string config_path, out_dir = ".";
  std::optional<int> workers, replications;
  sim->add_option("--config", config_path, "study configuration file")->required();
  sim->add_option("--out", out_dir, "output directory (default .)");
  sim->add_option("--workers", workers, "worker thread count");
  sim->add_option("--replications", replications, "override the config's replication count");

  auto* gen = app.add_subcommand("generate", "Generate a synthetic panel CSV");
  int gn = 0, gt = 0;
  std::uint64_t gseed = 0;
  bool no_shock = false;
  double gbeta = 1.0, ggamma = 0.2;
  std::string gout;
  gen->add_option("--n", gn, "number of units")->required();
  gen->add_option("--t", gt, "number of periods")->required();
  gen->add_option("--seed", gseed, "base seed")->required();
  gen->add_flag("--no-common-shock", no_shock, "remove the common shock component");
  gen->add_option("--beta", gbeta, "slope (default 1)");
  gen->add_option("--gamma-scale", ggamma, "scale coefficient (default 0.2)");
  gen->add_option("--out", gout, "output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitBadArgs;
  }

  try {
    if (fit->parsed())
      return cmd_fit(data_path, taus, level, method,
                     as_json ? "json" : (as_csv ? "csv" : "text"), alphas,
                     bandwidth_rule);
    if (sim->parsed()) return cmd_simulate(config_path, out_dir, workers, replications);
    if (gen->parsed())
      return cmd_generate(gn, gt, gseed, no_shock, gbeta, ggamma, gout);
  } catch (const feqr::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitSolverError;
  }
  return kExitBadArgs;
}
