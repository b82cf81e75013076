#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "feqr/errors.hpp"
#include "feqr/simulation.hpp"

namespace feqr {

// A study grid: the cross product of n_units and n_periods lists, sharing
// one DGP and estimation setup.
struct StudyPlan {
  DgpConfig dgp;  // n_units/n_periods here are placeholders, overridden per cell
  std::vector<std::pair<int, int>> nt_cells;
  int replications = 2000;
  double level = 0.95;
  BandwidthRule bandwidth_rule = BandwidthRule::SilvermanN;
  int workers = 1;
};

namespace detail {

inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream iss(s);
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}

inline double to_double(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument,
                "config key '" + key + "': bad number '" + s + "'");
  }
}

inline long long to_int(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument,
                "config key '" + key + "': bad integer '" + s + "'");
  }
}

}  // namespace detail

// Flat key-value study configuration. Keys match the config field names:
//   beta, gamma_scale, n_units, n_periods, taus, common_shock, base_seed,
//   replications, level, bandwidth_rule, workers
// n_units, n_periods and taus accept space-separated lists; `#` comments.
inline StudyPlan parse_study_config(std::istream& in) {
  StudyPlan plan;
  std::vector<int> n_list{plan.dgp.n_units}, t_list{plan.dgp.n_periods};
  bool n_seen = false, t_seen = false;

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (!detail::split_ws(line).empty())
        throw Error(ErrorCode::InvalidArgument,
                    "config line " + std::to_string(line_no) + ": expected key = value");
      continue;
    }
    auto keys = detail::split_ws(line.substr(0, eq));
    auto vals = detail::split_ws(line.substr(eq + 1));
    if (keys.size() != 1 || vals.empty())
      throw Error(ErrorCode::InvalidArgument,
                  "config line " + std::to_string(line_no) + ": expected key = value");
    const std::string& key = keys[0];

    if (key == "beta") {
      plan.dgp.beta = detail::to_double(vals[0], key);
    } else if (key == "gamma_scale") {
      plan.dgp.gamma_scale = detail::to_double(vals[0], key);
    } else if (key == "n_units") {
      n_list.clear();
      for (const auto& v : vals) n_list.push_back(static_cast<int>(detail::to_int(v, key)));
      n_seen = true;
    } else if (key == "n_periods") {
      t_list.clear();
      for (const auto& v : vals) t_list.push_back(static_cast<int>(detail::to_int(v, key)));
      t_seen = true;
    } else if (key == "taus") {
      plan.dgp.taus.clear();
      for (const auto& v : vals) plan.dgp.taus.push_back(detail::to_double(v, key));
    } else if (key == "common_shock") {
      if (vals[0] == "true")
        plan.dgp.common_shock = true;
      else if (vals[0] == "false")
        plan.dgp.common_shock = false;
      else
        throw Error(ErrorCode::InvalidArgument,
                    "config key 'common_shock': expected true or false");
    } else if (key == "base_seed") {
      plan.dgp.base_seed = static_cast<std::uint64_t>(detail::to_int(vals[0], key));
    } else if (key == "replications") {
      plan.replications = static_cast<int>(detail::to_int(vals[0], key));
    } else if (key == "level") {
      plan.level = detail::to_double(vals[0], key);
    } else if (key == "bandwidth_rule") {
      if (vals[0] == "silverman_n")
        plan.bandwidth_rule = BandwidthRule::SilvermanN;
      else if (vals[0] == "silverman_nt")
        plan.bandwidth_rule = BandwidthRule::SilvermanNT;
      else
        throw Error(ErrorCode::InvalidArgument,
                    "config key 'bandwidth_rule': expected silverman_n or silverman_nt");
    } else if (key == "workers") {
      plan.workers = static_cast<int>(detail::to_int(vals[0], key));
    } else {
      throw Error(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
    }
  }
  (void)n_seen;
  (void)t_seen;
  for (int n : n_list)
    for (int t : t_list) plan.nt_cells.emplace_back(n, t);
  if (plan.replications < 1)
    throw Error(ErrorCode::InvalidArgument, "replications must be >= 1");
  if (!(plan.level > 0.0 && plan.level < 1.0))
    throw Error(ErrorCode::InvalidArgument, "level must lie in (0,1)");
  return plan;
}

inline StudyPlan parse_study_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open '" + path + "'");
  return parse_study_config(in);
}

// Runs every (N,T) cell of the plan and concatenates the per-tau cells.
inline StudyReport run_study_plan(const StudyPlan& plan) {
  StudyReport report;
  for (const auto& [n, t] : plan.nt_cells) {
    StudyConfig cfg;
    cfg.dgp = plan.dgp;
    cfg.dgp.n_units = n;
    cfg.dgp.n_periods = t;
    cfg.replications = plan.replications;
    cfg.level = plan.level;
    cfg.bandwidth_rule = plan.bandwidth_rule;
    cfg.workers = plan.workers;
    auto cell_report = run_study(cfg);
    for (auto& c : cell_report.cells) report.cells.push_back(std::move(c));
  }
  return report;
}

// Full report, one row per cell, columns in declaration order.
inline std::string report_csv(const StudyReport& report) {
  std::string out =
      "n_units,n_periods,tau,bias,rmse,coverage_robust,coverage_standard,"
      "mean_ci_width_robust,mean_ci_width_standard,n_failed\n";
  for (const auto& c : report.cells) {
    out += std::to_string(c.n_units) + ',' + std::to_string(c.n_periods) + ',' +
           detail::fmt_g17(c.tau) + ',' + detail::fmt_g17(c.bias) + ',' +
           detail::fmt_g17(c.rmse) + ',' + detail::fmt_g17(c.coverage_robust) + ',' +
           detail::fmt_g17(c.coverage_standard) + ',' +
           detail::fmt_g17(c.mean_ci_width_robust) + ',' +
           detail::fmt_g17(c.mean_ci_width_standard) + ',' +
           std::to_string(c.n_failed) + '\n';
  }
  return out;
}

// Inverse of report_csv; round-trips exactly at 17 significant digits.
inline StudyReport parse_report_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) ||
      line != "n_units,n_periods,tau,bias,rmse,coverage_robust,coverage_standard,"
              "mean_ci_width_robust,mean_ci_width_standard,n_failed")
    throw Error(ErrorCode::SchemaMismatch, "not a study report CSV");
  StudyReport report;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    std::vector<std::string> toks;
    while (std::getline(ls, tok, ',')) toks.push_back(tok);
    if (toks.size() != 10)
      throw Error(ErrorCode::SchemaMismatch,
                  "report row has " + std::to_string(toks.size()) + " fields");
    StudyCell c;
    c.n_units = static_cast<int>(detail::to_int(toks[0], "n_units"));
    c.n_periods = static_cast<int>(detail::to_int(toks[1], "n_periods"));
    c.tau = detail::to_double(toks[2], "tau");
    c.bias = detail::to_double(toks[3], "bias");
    c.rmse = detail::to_double(toks[4], "rmse");
    c.coverage_robust = detail::to_double(toks[5], "coverage_robust");
    c.coverage_standard = detail::to_double(toks[6], "coverage_standard");
    c.mean_ci_width_robust = detail::to_double(toks[7], "mean_ci_width_robust");
    c.mean_ci_width_standard = detail::to_double(toks[8], "mean_ci_width_standard");
    c.n_failed = static_cast<int>(detail::to_int(toks[9], "n_failed"));
    report.cells.push_back(c);
  }
  return report;
}

inline StudyReport parse_report_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open '" + path + "'");
  return parse_report_csv(in);
}

namespace detail {

// Distinct taus in first-appearance order; cells grouped by (N,T).
struct TableLayout {
  std::vector<double> taus;
  std::vector<std::pair<int, int>> nts;
  std::map<std::pair<std::pair<int, int>, double>, const StudyCell*> at;
};

inline TableLayout layout(const StudyReport& report) {
  TableLayout l;
  for (const auto& c : report.cells) {
    const std::pair<int, int> nt{c.n_units, c.n_periods};
    bool have_tau = false;
    for (double t : l.taus) have_tau |= (t == c.tau);
    if (!have_tau) l.taus.push_back(c.tau);
    bool have_nt = false;
    for (const auto& x : l.nts) have_nt |= (x == nt);
    if (!have_nt) l.nts.push_back(nt);
    l.at[{nt, c.tau}] = &c;
  }
  return l;
}

}  // namespace detail

// Bias/RMSE view, one row per (N,T), per-tau column pairs.
inline std::string table1_csv(const StudyReport& report) {
  const auto l = detail::layout(report);
  std::string out = "n_units,n_periods";
  for (double t : l.taus)
    out += ",bias_tau=" + detail::fmt_g(t) + ",rmse_tau=" + detail::fmt_g(t);
  out += '\n';
  for (const auto& nt : l.nts) {
    out += std::to_string(nt.first) + ',' + std::to_string(nt.second);
    for (double t : l.taus) {
      const auto it = l.at.find({nt, t});
      if (it == l.at.end()) {
        out += ",,";
      } else {
        out += ',' + detail::fmt_g17(it->second->bias) + ',' +
               detail::fmt_g17(it->second->rmse);
      }
    }
    out += '\n';
  }
  return out;
}

// Coverage view, one row per (N,T), per-tau robust/standard column pairs.
inline std::string table2_csv(const StudyReport& report) {
  const auto l = detail::layout(report);
  std::string out = "n_units,n_periods";
  for (double t : l.taus)
    out += ",robust_tau=" + detail::fmt_g(t) + ",standard_tau=" + detail::fmt_g(t);
  out += '\n';
  for (const auto& nt : l.nts) {
    out += std::to_string(nt.first) + ',' + std::to_string(nt.second);
    for (double t : l.taus) {
      const auto it = l.at.find({nt, t});
      if (it == l.at.end()) {
        out += ",,";
      } else {
        out += ',' + detail::fmt_g17(it->second->coverage_robust) + ',' +
               detail::fmt_g17(it->second->coverage_standard);
      }
    }
    out += '\n';
  }
  return out;
}

// Fixed-width text rendering of both tables.
inline std::string render_text_tables(const StudyReport& report) {
  const auto l = detail::layout(report);
  char buf[64];
  std::string out;

  out += "Bias and RMSE\n";
  out += "  (N,T)        ";
  for (double t : l.taus) {
    std::snprintf(buf, sizeof(buf), "tau=%-5g bias     rmse   ", t);
    out += buf;
  }
  out += '\n';
  for (const auto& nt : l.nts) {
    std::snprintf(buf, sizeof(buf), "  (%d,%d)%*s", nt.first, nt.second,
                  static_cast<int>(
                      std::max<std::ptrdiff_t>(1, 13 - std::to_string(nt.first).size() -
                                                       std::to_string(nt.second).size() - 3)),
                  "");
    out += buf;
    for (double t : l.taus) {
      const auto it = l.at.find({nt, t});
      if (it == l.at.end()) {
        out += "        --       --   ";
      } else {
        std::snprintf(buf, sizeof(buf), "        %8.4f %7.4f  ", it->second->bias,
                      it->second->rmse);
        out += buf;
      }
    }
    out += '\n';
  }

  out += "\nCoverage (nominal level per config)\n";
  out += "  (N,T)        ";
  for (double t : l.taus) {
    std::snprintf(buf, sizeof(buf), "tau=%-5g robust   standard ", t);
    out += buf;
  }
  out += '\n';
  for (const auto& nt : l.nts) {
    std::snprintf(buf, sizeof(buf), "  (%d,%d)%*s", nt.first, nt.second,
                  static_cast<int>(
                      std::max<std::ptrdiff_t>(1, 13 - std::to_string(nt.first).size() -
                                                       std::to_string(nt.second).size() - 3)),
                  "");
    out += buf;
    for (double t : l.taus) {
      const auto it = l.at.find({nt, t});
      if (it == l.at.end()) {
        out += "        --       --     ";
      } else {
        std::snprintf(buf, sizeof(buf), "        %6.3f   %6.3f   ",
                      it->second->coverage_robust, it->second->coverage_standard);
        out += buf;
      }
    }
    out += '\n';
  }
  return out;
}

}  // namespace feqr
