#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "feqr/covariance.hpp"
#include "feqr/errors.hpp"
#include "feqr/inference.hpp"
#include "feqr/numerics.hpp"
#include "feqr/panel.hpp"
#include "feqr/rng.hpp"
#include "feqr/solver.hpp"

namespace feqr {

// Location-scale common-shock design:
//   Y_it = alpha_i + beta X_it + (1 + gamma X_it) U_it
//   X_it = chi2_it(3) + 0.3 alpha_i,  alpha_i ~ U(0,1)
//   U_it = (eps_it + eta_t)/sqrt(2),  eps, eta ~ N(0,1)
// With common_shock=false, U_it = eps_it (unit variance preserved).
struct DgpConfig {
  double beta = 1.0;
  double gamma_scale = 0.2;
  int n_units = 250;
  int n_periods = 25;
  std::vector<double> taus = {0.25, 0.5, 0.75};
  bool common_shock = true;
  std::uint64_t base_seed = 0;
};

enum class BandwidthRule { SilvermanN, SilvermanNT };

struct StudyConfig {
  DgpConfig dgp;
  int replications = 2000;
  double level = 0.95;
  BandwidthRule bandwidth_rule = BandwidthRule::SilvermanN;
  int workers = 1;
};

struct StudyCell {
  int n_units = 0;
  int n_periods = 0;
  double tau = 0.0;
  double bias = 0.0;
  double rmse = 0.0;
  double coverage_robust = 0.0;
  double coverage_standard = 0.0;
  double mean_ci_width_robust = 0.0;
  double mean_ci_width_standard = 0.0;
  int n_failed = 0;
  int n_success = 0;
  int n_cert_failed = 0;  // certificate failures among successful fits
};

struct StudyReport {
  std::vector<StudyCell> cells;
};

struct TauRecord {
  double tau = 0.0;
  bool failed = true;
  std::string error;
  double beta_hat = 0.0;
  bool covered_robust = false;
  bool covered_standard = false;
  double ci_width_robust = 0.0;
  double ci_width_standard = 0.0;
  bool certificate_passed = false;
  double se_robust = 0.0;
  double se_standard = 0.0;
};

inline void validate_config(const DgpConfig& dgp) {
  if (dgp.n_units < 2 || dgp.n_periods < 3)
    throw Error(ErrorCode::InvalidArgument,
                "DGP requires n_units >= 2 and n_periods >= 3");
  if (dgp.taus.empty())
    throw Error(ErrorCode::InvalidArgument, "taus must be nonempty");
  for (double t : dgp.taus)
    if (!(t > 0.0 && t < 1.0))
      throw Error(ErrorCode::InvalidArgument,
                  "tau " + std::to_string(t) + " outside (0,1)");
}

// beta(tau) = beta + gamma q_tau with q_tau the standard normal quantile.
inline double true_slope(double tau, double beta, double gamma_scale) {
  return beta + gamma_scale * normal_quantile(tau);
}

namespace detail {

// Fixed-order component streams under each replication stream.
enum : std::uint64_t { kAlphaStream = 0, kChiStream = 1, kEpsStream = 2, kEtaStream = 3 };

inline double normal_draw(const CounterRng& rng, std::uint64_t counter) {
  return normal_quantile(rng.uniform01(counter));
}

}  // namespace detail

// Deterministic function of (base_seed, replication_index); draw order is
// position-based so the panel is identical regardless of evaluation order.
inline PanelData generate_panel(const DgpConfig& dgp, std::uint64_t replication_index) {
  validate_config(dgp);
  const int n = dgp.n_units;
  const int t_len = dgp.n_periods;
  const std::uint64_t rep_key = CounterRng::child(dgp.base_seed, replication_index);
  const CounterRng alpha_rng(CounterRng::child(rep_key, detail::kAlphaStream));
  const CounterRng chi_rng(CounterRng::child(rep_key, detail::kChiStream));
  const CounterRng eps_rng(CounterRng::child(rep_key, detail::kEpsStream));
  const CounterRng eta_rng(CounterRng::child(rep_key, detail::kEtaStream));

  std::vector<double> eta(t_len, 0.0);
  if (dgp.common_shock)
    for (int t = 0; t < t_len; ++t) eta[t] = detail::normal_draw(eta_rng, t);

  const double inv_sqrt2 = 0.70710678118654752440;
  Eigen::VectorXd y(static_cast<Eigen::Index>(n) * t_len);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n) * t_len, 1);
  for (int i = 0; i < n; ++i) {
    const double alpha_i = alpha_rng.uniform01(i);
    for (int t = 0; t < t_len; ++t) {
      const std::uint64_t cell = static_cast<std::uint64_t>(i) * t_len + t;
      double chi2 = 0.0;
      for (std::uint64_t j = 0; j < 3; ++j) {
        const double z = detail::normal_draw(chi_rng, 3 * cell + j);
        chi2 += z * z;
      }
      const double xv = chi2 + 0.3 * alpha_i;
      const double eps = detail::normal_draw(eps_rng, cell);
      const double u = dgp.common_shock ? (eps + eta[t]) * inv_sqrt2 : eps;
      const Eigen::Index k = static_cast<Eigen::Index>(i) * t_len + t;
      x(k, 0) = xv;
      y(k) = alpha_i + dgp.beta * xv + (1.0 + dgp.gamma_scale * xv) * u;
    }
  }

  char buf[24];
  std::vector<std::string> unit_ids(n), time_ids(t_len);
  for (int i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof(buf), "u%06d", i);
    unit_ids[i] = buf;
  }
  for (int t = 0; t < t_len; ++t) {
    std::snprintf(buf, sizeof(buf), "t%06d", t);
    time_ids[t] = buf;
  }
  return PanelData(std::move(y), std::move(x), n, t_len, std::move(unit_ids),
                   std::move(time_ids));
}

// One replication: generate, fit the tau path, estimate both covariances,
// record coverage of the true slope. Failures are recorded, never thrown.
inline std::vector<TauRecord> run_replication(const StudyConfig& study,
                                              std::uint64_t replication_index) {
  const auto& dgp = study.dgp;
  const PanelData panel = generate_panel(dgp, replication_index);

  std::vector<QuantileLevel> taus;
  taus.reserve(dgp.taus.size());
  for (double t : dgp.taus) taus.emplace_back(t);

  std::vector<TauRecord> records(dgp.taus.size());
  const auto path = fit_path(panel, taus);
  for (std::size_t q = 0; q < path.size(); ++q) {
    TauRecord& rec = records[q];
    rec.tau = dgp.taus[q];
    if (!path[q].fit) {
      rec.error = path[q].error;
      continue;
    }
    const FeqrFit& fit = *path[q].fit;
    rec.certificate_passed = fit.certificate.passes;
    try {
      const BandwidthResult bw =
          study.bandwidth_rule == BandwidthRule::SilvermanN
              ? silverman_bandwidth(fit.residuals, panel.n_units())
              : silverman_bandwidth_nt(fit.residuals);
      const KernelSpec spec{KernelKind::Gaussian, bw.value};
      const auto cov_r = robust_covariance(panel, fit, taus[q], spec);
      const auto cov_s = standard_covariance(panel, fit, taus[q], spec);
      const auto ci_r = confidence_intervals(fit, cov_r, panel, study.level)[0];
      const auto ci_s = confidence_intervals(fit, cov_s, panel, study.level)[0];
      const double target = true_slope(rec.tau, dgp.beta, dgp.gamma_scale);
      rec.beta_hat = fit.theta.beta(0);
      rec.covered_robust = ci_r.lower <= target && target <= ci_r.upper;
      rec.covered_standard = ci_s.lower <= target && target <= ci_s.upper;
      rec.ci_width_robust = ci_r.upper - ci_r.lower;
      rec.ci_width_standard = ci_s.upper - ci_s.lower;
      rec.se_robust = ci_r.std_error;
      rec.se_standard = ci_s.std_error;
      rec.failed = false;
    } catch (const Error& e) {
      rec.error = e.what();
    }
  }
  return records;
}

// Aggregates one tau cell: bias E[b]-b(tau), RMSE sqrt(E[(b-b(tau))^2]),
// coverage as the success-weighted mean of the indicator flags.
inline StudyCell aggregate(const std::vector<TauRecord>& records, int n_units,
                           int n_periods, double beta, double gamma_scale) {
  StudyCell cell;
  cell.n_units = n_units;
  cell.n_periods = n_periods;

  std::vector<const TauRecord*> ok;
  for (const auto& r : records) {
    cell.tau = r.tau;
    if (r.failed) {
      ++cell.n_failed;
    } else {
      ok.push_back(&r);
      if (!r.certificate_passed) ++cell.n_cert_failed;
    }
  }
  if (ok.empty()) throw Error(ErrorCode::EmptyCell, "no successful replications");
  cell.n_success = static_cast<int>(ok.size());

  const double target = true_slope(cell.tau, beta, gamma_scale);
  const std::size_t m = ok.size();
  cell.bias = pairwise_mean(m, [&](std::size_t k) { return ok[k]->beta_hat; }) - target;
  cell.rmse = std::sqrt(pairwise_mean(m, [&](std::size_t k) {
    const double d = ok[k]->beta_hat - target;
    return d * d;
  }));
  cell.coverage_robust =
      pairwise_mean(m, [&](std::size_t k) { return ok[k]->covered_robust ? 1.0 : 0.0; });
  cell.coverage_standard = pairwise_mean(
      m, [&](std::size_t k) { return ok[k]->covered_standard ? 1.0 : 0.0; });
  cell.mean_ci_width_robust =
      pairwise_mean(m, [&](std::size_t k) { return ok[k]->ci_width_robust; });
  cell.mean_ci_width_standard =
      pairwise_mean(m, [&](std::size_t k) { return ok[k]->ci_width_standard; });
  return cell;
}

// Runs all replications over a worker pool. Each replication owns its RNG
// stream and slot, and aggregation folds in replication order, so the
// report is bit-identical for any worker count.
inline StudyReport run_study(const StudyConfig& study) {
  validate_config(study.dgp);
  if (study.replications < 1)
    throw Error(ErrorCode::InvalidArgument, "replications must be >= 1");
  const int workers = std::max(1, study.workers);
  const int reps = study.replications;

  std::vector<std::vector<TauRecord>> all(reps);
  std::atomic<int> next{0};
  auto worker_loop = [&]() {
    while (true) {
      const int r = next.fetch_add(1);
      if (r >= reps) break;
      all[r] = run_replication(study, static_cast<std::uint64_t>(r));
    }
  };
  if (workers == 1) {
    worker_loop();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int wk = 0; wk < workers; ++wk) pool.emplace_back(worker_loop);
    for (auto& th : pool) th.join();
  }

  StudyReport report;
  const auto n_taus = study.dgp.taus.size();
  for (std::size_t q = 0; q < n_taus; ++q) {
    std::vector<TauRecord> per_tau;
    per_tau.reserve(reps);
    for (int r = 0; r < reps; ++r) per_tau.push_back(all[r][q]);
    try {
      report.cells.push_back(aggregate(per_tau, study.dgp.n_units,
                                       study.dgp.n_periods, study.dgp.beta,
                                       study.dgp.gamma_scale));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::EmptyCell)
        throw Error(ErrorCode::StudyAborted,
                    "every replication failed for tau=" +
                        std::to_string(study.dgp.taus[q]));
      throw;
    }
  }
  return report;
}

}  // namespace feqr
