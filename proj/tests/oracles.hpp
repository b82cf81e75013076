#pragma once

// Test-side reference implementations, independent of the library's
// computational paths: brute-force enumeration for the QR optimum, an
// erf-based normal CDF inverted by bisection, plain-loop covariance
// reductions, and a Kolmogorov-Smirnov statistic.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "feqr/panel.hpp"
#include "feqr/qrcore.hpp"

namespace oracles {

inline double erf_cdf(double x) { return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))); }

inline double erf_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

// Bisection inversion of the erf-based CDF; independent of the library's
// rational-approximation route.
inline double quantile_by_bisection(double p) {
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (erf_cdf(mid) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Plain-loop check objective (no pairwise summation).
inline double naive_objective(const feqr::PanelData& panel,
                              const Eigen::VectorXd& alpha,
                              const Eigen::VectorXd& beta, double tau) {
  double acc = 0.0;
  for (int i = 0; i < panel.n_units(); ++i)
    for (int t = 0; t < panel.n_periods(); ++t) {
      const double u = panel.y(i, t) - alpha(i) - panel.x(i, t).dot(beta);
      acc += u < 0.0 ? u * (tau - 1.0) : u * tau;
    }
  return acc / static_cast<double>(panel.n_obs());
}

struct EnumerationResult {
  double objective = std::numeric_limits<double>::infinity();
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
};

// Minimum over all basic solutions: every way of choosing N+p observations,
// solving the interpolation system, and evaluating the objective. The LP
// optimum is attained at such a vertex.
inline EnumerationResult qr_enumeration_minimum(const feqr::PanelData& panel,
                                                double tau) {
  const int n = panel.n_units();
  const int t_len = panel.n_periods();
  const int p = panel.n_regressors();
  const int nobs = n * t_len;
  const int q = n + p;

  EnumerationResult best;
  std::vector<int> pick(q);
  for (int j = 0; j < q; ++j) pick[j] = j;

  Eigen::MatrixXd sys(q, q);
  Eigen::VectorXd rhs(q);
  while (true) {
    sys.setZero();
    for (int r = 0; r < q; ++r) {
      const int k = pick[r];
      const int i = k / t_len;
      const int t = k % t_len;
      sys(r, i) = 1.0;
      for (int j = 0; j < p; ++j) sys(r, n + j) = panel.x(i, t)(j);
      rhs(r) = panel.y(i, t);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sys);
    if (lu.isInvertible()) {
      const Eigen::VectorXd theta = lu.solve(rhs);
      const Eigen::VectorXd alpha = theta.head(n);
      const Eigen::VectorXd beta = theta.tail(p);
      const double obj = naive_objective(panel, alpha, beta, tau);
      if (obj < best.objective) {
        best.objective = obj;
        best.alpha = alpha;
        best.beta = beta;
      }
    }
    // next combination
    int j = q - 1;
    while (j >= 0 && pick[j] == nobs - q + j) --j;
    if (j < 0) break;
    ++pick[j];
    for (int l = j + 1; l < q; ++l) pick[l] = pick[l - 1] + 1;
  }
  return best;
}

// Random tie-free panel from continuous distributions; std RNG, not the
// library's counter generator.
inline feqr::PanelData random_panel(std::mt19937_64& rng, int n, int t_len, int p,
                                    double x_scale = 2.0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(-x_scale, x_scale);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n) * t_len);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n) * t_len, p);
  for (int i = 0; i < n; ++i) {
    const double a = normal(rng);
    for (int t = 0; t < t_len; ++t) {
      const Eigen::Index k = static_cast<Eigen::Index>(i) * t_len + t;
      double mean = a;
      for (int j = 0; j < p; ++j) {
        x(k, j) = unif(rng);
        mean += 0.7 * x(k, j);
      }
      y(k) = mean + normal(rng);
    }
  }
  std::vector<std::string> units(n), times(t_len);
  for (int i = 0; i < n; ++i) units[i] = "u" + std::to_string(i);
  for (int t = 0; t < t_len; ++t) times[t] = "t" + std::to_string(t);
  return feqr::PanelData(std::move(y), std::move(x), n, t_len, std::move(units),
                         std::move(times));
}

// Two-sided KS distance of a sample against the standard normal.
inline double ks_statistic_normal(std::vector<double> draws) {
  std::sort(draws.begin(), draws.end());
  const double m = static_cast<double>(draws.size());
  double d = 0.0;
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const double cdf = erf_cdf(draws[i]);
    d = std::max(d, std::abs((static_cast<double>(i) + 1.0) / m - cdf));
    d = std::max(d, std::abs(cdf - static_cast<double>(i) / m));
  }
  return d;
}

}  // namespace oracles
