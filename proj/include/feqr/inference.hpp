#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "feqr/covariance.hpp"
#include "feqr/errors.hpp"
#include "feqr/solver.hpp"

namespace feqr {

inline double normal_pdf(double x) {
  constexpr double inv_sqrt_2pi = 0.3989422804014326779;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

// Phi^{-1}(prob): Acklam's rational approximation (|rel err| < 1.2e-9)
// polished with one Newton step against the erfc-based CDF.
inline double normal_quantile(double prob) {
  if (!(prob > 0.0 && prob < 1.0))
    throw Error(ErrorCode::InvalidArgument,
                "normal_quantile requires prob in (0,1), got " + std::to_string(prob));

  static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                  -2.759285104469687e+02, 1.383577518672690e+02,
                                  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                  -1.556989798598866e+02, 6.680131188771972e+01,
                                  -1.328068155288572e+01};
  static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                  -2.400758277161838e+00, -2.549732539343734e+00,
                                  4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                  2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (prob < p_low) {
    const double q = std::sqrt(-2.0 * std::log(prob));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (prob <= 1.0 - p_low) {
    const double q = prob - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - prob));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  const double err = normal_cdf(x) - prob;
  x -= err / normal_pdf(x);
  return x;
}

struct ConfidenceInterval {
  int coefficient_index = 0;
  double estimate = 0.0;
  double std_error = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.0;
  RateRegime method = RateRegime::RobustSqrtT;
  bool degenerate = false;  // std_error clamped to 0, zero-width interval
};

// Standard errors at the covariance estimate's own rate:
//   RobustSqrtT     se_j = sqrt(V_jj / T)
//   StandardSqrtNT  se_j = sqrt(V_jj / (N T))
struct StdErrorResult {
  Eigen::VectorXd se;
  std::vector<bool> clamped;  // per coefficient, tiny negative V_jj set to 0
};

inline StdErrorResult std_errors(const CovarianceEstimate& cov, int n_units,
                                 int n_periods) {
  const auto p = cov.v_hat.rows();
  const double scale =
      cov.rate == RateRegime::RobustSqrtT
          ? static_cast<double>(n_periods)
          : static_cast<double>(n_units) * static_cast<double>(n_periods);
  const double trace = cov.v_hat.trace();
  StdErrorResult out{Eigen::VectorXd(p), std::vector<bool>(p, false)};
  for (Eigen::Index j = 0; j < p; ++j) {
    double vjj = cov.v_hat(j, j);
    if (vjj < 0.0) {
      if (vjj < -1e-12 * std::max(trace, 1.0))
        throw Error(ErrorCode::NegativeVariance,
                    "V[" + std::to_string(j) + "," + std::to_string(j) +
                        "] = " + std::to_string(vjj));
      vjj = 0.0;
      out.clamped[j] = true;
    }
    out.se(j) = std::sqrt(vjj / scale);
  }
  return out;
}

// beta_j +/- z_{(1+level)/2} * se_j for each coefficient.
inline std::vector<ConfidenceInterval> confidence_intervals(const FeqrFit& fit,
                                                            const CovarianceEstimate& cov,
                                                            const PanelData& panel,
                                                            double level) {
  if (!(level > 0.0 && level < 1.0))
    throw Error(ErrorCode::InvalidArgument,
                "confidence level must lie in (0,1), got " + std::to_string(level));
  const auto se = std_errors(cov, panel.n_units(), panel.n_periods());
  const double z = normal_quantile(0.5 * (1.0 + level));
  std::vector<ConfidenceInterval> out;
  out.reserve(fit.theta.beta.size());
  for (Eigen::Index j = 0; j < fit.theta.beta.size(); ++j) {
    ConfidenceInterval ci;
    ci.coefficient_index = static_cast<int>(j);
    ci.estimate = fit.theta.beta(j);
    ci.std_error = se.se(j);
    ci.lower = ci.estimate - z * ci.std_error;
    ci.upper = ci.estimate + z * ci.std_error;
    ci.level = level;
    ci.method = cov.rate;
    ci.degenerate = (ci.std_error == 0.0);
    out.push_back(ci);
  }
  return out;
}

}  // namespace feqr
