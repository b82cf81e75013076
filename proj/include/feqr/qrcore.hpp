#pragma once

#include <Eigen/Core>
#include <cmath>
#include <string>

#include "feqr/errors.hpp"
#include "feqr/numerics.hpp"
#include "feqr/panel.hpp"

namespace feqr {

// Quantile level tau, strictly inside (0,1).
class QuantileLevel {
 public:
  explicit QuantileLevel(double tau) : tau_(tau) {
    if (!(tau > 0.0 && tau < 1.0) || !std::isfinite(tau))
      throw Error(ErrorCode::InvalidArgument,
                  "quantile level must lie in (0,1), got " + std::to_string(tau));
  }
  double value() const { return tau_; }

 private:
  double tau_;
};

// Unit intercepts alpha (length N) and common slope beta (length p).
struct ParameterPoint {
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
};

namespace detail {

inline void check_dims(const PanelData& panel, const ParameterPoint& theta) {
  if (theta.alpha.size() != panel.n_units())
    throw Error(ErrorCode::DimensionMismatch,
                "alpha has " + std::to_string(theta.alpha.size()) +
                    " entries, panel has N=" + std::to_string(panel.n_units()));
  if (theta.beta.size() != panel.n_regressors())
    throw Error(ErrorCode::DimensionMismatch,
                "beta has " + std::to_string(theta.beta.size()) +
                    " entries, panel has p=" + std::to_string(panel.n_regressors()));
}

}  // namespace detail

// Check loss rho_tau(u) = u * (tau - 1{u < 0}).
inline double check_loss(double u, QuantileLevel tau) {
  return u < 0.0 ? u * (tau.value() - 1.0) : u * tau.value();
}

// eps_it = Y_it - alpha_i - X_it' beta.
inline Eigen::MatrixXd residuals(const PanelData& panel, const ParameterPoint& theta) {
  detail::check_dims(panel, theta);
  const int n = panel.n_units();
  const int t_len = panel.n_periods();
  Eigen::MatrixXd out(n, t_len);
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < t_len; ++t)
      out(i, t) = panel.y(i, t) - theta.alpha(i) - panel.x(i, t).dot(theta.beta);
  return out;
}

// (1/NT) sum_i sum_t rho_tau(Y_it - alpha_i - X_it' beta).
inline double objective(const PanelData& panel, const ParameterPoint& theta,
                        QuantileLevel tau) {
  detail::check_dims(panel, theta);
  const int t_len = panel.n_periods();
  const auto nt = static_cast<std::size_t>(panel.n_obs());
  const double total = pairwise_sum(nt, [&](std::size_t k) {
    const int i = static_cast<int>(k) / t_len;
    const int t = static_cast<int>(k) % t_len;
    return check_loss(panel.y(i, t) - theta.alpha(i) - panel.x(i, t).dot(theta.beta),
                      tau);
  });
  return total / static_cast<double>(nt);
}

namespace detail {

// tau - 1{r <= 0}; the fitted-value indicator 1{Y <= alpha + X'beta} is
// evaluated through the residual, tie counts as below.
inline double score_weight(double residual, double tau) {
  return residual <= 0.0 ? tau - 1.0 : tau;
}

inline double subgrad_h1_from_residuals(const Eigen::MatrixXd& resid, int i,
                                        double tau) {
  const auto t_len = static_cast<std::size_t>(resid.cols());
  return pairwise_sum(t_len, [&](std::size_t t) {
           return score_weight(resid(i, static_cast<int>(t)), tau);
         }) /
         static_cast<double>(t_len);
}

inline Eigen::VectorXd subgrad_h2_from_residuals(const PanelData& panel,
                                                 const Eigen::MatrixXd& resid,
                                                 double tau) {
  const int t_len = panel.n_periods();
  const int p = panel.n_regressors();
  const auto nt = static_cast<std::size_t>(panel.n_obs());
  Eigen::VectorXd out(p);
  for (int j = 0; j < p; ++j) {
    out(j) = pairwise_sum(nt, [&](std::size_t k) {
               const int i = static_cast<int>(k) / t_len;
               const int t = static_cast<int>(k) % t_len;
               return score_weight(resid(i, t), tau) * panel.x(i, t)(j);
             }) /
             static_cast<double>(nt);
  }
  return out;
}

}  // namespace detail

// H^(1)_Ni = (1/T) sum_t (tau - 1{Y_it <= alpha_i + X_it' beta}).
inline double subgrad_h1(const PanelData& panel, int i, const ParameterPoint& theta,
                         QuantileLevel tau) {
  detail::check_dims(panel, theta);
  if (i < 0 || i >= panel.n_units())
    throw Error(ErrorCode::IndexOutOfRange,
                "unit index " + std::to_string(i) + " outside [0," +
                    std::to_string(panel.n_units()) + ")");
  const Eigen::MatrixXd resid = residuals(panel, theta);
  return detail::subgrad_h1_from_residuals(resid, i, tau.value());
}

// H^(2)_N = (1/NT) sum_i sum_t (tau - 1{Y_it <= alpha_i + X_it' beta}) X_it.
inline Eigen::VectorXd subgrad_h2(const PanelData& panel, const ParameterPoint& theta,
                                  QuantileLevel tau) {
  detail::check_dims(panel, theta);
  const Eigen::MatrixXd resid = residuals(panel, theta);
  return detail::subgrad_h2_from_residuals(panel, resid, tau.value());
}

}  // namespace feqr
