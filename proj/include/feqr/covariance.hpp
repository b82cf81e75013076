#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "feqr/errors.hpp"
#include "feqr/numerics.hpp"
#include "feqr/panel.hpp"
#include "feqr/solver.hpp"

namespace feqr {

enum class KernelKind { Gaussian };

struct KernelSpec {
  KernelKind kind = KernelKind::Gaussian;
  double bandwidth = 1.0;
};

// Scaling regime of the sandwich: var(beta_j) is V_jj/T for the
// common-shock-robust estimator, V_jj/(NT) for the conventional one.
enum class RateRegime { RobustSqrtT, StandardSqrtNT };

struct CovarianceEstimate {
  Eigen::MatrixXd sigma_hat;      // p x p, symmetric PSD
  Eigen::MatrixXd gamma_mat_hat;  // p x p, raw (pre-symmetrization)
  Eigen::MatrixXd gamma_i_hat;    // N x p
  Eigen::VectorXd f_i_hat;        // N, all > 0
  Eigen::MatrixXd v_hat;          // p x p, symmetric
  RateRegime rate = RateRegime::RobustSqrtT;
  double bandwidth = 0.0;
  bool bandwidth_degenerate = false;  // sd(resid) = 0, floor applied
};

// K_h(u) = h^{-1} K(u/h), Gaussian K.
inline double kernel_weight(double u, const KernelSpec& spec) {
  if (!(spec.bandwidth > 0.0))
    throw Error(ErrorCode::InvalidArgument, "bandwidth must be positive");
  const double v = u / spec.bandwidth;
  constexpr double inv_sqrt_2pi = 0.3989422804014326779;
  return inv_sqrt_2pi * std::exp(-0.5 * v * v) / spec.bandwidth;
}

struct BandwidthResult {
  double value = 0.0;
  bool degenerate = false;
};

namespace detail {

// sd of all NT residuals pooled, denominator NT-1.
inline double pooled_residual_sd(const Eigen::MatrixXd& residuals) {
  const auto nt = static_cast<std::size_t>(residuals.size());
  if (nt < 2)
    throw Error(ErrorCode::InvalidArgument,
                "bandwidth needs at least 2 residuals, got " + std::to_string(nt));
  return sample_std_dev(nt, [&](std::size_t k) {
    return residuals(static_cast<Eigen::Index>(k) % residuals.rows(),
                     static_cast<Eigen::Index>(k) / residuals.rows());
  });
}

inline BandwidthResult silverman_from_sd(double sd, double sample_size) {
  BandwidthResult out;
  if (sd == 0.0) {
    out.value = 0.05;
    out.degenerate = true;
    return out;
  }
  out.value = std::max(1.06 * sd * std::pow(sample_size, -0.2), 0.05);
  return out;
}

}  // namespace detail

// Silverman rule of thumb h = 1.06 sd(resid) N^{-1/5}, floored at 0.05.
inline BandwidthResult silverman_bandwidth(const Eigen::MatrixXd& residuals,
                                           int n_units) {
  return detail::silverman_from_sd(detail::pooled_residual_sd(residuals),
                                   static_cast<double>(n_units));
}

// Variant with the pooled sample size NT in the exponent (non-default).
inline BandwidthResult silverman_bandwidth_nt(const Eigen::MatrixXd& residuals) {
  return detail::silverman_from_sd(detail::pooled_residual_sd(residuals),
                                   static_cast<double>(residuals.size()));
}

struct DensityGamma {
  Eigen::VectorXd f_i;      // N
  Eigen::MatrixXd gamma_i;  // N x p
};

// f_i = (1/T) sum_t K_h(eps_it);  gamma_i = (f_i T)^{-1} sum_t K_h(eps_it) X_it.
inline DensityGamma density_and_gamma(const PanelData& panel, const FeqrFit& fit,
                                      const KernelSpec& spec) {
  const int n = panel.n_units();
  const int t_len = panel.n_periods();
  const int p = panel.n_regressors();
  if (fit.residuals.rows() != n || fit.residuals.cols() != t_len)
    throw Error(ErrorCode::DimensionMismatch, "fit residuals do not match panel");

  DensityGamma out{Eigen::VectorXd(n), Eigen::MatrixXd(n, p)};
  for (int i = 0; i < n; ++i) {
    const double fsum = pairwise_sum(static_cast<std::size_t>(t_len), [&](std::size_t t) {
      return kernel_weight(fit.residuals(i, static_cast<int>(t)), spec);
    });
    if (!(fsum > 0.0))
      throw Error(ErrorCode::ZeroDensity,
                  "kernel density underflowed to zero for unit " + std::to_string(i));
    out.f_i(i) = fsum / t_len;
    for (int j = 0; j < p; ++j) {
      out.gamma_i(i, j) =
          pairwise_sum(static_cast<std::size_t>(t_len), [&](std::size_t t) {
            return kernel_weight(fit.residuals(i, static_cast<int>(t)), spec) *
                   panel.x(i, static_cast<int>(t))(j);
          }) /
          fsum;
    }
  }
  return out;
}

struct MHat {
  Eigen::MatrixXd rows;  // T x p, row t = m_Nt
  Eigen::VectorXd mean;  // p, m_bar
};

// m_Nt = (1/N) sum_i (tau - 1{eps_it <= 0})(X_it - gamma_i).
inline MHat m_hat(const PanelData& panel, const FeqrFit& fit,
                  const Eigen::MatrixXd& gamma_i, double tau) {
  const int n = panel.n_units();
  const int t_len = panel.n_periods();
  const int p = panel.n_regressors();
  if (gamma_i.rows() != n || gamma_i.cols() != p)
    throw Error(ErrorCode::DimensionMismatch, "gamma_i must be N x p");
  if (fit.residuals.rows() != n || fit.residuals.cols() != t_len)
    throw Error(ErrorCode::DimensionMismatch, "fit residuals do not match panel");

  MHat out{Eigen::MatrixXd(t_len, p), Eigen::VectorXd(p)};
  for (int t = 0; t < t_len; ++t) {
    for (int j = 0; j < p; ++j) {
      out.rows(t, j) =
          pairwise_sum(static_cast<std::size_t>(n), [&](std::size_t i) {
            const auto ii = static_cast<int>(i);
            const double w = fit.residuals(ii, t) <= 0.0 ? tau - 1.0 : tau;
            return w * (panel.x(ii, t)(j) - gamma_i(ii, j));
          }) /
          n;
    }
  }
  for (int j = 0; j < p; ++j)
    out.mean(j) = pairwise_sum(static_cast<std::size_t>(t_len),
                               [&](std::size_t t) {
                                 return out.rows(static_cast<int>(t), j);
                               }) /
                  t_len;
  return out;
}

// Sigma_N = (1/T) sum_t (m_Nt - m_bar)(m_Nt - m_bar)'.
inline Eigen::MatrixXd sigma_hat(const Eigen::MatrixXd& m_rows,
                                 const Eigen::VectorXd& m_bar) {
  const auto t_len = m_rows.rows();
  const auto p = m_rows.cols();
  if (m_bar.size() != p)
    throw Error(ErrorCode::DimensionMismatch, "m_bar must have p entries");
  Eigen::MatrixXd out(p, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index l = 0; l <= j; ++l) {
      const double v = pairwise_sum(static_cast<std::size_t>(t_len),
                                    [&](std::size_t t) {
                                      const auto tt = static_cast<Eigen::Index>(t);
                                      return (m_rows(tt, j) - m_bar(j)) *
                                             (m_rows(tt, l) - m_bar(l));
                                    }) /
                       static_cast<double>(t_len);
      out(j, l) = v;
      out(l, j) = v;
    }
  return out;
}

// Gamma_N = (1/NT) sum_i sum_t K_h(eps_it) X_it (X_it - gamma_i)'. Raw,
// unsymmetrized; assembly symmetrizes before inversion.
inline Eigen::MatrixXd gamma_matrix_hat(const PanelData& panel, const FeqrFit& fit,
                                        const Eigen::MatrixXd& gamma_i,
                                        const KernelSpec& spec) {
  const int n = panel.n_units();
  const int t_len = panel.n_periods();
  const int p = panel.n_regressors();
  if (gamma_i.rows() != n || gamma_i.cols() != p)
    throw Error(ErrorCode::DimensionMismatch, "gamma_i must be N x p");
  const auto nt = static_cast<std::size_t>(panel.n_obs());
  Eigen::MatrixXd out(p, p);
  for (int j = 0; j < p; ++j)
    for (int l = 0; l < p; ++l)
      out(j, l) = pairwise_sum(nt, [&](std::size_t k) {
                    const int i = static_cast<int>(k) / t_len;
                    const int t = static_cast<int>(k) % t_len;
                    return kernel_weight(fit.residuals(i, t), spec) *
                           panel.x(i, t)(j) * (panel.x(i, t)(l) - gamma_i(i, l));
                  }) /
                  static_cast<double>(nt);
  return out;
}

namespace detail {

// Inverse of the symmetrized Gamma via eigendecomposition, guarded at
// condition number 1e12.
inline Eigen::MatrixXd invert_gamma(const Eigen::MatrixXd& gamma_raw) {
  const Eigen::MatrixXd sym = 0.5 * (gamma_raw + gamma_raw.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const auto& ev = es.eigenvalues();
  const double amax = ev.array().abs().maxCoeff();
  const double amin = ev.array().abs().minCoeff();
  if (!(amin > 0.0) || amax / amin > 1e12)
    throw Error(ErrorCode::SingularGamma,
                "Gamma_N is numerically singular (|lambda| range [" +
                    std::to_string(amin) + ", " + std::to_string(amax) + "])");
  return es.eigenvectors() * ev.array().inverse().matrix().asDiagonal() *
         es.eigenvectors().transpose();
}

inline Eigen::MatrixXd sandwich(const Eigen::MatrixXd& bread_inv,
                                const Eigen::MatrixXd& meat) {
  Eigen::MatrixXd v = bread_inv * meat * bread_inv;
  return 0.5 * (v + v.transpose());
}

}  // namespace detail

// Robust sandwich V = Gamma^-1 Sigma Gamma^-1; var(beta_j) estimated by V_jj/T.
inline CovarianceEstimate robust_covariance(const PanelData& panel, const FeqrFit& fit,
                                            QuantileLevel tau, const KernelSpec& spec) {
  CovarianceEstimate out;
  auto dg = density_and_gamma(panel, fit, spec);
  const auto m = m_hat(panel, fit, dg.gamma_i, tau.value());
  out.sigma_hat = sigma_hat(m.rows, m.mean);
  out.gamma_mat_hat = gamma_matrix_hat(panel, fit, dg.gamma_i, spec);
  const Eigen::MatrixXd bread_inv = detail::invert_gamma(out.gamma_mat_hat);
  out.v_hat = detail::sandwich(bread_inv, out.sigma_hat);
  out.gamma_i_hat = std::move(dg.gamma_i);
  out.f_i_hat = std::move(dg.f_i);
  out.rate = RateRegime::RobustSqrtT;
  out.bandwidth = spec.bandwidth;
  return out;
}

// Conventional sandwich V = Gamma^-1 Omega Gamma^-1 with
// Omega = tau(1-tau)/(NT) sum (X_it-gamma_i)(X_it-gamma_i)';
// var(beta_j) estimated by V_jj/(NT).
inline CovarianceEstimate standard_covariance(const PanelData& panel,
                                              const FeqrFit& fit, QuantileLevel tau,
                                              const KernelSpec& spec) {
  const int t_len = panel.n_periods();
  const int p = panel.n_regressors();
  const auto nt = static_cast<std::size_t>(panel.n_obs());

  CovarianceEstimate out;
  auto dg = density_and_gamma(panel, fit, spec);
  const double tv = tau.value();
  Eigen::MatrixXd omega(p, p);
  for (int j = 0; j < p; ++j)
    for (int l = 0; l <= j; ++l) {
      const double v =
          tv * (1.0 - tv) *
          pairwise_sum(nt,
                       [&](std::size_t k) {
                         const int i = static_cast<int>(k) / t_len;
                         const int t = static_cast<int>(k) % t_len;
                         return (panel.x(i, t)(j) - dg.gamma_i(i, j)) *
                                (panel.x(i, t)(l) - dg.gamma_i(i, l));
                       }) /
          static_cast<double>(nt);
      omega(j, l) = v;
      omega(l, j) = v;
    }

  out.sigma_hat = omega;
  out.gamma_mat_hat = gamma_matrix_hat(panel, fit, dg.gamma_i, spec);
  const Eigen::MatrixXd bread_inv = detail::invert_gamma(out.gamma_mat_hat);
  out.v_hat = detail::sandwich(bread_inv, omega);
  out.gamma_i_hat = std::move(dg.gamma_i);
  out.f_i_hat = std::move(dg.f_i);
  out.rate = RateRegime::StandardSqrtNT;
  out.bandwidth = spec.bandwidth;
  return out;
}

}  // namespace feqr
