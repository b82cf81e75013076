#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "feqr/errors.hpp"
#include "feqr/panel.hpp"
#include "feqr/qrcore.hpp"

namespace feqr {

// Subgradient optimality certificate. At an exact vertex solution the
// counting argument gives, with probability 1 under continuous data,
//   sup_i |H^(1)_Ni| <= 2(p+1)/T,  ||H^(2)_N||_inf <= 2(p+1) sup|x| / T.
struct Certificate {
  double max_h1 = 0.0;
  double h2_norm = 0.0;
  double bound_h1 = 0.0;
  double bound_h2 = 0.0;
  bool passes = false;
};

struct SolverOptions {
  int max_iterations = 200;
  double duality_gap_tol = 1e-9;
  double tol_cert = 1e-6;
  bool refine = true;
};

struct FeqrFit {
  QuantileLevel tau;
  ParameterPoint theta;
  double objective_value = 0.0;
  Eigen::MatrixXd residuals;  // N x T
  Certificate certificate;
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

// Evaluates the certificate at an arbitrary parameter point.
inline Certificate certify_at(const PanelData& panel, const ParameterPoint& theta,
                              QuantileLevel tau, double tol_cert) {
  detail::check_dims(panel, theta);
  const Eigen::MatrixXd resid = residuals(panel, theta);
  const int n = panel.n_units();
  const int p = panel.n_regressors();
  const double t_len = panel.n_periods();

  Certificate cert;
  for (int i = 0; i < n; ++i)
    cert.max_h1 = std::max(
        cert.max_h1, std::abs(detail::subgrad_h1_from_residuals(resid, i, tau.value())));
  const Eigen::VectorXd h2 = detail::subgrad_h2_from_residuals(panel, resid, tau.value());
  cert.h2_norm = h2.size() ? h2.array().abs().maxCoeff() : 0.0;
  cert.bound_h1 = 2.0 * (p + 1) / t_len + tol_cert;
  cert.bound_h2 = 2.0 * (p + 1) * regressor_bound(panel) / t_len + tol_cert;
  cert.passes = cert.max_h1 <= cert.bound_h1 && cert.h2_norm <= cert.bound_h2;
  return cert;
}

inline Certificate certify(const PanelData& panel, const FeqrFit& fit,
                           double tol_cert = 1e-6) {
  return certify_at(panel, fit.theta, fit.tau, tol_cert);
}

namespace detail {

// Normal equations A diag(d) A' for the FEQR design: column (i,t) of A is
// the unit indicator e_i stacked over X_it. The alpha block is diagonal,
// so the solve reduces to a dense p x p Schur complement.
struct FeNormalEquations {
  Eigen::VectorXd d_alpha;  // N, per-unit sums of d
  Eigen::MatrixXd m;        // N x p, per-unit d-weighted regressor sums
  Eigen::MatrixXd schur;    // p x p
  Eigen::LLT<Eigen::MatrixXd> llt;

  // Returns false when the Schur complement is not positive definite.
  bool build(const PanelData& panel, const Eigen::ArrayXd& d) {
    const int n = panel.n_units();
    const int t_len = panel.n_periods();
    const int p = panel.n_regressors();
    const auto& x = panel.x_mat();

    d_alpha.setZero(n);
    m.setZero(n, p);
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(p, p);
    Eigen::Index k = 0;
    for (int i = 0; i < n; ++i) {
      double di_sum = 0.0;
      for (int t = 0; t < t_len; ++t, ++k) {
        const double dk = d(k);
        di_sum += dk;
        for (int j = 0; j < p; ++j) {
          const double mj = dk * x(k, j);
          m(i, j) += mj;
          for (int l = 0; l <= j; ++l) s(j, l) += mj * x(k, l);
        }
      }
      d_alpha(i) = di_sum;
    }
    s = s.selfadjointView<Eigen::Lower>();

    schur.noalias() = s - m.transpose() * (m.array().colwise() / d_alpha.array()).matrix();
    llt.compute(schur);
    return llt.info() == Eigen::Success;
  }

  // Condition number of the Schur complement; used for the collinearity check.
  double schur_condition() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(schur, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    if (lmin <= 0.0) return std::numeric_limits<double>::infinity();
    return lmax / lmin;
  }

  void solve(const Eigen::VectorXd& r_alpha, const Eigen::VectorXd& r_beta,
             Eigen::VectorXd& u_alpha, Eigen::VectorXd& u_beta) const {
    Eigen::VectorXd rhs = r_beta;
    rhs.noalias() -= m.transpose() * (r_alpha.array() / d_alpha.array()).matrix();
    u_beta = llt.solve(rhs);
    u_alpha = ((r_alpha - m * u_beta).array() / d_alpha.array()).matrix();
  }
};

// out_alpha[i] = sum_t v_(i,t); out_beta = X' v.
inline void mul_design(const PanelData& panel, const Eigen::ArrayXd& v,
                       Eigen::VectorXd& out_alpha, Eigen::VectorXd& out_beta) {
  const int n = panel.n_units();
  const int t_len = panel.n_periods();
  const int p = panel.n_regressors();
  const auto& x = panel.x_mat();
  out_alpha.resize(n);
  out_beta.setZero(p);
  Eigen::Index k = 0;
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int t = 0; t < t_len; ++t, ++k) {
      const double vk = v(k);
      acc += vk;
      for (int j = 0; j < p; ++j) out_beta(j) += vk * x(k, j);
    }
    out_alpha(i) = acc;
  }
}

// v_(i,t) = y_alpha[i] + X_it' y_beta.
inline void mul_design_t(const PanelData& panel, const Eigen::VectorXd& y_alpha,
                         const Eigen::VectorXd& y_beta, Eigen::ArrayXd& out) {
  const int n = panel.n_units();
  const int t_len = panel.n_periods();
  const int p = panel.n_regressors();
  const auto& x = panel.x_mat();
  out.resize(panel.n_obs());
  Eigen::Index k = 0;
  for (int i = 0; i < n; ++i) {
    const double ai = y_alpha(i);
    for (int t = 0; t < t_len; ++t, ++k) {
      double acc = ai;
      for (int j = 0; j < p; ++j) acc += x(k, j) * y_beta(j);
      out(k) = acc;
    }
  }
}

struct IpResult {
  ParameterPoint theta;
  int iterations = 0;
  bool gap_converged = false;
};

// Frisch-Newton predictor-corrector interior point on the bounded dual
//   min c'x  s.t.  A x = (1-tau) A 1,  0 <= x <= 1,  c = -y.
// The regression coefficients are the negated equality multipliers.
inline IpResult solve_interior_point(const PanelData& panel, QuantileLevel tau,
                                     const SolverOptions& opts,
                                     const FeqrFit* warm_start) {
  constexpr double step_damp = 0.99995;
  constexpr double big = 1e20;
  const int n_units = panel.n_units();
  const int t_len = panel.n_periods();
  const int p = panel.n_regressors();
  const Eigen::Index n = panel.n_obs();
  const double tv = tau.value();

  const Eigen::ArrayXd c = -panel.y_vec().array();
  Eigen::VectorXd b_alpha = Eigen::VectorXd::Constant(n_units, (1.0 - tv) * t_len);
  Eigen::VectorXd b_beta = (1.0 - tv) * panel.x_mat().colwise().sum().transpose();

  const double scale = 1.0 + c.abs().mean();
  const double gap_tol = opts.duality_gap_tol * static_cast<double>(n) * scale;

  Eigen::ArrayXd x = Eigen::ArrayXd::Constant(n, 1.0 - tv);
  Eigen::VectorXd y_alpha(n_units), y_beta(p);

  FeNormalEquations ne;
  Eigen::ArrayXd d = Eigen::ArrayXd::Ones(n);
  if (!ne.build(panel, d) || ne.schur_condition() > 1e12)
    throw Error(ErrorCode::SingularNormalEquations,
                "regressors are collinear with the unit-intercept space");

  if (warm_start != nullptr) {
    // Warm the equality multipliers from the previous fit; the dual vector
    // keeps its primal-feasible cold start A x = b.
    y_alpha = -warm_start->theta.alpha;
    y_beta = -warm_start->theta.beta;
  } else {
    Eigen::VectorXd ac_alpha, ac_beta;
    mul_design(panel, c, ac_alpha, ac_beta);
    ne.solve(ac_alpha, ac_beta, y_alpha, y_beta);
  }

  Eigen::ArrayXd s(n);
  mul_design_t(panel, y_alpha, y_beta, s);
  s = c - s;

  const double fudge = 1e-10 * scale;
  Eigen::ArrayXd z = s.max(0.0) + (s.abs() < fudge).cast<double>() * fudge;
  Eigen::ArrayXd w = (-s).max(0.0) + (s.abs() < fudge).cast<double>() * fudge;
  s = 1.0 - x;

  double gap = (z * x).sum() + (w * s).sum();

  Eigen::ArrayXd dsv(n), dx(n), dss(n), dz(n), dw(n), dr(n), u(n), tmp(n);
  Eigen::ArrayXd inv_x(n), inv_s(n);
  Eigen::VectorXd rhs_alpha(n_units), rhs_beta(p), dy_alpha(n_units), dy_beta(p);
  Eigen::VectorXd add_alpha(n_units), add_beta(p);

  int it = 0;
  while (gap > gap_tol && it < opts.max_iterations) {
    ++it;
    inv_x = 1.0 / x;
    inv_s = 1.0 / s;
    d = 1.0 / (z * inv_x + w * inv_s);
    dsv = z - w;

    // rhs = b - A x + A (d .* dsv), in one design pass
    tmp = d * dsv - x;
    mul_design(panel, tmp, rhs_alpha, rhs_beta);
    rhs_alpha += b_alpha;
    rhs_beta += b_beta;

    if (!ne.build(panel, d)) break;
    ne.solve(rhs_alpha, rhs_beta, dy_alpha, dy_beta);

    mul_design_t(panel, dy_alpha, dy_beta, u);
    dx = d * (u - dsv);
    dss = -dx;
    dz = -z * (dx * inv_x + 1.0);
    dw = -w * (dss * inv_s + 1.0);

    double deltap = big, deltad = big;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (dx(k) < 0.0) deltap = std::min(deltap, -x(k) / dx(k));
      if (dss(k) < 0.0) deltap = std::min(deltap, -s(k) / dss(k));
      if (dz(k) < 0.0) deltad = std::min(deltad, -z(k) / dz(k));
      if (dw(k) < 0.0) deltad = std::min(deltad, -w(k) / dw(k));
    }
    deltap = std::min(step_damp * deltap, 1.0);
    deltad = std::min(step_damp * deltad, 1.0);

    if (std::min(deltap, deltad) < 1.0) {
      // Mehrotra corrector, reusing the factorization
      double mu = (z * x).sum() + (w * s).sum();
      const double g = mu + deltap * (dx * z).sum() + deltad * (dz * x).sum() +
                       deltap * deltad * (dx * dz).sum() + deltap * (dss * w).sum() +
                       deltad * (dw * s).sum() + deltap * deltad * (dss * dw).sum();
      mu = mu * std::pow(g / mu, 3) / (2.0 * static_cast<double>(n));

      dr = d * (mu * (inv_s - inv_x) + dx * dz * inv_x - dss * dw * inv_s);
      mul_design(panel, dr, add_alpha, add_beta);
      ne.solve(rhs_alpha + add_alpha, rhs_beta + add_beta, dy_alpha, dy_beta);
      mul_design_t(panel, dy_alpha, dy_beta, u);

      deltap = big;
      deltad = big;
      for (Eigen::Index k = 0; k < n; ++k) {
        const double dxdz = dx(k) * dz(k);
        const double dsdw = dss(k) * dw(k);
        dx(k) = d(k) * (u(k) - z(k) + w(k)) - dr(k);
        dss(k) = -dx(k);
        dz(k) = -z(k) + (mu - z(k) * dx(k) - dxdz) * inv_x(k);
        dw(k) = -w(k) + (mu - w(k) * dss(k) - dsdw) * inv_s(k);
        if (dx(k) < 0.0) deltap = std::min(deltap, -x(k) / dx(k));
        if (dss(k) < 0.0) deltap = std::min(deltap, -s(k) / dss(k));
        if (dz(k) < 0.0) deltad = std::min(deltad, -z(k) / dz(k));
        if (dw(k) < 0.0) deltad = std::min(deltad, -w(k) / dw(k));
      }
      deltap = std::min(step_damp * deltap, 1.0);
      deltad = std::min(step_damp * deltad, 1.0);
    }

    x += deltap * dx;
    s += deltap * dss;
    y_alpha += deltad * dy_alpha;
    y_beta += deltad * dy_beta;
    z += deltad * dz;
    w += deltad * dw;
    gap = (z * x).sum() + (w * s).sum();
  }

  IpResult out;
  out.theta.alpha = -y_alpha;
  out.theta.beta = -y_beta;
  out.iterations = it;
  out.gap_converged = gap <= gap_tol;
  return out;
}

// k-th order statistic with k = ceil(tau*T): the left endpoint of the
// per-unit minimizer interval, always an observed value.
inline double tau_order_statistic(std::vector<double>& v, double tau) {
  const auto t_len = v.size();
  auto k = static_cast<std::size_t>(
      std::ceil(tau * static_cast<double>(t_len) - 1e-9));
  k = std::min(std::max<std::size_t>(k, 1), t_len);
  std::nth_element(v.begin(), v.begin() + (k - 1), v.end());
  return v[k - 1];
}

// Exact per-unit intercept update: alpha_i = tau-quantile of y_it - x_it'b.
// Weakly improves the objective for any fixed slope.
inline void polish_alpha(const PanelData& panel, double tau, ParameterPoint& theta) {
  const int t_len = panel.n_periods();
  std::vector<double> v(t_len);
  for (int i = 0; i < panel.n_units(); ++i) {
    for (int t = 0; t < t_len; ++t)
      v[t] = panel.y(i, t) - panel.x(i, t).dot(theta.beta);
    theta.alpha(i) = tau_order_statistic(v, tau);
  }
}

// Crossover: snap an interior-point iterate to the nearby basic solution.
// Picks the per-unit minimum-|residual| anchors plus p more near-zero
// residual observations whose anchor-differenced regressor rows are
// independent, solves the p x p interpolation system for beta, then sets
// each alpha_i to the exact per-unit quantile.
inline std::optional<ParameterPoint> refine_to_vertex(const PanelData& panel,
                                                      double tau,
                                                      const ParameterPoint& theta) {
  const int n = panel.n_units();
  const int t_len = panel.n_periods();
  const int p = panel.n_regressors();

  Eigen::MatrixXd resid(n, t_len);
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < t_len; ++t)
      resid(i, t) = panel.y(i, t) - theta.alpha(i) - panel.x(i, t).dot(theta.beta);

  std::vector<int> anchor(n, 0);
  for (int i = 0; i < n; ++i) {
    double best = std::abs(resid(i, 0));
    for (int t = 1; t < t_len; ++t)
      if (std::abs(resid(i, t)) < best) {
        best = std::abs(resid(i, t));
        anchor[i] = t;
      }
  }

  struct Cand {
    double abs_r;
    int i, t;
  };
  std::vector<Cand> cands;
  cands.reserve(static_cast<std::size_t>(n) * (t_len - 1));
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < t_len; ++t)
      if (t != anchor[i]) cands.push_back({std::abs(resid(i, t)), i, t});
  if (static_cast<int>(cands.size()) < p) return std::nullopt;
  std::sort(cands.begin(), cands.end(),
            [](const Cand& a, const Cand& b) { return a.abs_r < b.abs_r; });

  // Greedy rank build over anchor-differenced rows (modified Gram-Schmidt).
  const double xb = regressor_bound(panel);
  const double indep_tol = 1e-9 * (1.0 + xb);
  Eigen::MatrixXd basis(p, p), rows(p, p);
  Eigen::VectorXd rhs(p);
  int nsel = 0;
  for (const auto& cd : cands) {
    if (nsel == p) break;
    Eigen::VectorXd g =
        (panel.x(cd.i, cd.t) - panel.x(cd.i, anchor[cd.i])).transpose();
    Eigen::VectorXd h = g;
    for (int r = 0; r < nsel; ++r) h -= basis.row(r).dot(h) * basis.row(r).transpose();
    const double norm = h.norm();
    if (norm <= indep_tol) continue;
    basis.row(nsel) = (h / norm).transpose();
    rows.row(nsel) = g.transpose();
    rhs(nsel) =
        panel.y(cd.i, cd.t) - panel.y(cd.i, anchor[cd.i]);
    ++nsel;
  }
  if (nsel < p) return std::nullopt;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(rows);
  if (!lu.isInvertible()) return std::nullopt;

  ParameterPoint refined;
  refined.beta = lu.solve(rhs);
  refined.alpha.resize(n);
  polish_alpha(panel, tau, refined);
  return refined;
}

}  // namespace detail

// Minimizes (1/NT) sum rho_tau(Y_it - alpha_i - X_it'beta) over (alpha, beta).
inline FeqrFit fit_feqr(const PanelData& panel, QuantileLevel tau,
                        const SolverOptions& opts = {},
                        const FeqrFit* warm_start = nullptr) {
  FeqrFit fit{tau, {}, 0.0, {}, {}, 0, false, {}};
  if (panel.n_periods() < panel.n_regressors() + 2)
    fit.warnings.push_back("T < p+2: identification is fragile");

  auto ip = detail::solve_interior_point(panel, tau, opts, warm_start);
  fit.iterations = ip.iterations;

  ParameterPoint theta = std::move(ip.theta);
  if (opts.refine) {
    double best = objective(panel, theta, tau);
    ParameterPoint polished = theta;
    detail::polish_alpha(panel, tau.value(), polished);
    const double obj_pol = objective(panel, polished, tau);
    if (obj_pol <= best) {
      theta = std::move(polished);
      best = obj_pol;
    }
    if (auto vertex = detail::refine_to_vertex(panel, tau.value(), theta)) {
      const double obj_v = objective(panel, *vertex, tau);
      if (obj_v <= best * (1.0 + 1e-12) + 1e-15) {
        theta = std::move(*vertex);
      }
    }
  }

  fit.theta = std::move(theta);
  fit.residuals = residuals(panel, fit.theta);
  fit.objective_value = objective(panel, fit.theta, tau);
  fit.certificate = certify_at(panel, fit.theta, tau, opts.tol_cert);
  fit.converged = ip.gap_converged && fit.certificate.passes;
  return fit;
}

struct PathEntry {
  QuantileLevel tau;
  std::optional<FeqrFit> fit;
  std::string error;  // empty on success
};

// Fits a sequence of quantile levels, warm-starting each from the previous
// solution. Failures are recorded per level; remaining levels continue.
inline std::vector<PathEntry> fit_path(const PanelData& panel,
                                       const std::vector<QuantileLevel>& taus,
                                       const SolverOptions& opts = {}) {
  if (taus.empty())
    throw Error(ErrorCode::InvalidArgument, "fit_path requires at least one tau");
  std::vector<PathEntry> out;
  out.reserve(taus.size());
  const FeqrFit* prev = nullptr;
  for (const auto& tau : taus) {
    PathEntry entry{tau, std::nullopt, ""};
    try {
      entry.fit = fit_feqr(panel, tau, opts, prev);
    } catch (const Error& e) {
      entry.error = e.what();
    }
    out.push_back(std::move(entry));
    prev = out.back().fit ? &*out.back().fit : nullptr;
  }
  return out;
}

}  // namespace feqr
