#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "feqr/simulation.hpp"
#include "feqr/solver.hpp"
#include "oracles.hpp"

using namespace feqr;

namespace {

PanelData tiny_panel(const std::vector<double>& y, const std::vector<double>& x,
                     int n, int t_len) {
  Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), y.size());
  Eigen::MatrixXd xm = Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
  std::vector<std::string> units(n), times(t_len);
  for (int i = 0; i < n; ++i) units[i] = "u" + std::to_string(i);
  for (int t = 0; t < t_len; ++t) times[t] = "t" + std::to_string(t);
  return PanelData(yv, xm, n, t_len, units, times);
}

}  // namespace

TEST_CASE("two points, two parameters: exact interpolation") {
  const auto panel = tiny_panel({1, 3}, {0, 1}, 1, 2);
  const auto fit = fit_feqr(panel, QuantileLevel(0.5));
  CHECK(fit.theta.alpha(0) == Catch::Approx(1.0).margin(1e-9));
  CHECK(fit.theta.beta(0) == Catch::Approx(2.0).margin(1e-9));
  CHECK(fit.objective_value == Catch::Approx(0.0).margin(1e-12));
  CHECK(fit.converged);
  CHECK(fit.certificate.passes);
}

TEST_CASE("fit matches the basic-solution enumeration oracle") {
  std::mt19937_64 rng(2024);
  const double taus[3] = {0.25, 0.5, 0.75};
  for (int rep = 0; rep < 40; ++rep) {
    const int n = 1 + static_cast<int>(rng() % 3);
    const int t_len = 3 + static_cast<int>(rng() % 3);
    const auto panel = oracles::random_panel(rng, n, t_len, 1);
    const double tau = taus[rep % 3];
    const auto oracle = oracles::qr_enumeration_minimum(panel, tau);
    const auto fit = fit_feqr(panel, QuantileLevel(tau));
    INFO("rep " << rep << " N=" << n << " T=" << t_len << " tau=" << tau);
    CHECK(std::abs(fit.objective_value - oracle.objective) <= 1e-9);
  }
}

TEST_CASE("fit invariants: stored values match recomputation") {
  std::mt19937_64 rng(31);
  const auto panel = oracles::random_panel(rng, 6, 9, 2);
  const QuantileLevel tau(0.4);
  const auto fit = fit_feqr(panel, tau);
  CHECK(fit.objective_value ==
        Catch::Approx(objective(panel, fit.theta, tau)).epsilon(1e-12));
  CHECK(fit.residuals == residuals(panel, fit.theta));
  if (fit.converged) CHECK(fit.certificate.passes);
}

TEST_CASE("certificate at good and bad points") {
  // exact-interpolation fit from the trivial example
  const auto panel = tiny_panel({1, 3}, {0, 1}, 1, 2);
  const auto fit = fit_feqr(panel, QuantileLevel(0.5));
  const auto cert = certify(panel, fit);
  CHECK(cert.passes);
  CHECK(cert.max_h1 <= 0.5 + 1e-12);

  // theta = 0 far from the optimum: all residuals positive, H1 = tau
  std::vector<double> y(10), x(10);
  for (int t = 0; t < 10; ++t) {
    y[t] = 100.0 + t;
    x[t] = 0.1 * t;
  }
  const auto far = tiny_panel(y, x, 1, 10);
  ParameterPoint zero;
  zero.alpha = Eigen::VectorXd::Zero(1);
  zero.beta = Eigen::VectorXd::Zero(1);
  const auto bad = certify_at(far, zero, QuantileLevel(0.5), 1e-6);
  CHECK_FALSE(bad.passes);
  CHECK(bad.max_h1 == Catch::Approx(0.5));
  CHECK(bad.bound_h1 == Catch::Approx(2.0 * 2 / 10.0 + 1e-6));

  // an oracle-verified optimal basic solution passes with tol_cert = 0
  std::mt19937_64 rng(77);
  for (int rep = 0; rep < 10; ++rep) {
    const auto p2 = oracles::random_panel(rng, 2, 5, 1);
    const auto oracle = oracles::qr_enumeration_minimum(p2, 0.25);
    ParameterPoint th{oracle.alpha, oracle.beta};
    const auto c = certify_at(p2, th, QuantileLevel(0.25), 0.0);
    CHECK(c.passes);
  }
}

TEST_CASE("fit_path warm starts agree with cold starts") {
  std::mt19937_64 rng(41);
  const auto panel = oracles::random_panel(rng, 8, 12, 1);
  const std::vector<QuantileLevel> taus{QuantileLevel(0.25), QuantileLevel(0.5),
                                        QuantileLevel(0.75)};
  const auto path = fit_path(panel, taus);
  REQUIRE(path.size() == 3);
  for (std::size_t q = 0; q < 3; ++q) {
    REQUIRE(path[q].fit.has_value());
    const auto cold = fit_feqr(panel, taus[q]);
    CHECK(std::abs(path[q].fit->objective_value - cold.objective_value) <= 1e-9);
  }

  const auto single = fit_path(panel, {QuantileLevel(0.5)});
  REQUIRE(single.size() == 1);
  const auto direct = fit_feqr(panel, QuantileLevel(0.5));
  CHECK(single[0].fit->objective_value == direct.objective_value);
  CHECK(single[0].fit->theta.beta == direct.theta.beta);

  CHECK_THROWS_AS(fit_path(panel, {}), Error);
}

TEST_CASE("scale equivariance of the optimal objective") {
  std::mt19937_64 rng(59);
  const auto panel = oracles::random_panel(rng, 4, 6, 1);
  const QuantileLevel tau(0.5);
  const auto fit = fit_feqr(panel, tau);

  const double c = 2.0;
  Eigen::VectorXd yc = c * panel.y_vec();
  PanelData scaled(yc, panel.x_mat(), 4, 6, panel.unit_ids(), panel.time_ids());
  const auto fit_c = fit_feqr(scaled, tau);
  CHECK(fit_c.objective_value == Catch::Approx(c * fit.objective_value).epsilon(1e-12));

  // the scaled original parameters attain the scaled optimum
  ParameterPoint thc;
  thc.alpha = c * fit.theta.alpha;
  thc.beta = c * fit.theta.beta;
  CHECK(objective(scaled, thc, tau) ==
        Catch::Approx(fit_c.objective_value).epsilon(1e-12));
}

TEST_CASE("per-unit shifts leave the optimal objective unchanged") {
  std::mt19937_64 rng(61);
  const auto panel = oracles::random_panel(rng, 3, 7, 1);
  const QuantileLevel tau(0.3);
  const auto fit = fit_feqr(panel, tau);

  Eigen::VectorXd shift(3);
  shift << 2.5, -1.0, 0.75;
  Eigen::VectorXd ys = panel.y_vec();
  for (int i = 0; i < 3; ++i)
    for (int t = 0; t < 7; ++t) ys(i * 7 + t) += shift(i);
  PanelData shifted(ys, panel.x_mat(), 3, 7, panel.unit_ids(), panel.time_ids());
  const auto fit_s = fit_feqr(shifted, tau);
  CHECK(fit_s.objective_value == Catch::Approx(fit.objective_value).margin(1e-12));

  ParameterPoint ths;
  ths.alpha = fit.theta.alpha + shift;
  ths.beta = fit.theta.beta;
  CHECK(objective(shifted, ths, tau) ==
        Catch::Approx(fit_s.objective_value).margin(1e-12));
}

TEST_CASE("fitted objective is the minimum over random probes") {
  std::mt19937_64 rng(67);
  const auto panel = oracles::random_panel(rng, 5, 8, 2);
  const QuantileLevel tau(0.65);
  const auto fit = fit_feqr(panel, tau);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int probe = 0; probe < 100; ++probe) {
    ParameterPoint th;
    th.alpha = fit.theta.alpha;
    th.beta = fit.theta.beta;
    for (int i = 0; i < 5; ++i) th.alpha(i) += 0.3 * normal(rng);
    for (int j = 0; j < 2; ++j) th.beta(j) += 0.3 * normal(rng);
    CHECK(fit.objective_value <= objective(panel, th, tau) + 1e-12);
  }
}

TEST_CASE("regressor constant within every unit is singular") {
  // x_it = c_i: collinear with the unit intercepts
  std::vector<double> y(12), x(12);
  std::mt19937_64 rng(71);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < 3; ++i)
    for (int t = 0; t < 4; ++t) {
      y[i * 4 + t] = normal(rng);
      x[i * 4 + t] = 1.0 + i;
    }
  const auto panel = tiny_panel(y, x, 3, 4);
  try {
    fit_feqr(panel, QuantileLevel(0.5));
    FAIL("expected SingularNormalEquations");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularNormalEquations);
  }
}

TEST_CASE("short panels warn but still fit") {
  const auto panel = tiny_panel({1, 3}, {0, 1}, 1, 2);  // T = p + 1
  const auto fit = fit_feqr(panel, QuantileLevel(0.5));
  REQUIRE_FALSE(fit.warnings.empty());
}

TEST_CASE("fit on a generated study panel recovers the slope roughly") {
  DgpConfig dgp;
  dgp.n_units = 150;
  dgp.n_periods = 30;
  dgp.base_seed = 5;
  const auto panel = generate_panel(dgp, 2);
  const auto fit = fit_feqr(panel, QuantileLevel(0.5));
  CHECK(fit.converged);
  CHECK(std::abs(fit.theta.beta(0) - 1.0) < 0.25);
}
