#pragma once

// Fixed-effects panel quantile regression with common-shock-robust
// covariance estimation, plus the Monte Carlo study harness.

#include "feqr/covariance.hpp"
#include "feqr/errors.hpp"
#include "feqr/inference.hpp"
#include "feqr/numerics.hpp"
#include "feqr/panel.hpp"
#include "feqr/panel_io.hpp"
#include "feqr/qrcore.hpp"
#include "feqr/report.hpp"
#include "feqr/rng.hpp"
#include "feqr/simulation.hpp"
#include "feqr/solver.hpp"
