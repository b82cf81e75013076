#pragma once

#include <Eigen/Core>
#include <cmath>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "feqr/errors.hpp"

namespace feqr {

// Balanced N x T panel of outcomes and p regressors (no intercept column).
// Observations are stored in dense (unit, time) order: flat index i*T + t.
// Immutable after construction; safe to share across threads.
class PanelData {
 public:
  PanelData(Eigen::VectorXd y, Eigen::MatrixXd x, int n_units, int n_periods,
            std::vector<std::string> unit_ids, std::vector<std::string> time_ids)
      : n_units_(n_units),
        n_periods_(n_periods),
        n_regressors_(static_cast<int>(x.cols())),
        y_(std::move(y)),
        x_(std::move(x)),
        unit_ids_(std::move(unit_ids)),
        time_ids_(std::move(time_ids)) {
    if (n_units_ <= 0 || n_periods_ <= 0 || n_regressors_ <= 0)
      throw Error(ErrorCode::DimensionMismatch, "panel dimensions must be positive");
    const Eigen::Index nt = static_cast<Eigen::Index>(n_units_) * n_periods_;
    if (y_.size() != nt)
      throw Error(ErrorCode::DimensionMismatch,
                  "y has " + std::to_string(y_.size()) + " values, expected " +
                      std::to_string(nt));
    if (x_.rows() != nt)
      throw Error(ErrorCode::DimensionMismatch,
                  "x has " + std::to_string(x_.rows()) + " rows, expected " +
                      std::to_string(nt));
    if (static_cast<int>(unit_ids_.size()) != n_units_)
      throw Error(ErrorCode::DimensionMismatch, "unit_ids length != N");
    if (static_cast<int>(time_ids_.size()) != n_periods_)
      throw Error(ErrorCode::DimensionMismatch, "time_ids length != T");
  }

  int n_units() const { return n_units_; }
  int n_periods() const { return n_periods_; }
  int n_regressors() const { return n_regressors_; }
  Eigen::Index n_obs() const { return y_.size(); }

  Eigen::Index obs_index(int i, int t) const {
    return static_cast<Eigen::Index>(i) * n_periods_ + t;
  }

  double y(int i, int t) const { return y_(obs_index(i, t)); }
  auto x(int i, int t) const { return x_.row(obs_index(i, t)); }

  const Eigen::VectorXd& y_vec() const { return y_; }
  const Eigen::MatrixXd& x_mat() const { return x_; }

  const std::vector<std::string>& unit_ids() const { return unit_ids_; }
  const std::vector<std::string>& time_ids() const { return time_ids_; }

 private:
  int n_units_;
  int n_periods_;
  int n_regressors_;
  Eigen::VectorXd y_;   // NT, flat index i*T + t
  Eigen::MatrixXd x_;   // NT x p
  std::vector<std::string> unit_ids_;
  std::vector<std::string> time_ids_;
};

struct Violation {
  ErrorCode code;
  std::string where;
};

// Reports every invariant violation with its location; empty iff valid.
inline std::vector<Violation> validate(const PanelData& panel) {
  std::vector<Violation> out;
  const int n = panel.n_units();
  const int t_len = panel.n_periods();
  const int p = panel.n_regressors();

  for (int i = 0; i < n; ++i) {
    for (int t = 0; t < t_len; ++t) {
      if (!std::isfinite(panel.y(i, t)))
        out.push_back({ErrorCode::NonFiniteValue,
                       "y at (" + std::to_string(i) + "," + std::to_string(t) + ")"});
      for (int j = 0; j < p; ++j) {
        if (!std::isfinite(panel.x(i, t)(j)))
          out.push_back({ErrorCode::NonFiniteValue,
                         "x" + std::to_string(j + 1) + " at (" + std::to_string(i) +
                             "," + std::to_string(t) + ")"});
      }
    }
  }

  std::unordered_set<std::string> seen;
  for (const auto& id : panel.unit_ids()) {
    if (!seen.insert(id).second)
      out.push_back({ErrorCode::DuplicateId, "unit_id '" + id + "'"});
  }
  seen.clear();
  for (const auto& id : panel.time_ids()) {
    if (!seen.insert(id).second)
      out.push_back({ErrorCode::DuplicateId, "time_id '" + id + "'"});
  }
  return out;
}

// sup-norm of the regressor tensor, max over (i,t,k) of |x_itk|.
inline double regressor_bound(const PanelData& panel) {
  if (panel.x_mat().size() == 0) return 0.0;
  return panel.x_mat().array().abs().maxCoeff();
}

}  // namespace feqr
