#pragma once

// Ordinary least squares and fit-quality metrics.
//
// Columns are rescaled to unit norm before factorization so that features
// spanning many orders of magnitude (seconds per FLOP next to seconds of
// fixed overhead) stay well conditioned. Coefficients are returned in the
// caller's original units.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "hyperloss/errors.hpp"

namespace hyperloss {

struct DesignMatrix {
  std::vector<std::vector<double>> rows;
  std::vector<double> targets;
  // Optional column labels used in error messages; defaults to x0, x1, ...
  std::vector<std::string> names;
};

struct FitReport {
  double slope = 0;
  double intercept = 0;
  double r2_pearson = 0;
  double r2_raw = 0;
  std::size_t count = 0;
};

namespace detail {

// Relative residual below which a unit-norm column counts as lying in the
// span of the columns before it.
inline constexpr double kRankTolerance = 1e-10;

inline std::string column_name(const DesignMatrix& m, std::size_t j) {
  if (j < m.names.size()) return m.names[j];
  return "x" + std::to_string(j);
}

}  // namespace detail

// Minimizes |X b - y|^2. With with_intercept, a constant column is appended
// and its coefficient is the last element of the result.
inline std::vector<double> least_squares_fit(const DesignMatrix& m, bool with_intercept) {
  const std::size_t rows = m.rows.size();
  if (rows == 0) throw ValidationError("design matrix has no rows");
  if (m.targets.size() != rows) throw ValidationError("design matrix rows and targets differ in length");
  const std::size_t features = m.rows.front().size();
  const std::size_t cols = features + (with_intercept ? 1 : 0);
  if (cols == 0) throw ValidationError("design matrix has no columns");
  if (rows < cols) {
    throw ValidationError("design matrix has " + std::to_string(rows) + " rows for " + std::to_string(cols) +
                          " unknowns");
  }

  // Internal column order: intercept first, so a feature colliding with it
  // is the one reported.
  const std::size_t offset = with_intercept ? 1 : 0;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows));
  for (std::size_t i = 0; i < rows; ++i) {
    const auto& row = m.rows[i];
    if (row.size() != features) throw ValidationError("design matrix row " + std::to_string(i) + " has wrong length");
    if (with_intercept) x(i, 0) = 1.0;
    for (std::size_t j = 0; j < features; ++j) {
      if (!std::isfinite(row[j])) throw ValidationError("non-finite value in design matrix row " + std::to_string(i));
      x(i, j + offset) = row[j];
    }
    if (!std::isfinite(m.targets[i])) throw ValidationError("non-finite target in row " + std::to_string(i));
    y(i) = m.targets[i];
  }
  auto name_of = [&](std::size_t internal) {
    if (with_intercept && internal == 0) return std::string("intercept");
    return detail::column_name(m, internal - offset);
  };

  Eigen::VectorXd scale(static_cast<Eigen::Index>(cols));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    scale(j) = x.col(j).norm();
    if (scale(j) == 0.0) {
      const auto name = name_of(j);
      throw SingularSystem(name, "singular design matrix: column '" + name + "' is identically zero");
    }
    x.col(j) /= scale(j);
  }

  for (Eigen::Index j = 1; j < x.cols(); ++j) {
    Eigen::HouseholderQR<Eigen::MatrixXd> prefix(x.leftCols(j));
    const Eigen::VectorXd fit = prefix.solve(x.col(j));
    const double residual = (x.col(j) - x.leftCols(j) * fit).norm();
    if (residual < detail::kRankTolerance) {
      const auto name = name_of(j);
      throw SingularSystem(name, "singular design matrix: column '" + name + "' is collinear with earlier columns");
    }
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  Eigen::VectorXd b = qr.solve(y);
  // One step of iterative refinement.
  b += qr.solve(y - x * b);

  std::vector<double> out(cols);
  for (std::size_t j = 0; j < features; ++j) {
    out[j] = b(static_cast<Eigen::Index>(j + offset)) / scale(static_cast<Eigen::Index>(j + offset));
  }
  if (with_intercept) out[features] = b(0) / scale(0);
  return out;
}

// Squared Pearson correlation and 1 - SS_res/SS_tot.
inline std::pair<double, double> r_squared(const std::vector<double>& predicted, const std::vector<double>& actual) {
  if (predicted.empty() || predicted.size() != actual.size()) {
    throw ValidationError("r_squared needs equal, nonzero lengths");
  }
  const double count = static_cast<double>(actual.size());
  double mean_a = 0, mean_p = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    mean_a += actual[i];
    mean_p += predicted[i];
  }
  mean_a /= count;
  mean_p /= count;

  double ss_tot = 0, ss_pred = 0, cross = 0, ss_res = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double da = actual[i] - mean_a;
    const double dp = predicted[i] - mean_p;
    ss_tot += da * da;
    ss_pred += dp * dp;
    cross += da * dp;
    ss_res += (actual[i] - predicted[i]) * (actual[i] - predicted[i]);
  }
  if (ss_tot == 0.0) throw UndefinedVariance("actual values are constant; r^2 is undefined");
  const double pearson = ss_pred == 0.0 ? 0.0 : (cross * cross) / (ss_tot * ss_pred);
  return {std::min(pearson, 1.0), 1.0 - ss_res / ss_tot};
}

// Regresses predicted on actual: slope < 1 means predictions undershoot.
inline FitReport calibration_line(const std::vector<double>& predicted, const std::vector<double>& actual) {
  const auto [pearson, raw] = r_squared(predicted, actual);
  DesignMatrix m;
  m.rows.reserve(actual.size());
  for (double a : actual) m.rows.push_back({a});
  m.targets = predicted;
  m.names = {"actual"};
  const auto coef = least_squares_fit(m, true);
  FitReport r;
  r.slope = coef[0];
  r.intercept = coef[1];
  r.r2_pearson = pearson;
  r.r2_raw = raw;
  r.count = actual.size();
  return r;
}

}  // namespace hyperloss
