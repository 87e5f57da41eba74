#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "hyperloss/regress.hpp"

using namespace hyperloss;

TEST(LeastSquares, LineThroughOrigin) {
  DesignMatrix m{{{1.0}, {2.0}}, {2.0, 4.0}, {}};
  const auto b = least_squares_fit(m, false);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_NEAR(b[0], 2.0, 1e-15);
}

TEST(LeastSquares, CollinearWithInterceptNamesColumn) {
  DesignMatrix m{{{1.0}, {1.0}}, {1.0, 2.0}, {"memcpys"}};
  try {
    least_squares_fit(m, true);
    FAIL() << "expected SingularSystem";
  } catch (const SingularSystem& e) {
    EXPECT_EQ(e.column(), "memcpys");
  }
}

TEST(LeastSquares, DuplicateFeatureColumnIsSingular) {
  DesignMatrix m{{{1, 2}, {2, 4}, {3, 6}, {5, 10}}, {1, 2, 3, 4}, {"a", "b"}};
  EXPECT_THROW(least_squares_fit(m, false), SingularSystem);
}

TEST(LeastSquares, RejectsBadInputs) {
  EXPECT_THROW(least_squares_fit(DesignMatrix{{{1.0}}, {1.0, 2.0}, {}}, false), ValidationError);
  EXPECT_THROW(least_squares_fit(DesignMatrix{{{1.0}}, {1.0}, {}}, true), ValidationError);
  EXPECT_THROW(least_squares_fit(DesignMatrix{{{NAN}, {1.0}}, {1.0, 2.0}, {}}, false), ValidationError);
}

TEST(LeastSquares, WidelyScaledColumnsRecoverExactly) {
  // Columns of order 1e12 and 1e9 with coefficients of order 1e-19 and 1e-15.
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(1.0, 1000.0);
  DesignMatrix m;
  const double c1 = 3.74e-19, c2 = 2.4e-15, c3 = 1.46e-7;
  for (int i = 0; i < 200; ++i) {
    const double a = u(rng) * 1e9, f = u(rng) * u(rng) * 1e6;
    m.rows.push_back({a, f});
    m.targets.push_back(c1 * a + c2 * f + c3);
  }
  const auto b = least_squares_fit(m, true);
  EXPECT_LT(std::abs(b[0] / c1 - 1), 1e-10);
  EXPECT_LT(std::abs(b[1] / c2 - 1), 1e-10);
  EXPECT_LT(std::abs(b[2] / c3 - 1), 1e-10);
}

TEST(LeastSquares, ResidualIsOrthogonalToColumns) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z;
  DesignMatrix m;
  for (int i = 0; i < 300; ++i) {
    const double x0 = z(rng), x1 = 50 * z(rng);
    m.rows.push_back({x0, x1});
    m.targets.push_back(3 * x0 - 0.2 * x1 + 1 + z(rng));
  }
  const auto b = least_squares_fit(m, true);
  double ynorm = 0;
  for (double y : m.targets) ynorm += y * y;
  ynorm = std::sqrt(ynorm);
  double col_norm[3] = {0, 0, 0}, dot[3] = {0, 0, 0};
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    const double r = m.targets[i] - (b[0] * m.rows[i][0] + b[1] * m.rows[i][1] + b[2]);
    const double cols[3] = {m.rows[i][0], m.rows[i][1], 1.0};
    for (int j = 0; j < 3; ++j) {
      dot[j] += cols[j] * r;
      col_norm[j] += cols[j] * cols[j];
    }
  }
  for (int j = 0; j < 3; ++j) EXPECT_LE(std::abs(dot[j]) / std::sqrt(col_norm[j]), 1e-8 * ynorm);
}

TEST(LeastSquares, NoisyRecoveryWithinFivePercent) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(1.0, 10.0);
  std::normal_distribution<double> z;
  DesignMatrix m;
  for (int i = 0; i < 1000; ++i) {
    const double a = u(rng), b = u(rng);
    m.rows.push_back({a, b});
    m.targets.push_back((2.0 * a + 5.0 * b) * std::exp(0.01 * z(rng)));
  }
  const auto b = least_squares_fit(m, false);
  EXPECT_LT(std::abs(b[0] / 2.0 - 1), 0.05);
  EXPECT_LT(std::abs(b[1] / 5.0 - 1), 0.05);
}

TEST(RSquared, PerfectFit) {
  const std::vector<double> a{1, 2, 3, 4};
  const auto [p, raw] = r_squared(a, a);
  EXPECT_DOUBLE_EQ(p, 1.0);
  EXPECT_DOUBLE_EQ(raw, 1.0);
}

TEST(RSquared, HalvedPredictions) {
  const auto [p, raw] = r_squared({0.5, 1, 1.5}, {1, 2, 3});
  EXPECT_NEAR(p, 1.0, 1e-15);
  EXPECT_NEAR(raw, -0.75, 1e-15);
}

TEST(RSquared, ConstantActualIsUndefined) {
  EXPECT_THROW(r_squared({1, 2}, {3, 3}), UndefinedVariance);
  EXPECT_THROW(r_squared({}, {}), ValidationError);
}

TEST(RSquared, ShuffledPredictionsCarryNoSignal) {
  std::mt19937_64 rng(4);
  std::vector<double> actual(1000);
  std::normal_distribution<double> z;
  for (auto& a : actual) a = z(rng);
  auto predicted = actual;
  std::shuffle(predicted.begin(), predicted.end(), rng);
  EXPECT_LT(r_squared(predicted, actual).first, 0.05);
}

TEST(RSquared, PearsonInvariantUnderPositiveAffineMaps) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  std::vector<double> actual(200), predicted(200);
  for (std::size_t i = 0; i < actual.size(); ++i) {
    actual[i] = z(rng);
    predicted[i] = actual[i] + 0.5 * z(rng);
  }
  const double base = r_squared(predicted, actual).first;
  for (auto [a, b] : {std::pair{2.0, 1.0}, std::pair{0.48, 1.5}, std::pair{10.0, -3.0}}) {
    auto mapped = predicted;
    for (auto& p : mapped) p = a * p + b;
    const auto [p, raw] = r_squared(mapped, actual);
    EXPECT_NEAR(p, base, 1e-12);
    EXPECT_LE(raw, p + 1e-12);
  }
}

TEST(Calibration, IdentityLine) {
  const std::vector<double> a{2.5, 3.0, 3.7, 4.1};
  const auto r = calibration_line(a, a);
  EXPECT_NEAR(r.slope, 1.0, 1e-12);
  EXPECT_NEAR(r.intercept, 0.0, 1e-12);
}

TEST(Calibration, ScaledAndShiftedPredictors) {
  const std::vector<double> actual{2.5, 3.0, 3.7, 4.1, 5.0};
  std::vector<double> scaled, shifted;
  for (double a : actual) {
    scaled.push_back(0.48 * a);
    shifted.push_back(a + 2);
  }
  const auto s = calibration_line(scaled, actual);
  EXPECT_NEAR(s.slope, 0.48, 1e-12);
  EXPECT_NEAR(s.intercept, 0.0, 1e-12);
  EXPECT_NEAR(s.r2_pearson, 1.0, 1e-12);
  const auto t = calibration_line(shifted, actual);
  EXPECT_NEAR(t.slope, 1.0, 1e-12);
  EXPECT_NEAR(t.intercept, 2.0, 1e-12);
}

TEST(Calibration, ReciprocalSlopesOnExactLinearFixtures) {
  const std::vector<double> actual{1, 2, 4, 7, 11};
  std::vector<double> predicted;
  for (double a : actual) predicted.push_back(0.43 * a + 1.7);
  const auto forward = calibration_line(predicted, actual);
  const auto backward = calibration_line(actual, predicted);
  EXPECT_NEAR(forward.slope * backward.slope, 1.0, 1e-12);
}
