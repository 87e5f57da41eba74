#pragma once

// Step-time model TIME = c1 * MEMCPYS + c2 * FLOPS + c3 and its fit.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hyperloss/accounting.hpp"
#include "hyperloss/dataset.hpp"
#include "hyperloss/regress.hpp"

namespace hyperloss {

enum class TimeMode { both, memcpy_only, flops_only };

inline std::string_view to_string(TimeMode m) {
  switch (m) {
    case TimeMode::both:
      return "both";
    case TimeMode::memcpy_only:
      return "memcpy_only";
    case TimeMode::flops_only:
      return "flops_only";
  }
  return "?";
}

inline TimeMode parse_time_mode(std::string_view s) {
  if (s == "both") return TimeMode::both;
  if (s == "memcpy_only") return TimeMode::memcpy_only;
  if (s == "flops_only") return TimeMode::flops_only;
  throw ValidationError("unknown time mode: " + std::string(s));
}

struct TimeCoefficients {
  double c1 = 0;  // seconds per memory-copy element
  double c2 = 0;  // seconds per FLOP
  double c3 = 0;  // fixed seconds per step
  TimeMode mode = TimeMode::both;
  std::optional<FitReport> fit;
  std::vector<std::string> warnings;
};

inline TimeCoefficients make_time_coefficients(double c1, double c2, double c3, TimeMode mode = TimeMode::both) {
  TimeCoefficients c;
  c.c1 = c1;
  c.c2 = c2;
  c.c3 = c3;
  c.mode = mode;
  return c;
}

// Coefficients measured on a 4x8 TPU v5 mesh.
inline TimeCoefficients published_time_coefficients() { return make_time_coefficients(3.74e-19, 2.4e-15, 1.46e-07); }

namespace detail {

inline double checked_time(double t) {
  if (!(t > 0.0)) throw NonphysicalTime("predicted step time " + std::to_string(t) + " s is not positive");
  return t;
}

}  // namespace detail

inline double predict_step_time(const ContinuousShape& x, const TimeCoefficients& c) {
  return detail::checked_time(c.c1 * evaluate(x, CostKind::memcpys) + c.c2 * evaluate(x, CostKind::flops) + c.c3);
}

inline double predict_step_time(const TransformerShape& x, const TimeCoefficients& c) {
  const double memcpys = static_cast<double>(count_memcpys(x));
  const double flops = static_cast<double>(count_flops(x));
  return detail::checked_time(c.c1 * memcpys + c.c2 * flops + c.c3);
}

// Tokens per second for a given batch.
inline double throughput(const TransformerShape& x, const TimeCoefficients& c, std::uint64_t batch) {
  if (batch < 1) throw ValidationError("batch must be >= 1");
  return static_cast<double>(batch) * static_cast<double>(x.s) / predict_step_time(x, c);
}

inline TimeCoefficients fit_time_coefficients(const RunDataset& ds, TimeMode mode) {
  auto features = [mode](const TransformerShape& shape) {
    const double m = static_cast<double>(count_memcpys(shape));
    const double f = static_cast<double>(count_flops(shape));
    switch (mode) {
      case TimeMode::both:
        return std::vector<double>{m, f};
      case TimeMode::memcpy_only:
        return std::vector<double>{m};
      case TimeMode::flops_only:
        return std::vector<double>{f};
    }
    return std::vector<double>{};
  };

  DesignMatrix m;
  switch (mode) {
    case TimeMode::both:
      m.names = {"memcpys", "flops"};
      break;
    case TimeMode::memcpy_only:
      m.names = {"memcpys"};
      break;
    case TimeMode::flops_only:
      m.names = {"flops"};
      break;
  }
  for (std::size_t i : ds.fit_indices()) {
    const auto& r = ds.records[i];
    const auto t = step_seconds(r);
    if (!t) continue;
    m.rows.push_back(features(r.shape));
    m.targets.push_back(*t);
  }
  if (m.rows.size() < 4) {
    throw ValidationError("time fit needs at least 4 runs with step timing, got " + std::to_string(m.rows.size()));
  }

  const auto coef = least_squares_fit(m, true);
  TimeCoefficients out;
  out.mode = mode;
  switch (mode) {
    case TimeMode::both:
      out.c1 = coef[0];
      out.c2 = coef[1];
      out.c3 = coef[2];
      break;
    case TimeMode::memcpy_only:
      out.c1 = coef[0];
      out.c3 = coef[1];
      break;
    case TimeMode::flops_only:
      out.c2 = coef[0];
      out.c3 = coef[1];
      break;
  }
  if (out.c1 < 0) out.warnings.push_back("fitted c1 is negative");
  if (out.c2 < 0) out.warnings.push_back("fitted c2 is negative");

  // Evaluate on the holdout split when there is one; otherwise on the fit set.
  auto eval = ds.holdout_indices();
  if (eval.empty()) eval = ds.fit_indices();
  std::vector<double> predicted, actual;
  for (std::size_t i : eval) {
    const auto& r = ds.records[i];
    const auto t = step_seconds(r);
    if (!t) continue;
    const auto f = features(r.shape);
    double p = out.c3;
    switch (mode) {
      case TimeMode::both:
        p += out.c1 * f[0] + out.c2 * f[1];
        break;
      case TimeMode::memcpy_only:
        p += out.c1 * f[0];
        break;
      case TimeMode::flops_only:
        p += out.c2 * f[0];
        break;
    }
    predicted.push_back(p);
    actual.push_back(*t);
  }
  if (predicted.size() >= 2) {
    try {
      out.fit = calibration_line(predicted, actual);
    } catch (const UndefinedVariance&) {
      out.warnings.push_back("evaluation set has constant step times; no fit report");
    }
  }
  return out;
}

}  // namespace hyperloss
