#pragma once

// Chinchilla-form loss law L(N, D) = A / N^alpha + B / D^beta + E, the fit
// of its linear coefficients at fixed exponents, and the loss predicted
// from hyperparameters and a wall-clock budget alone.

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hyperloss/accounting.hpp"
#include "hyperloss/dataset.hpp"
#include "hyperloss/regress.hpp"
#include "hyperloss/throughput.hpp"

namespace hyperloss {

struct ScalingLaw {
  double A = 0;
  double B = 0;
  double E = 0;
  double alpha = 0;
  double beta = 0;
  std::optional<FitReport> fit;
  std::vector<std::string> warnings;
};

inline ScalingLaw make_law(double A, double B, double E, double alpha, double beta) {
  ScalingLaw law;
  law.A = A;
  law.B = B;
  law.E = E;
  law.alpha = alpha;
  law.beta = beta;
  return law;
}

// Linear coefficients fitted on 767 C4 runs of three hours each. The
// exponents are not part of that fit and must be supplied separately.
inline ScalingLaw published_linear_coefficients(double alpha, double beta) {
  return make_law(195.76, 182.52, 2.34, alpha, beta);
}

// Whether D counts optimizer steps or tokens.
enum class TokenMode { steps, tokens };

inline std::string_view to_string(TokenMode m) { return m == TokenMode::steps ? "steps" : "tokens"; }

inline TokenMode parse_token_mode(std::string_view s) {
  if (s == "steps") return TokenMode::steps;
  if (s == "tokens") return TokenMode::tokens;
  throw ValidationError("unknown token mode: " + std::string(s));
}

struct TrainBudget {
  double T = 10800;  // seconds
  std::uint64_t batch = 1;
  TokenMode token_mode = TokenMode::steps;
};

inline void validate(const TrainBudget& b) {
  if (!(b.T > 0) || !std::isfinite(b.T)) throw DomainError("training budget T must be positive");
  if (b.batch < 1) throw DomainError("batch must be >= 1");
}

inline double chinchilla_loss(double N, double D, const ScalingLaw& law) {
  if (!(N > 0) || !std::isfinite(N)) throw DomainError("parameter count must be positive");
  if (!(D > 0) || !std::isfinite(D)) throw DomainError("data quantity must be positive");
  return law.A / std::pow(N, law.alpha) + law.B / std::pow(D, law.beta) + law.E;
}

// Steps (or tokens) a model gets through in the budget: T / TIME.
inline double estimate_data(const TransformerShape& x, const TimeCoefficients& c, const TrainBudget& b) {
  validate(b);
  const double steps = b.T / predict_step_time(x, c);
  if (b.token_mode == TokenMode::steps) return steps;
  return steps * static_cast<double>(b.batch) * static_cast<double>(x.s);
}

inline double predict_loss_from_shape(const TransformerShape& x, const TimeCoefficients& c, const ScalingLaw& law,
                                      const TrainBudget& b) {
  validate(b);
  const double params = static_cast<double>(count_params(x));
  if (b.token_mode == TokenMode::steps) {
    const double time = predict_step_time(x, c);
    return law.E + law.A / std::pow(params, law.alpha) + law.B * std::pow(time / b.T, law.beta);
  }
  return chinchilla_loss(params, estimate_data(x, c, b), law);
}

// Data quantity a logged run actually consumed, in the requested unit.
// Uses tokens_seen when present, else train_seconds over the step time.
inline std::optional<double> recorded_data(const RunRecord& r, TokenMode mode) {
  std::optional<double> tokens;
  if (r.tokens_seen) {
    tokens = *r.tokens_seen;
  } else if (r.train_seconds) {
    if (const auto t = step_seconds(r)) tokens = *r.train_seconds / *t * r.tokens_per_step();
  }
  if (!tokens) return std::nullopt;
  return mode == TokenMode::tokens ? *tokens : *tokens / r.tokens_per_step();
}

// Loss predicted from a run's parameter count and recorded data consumption.
inline double predict_loss_from_record(const RunRecord& r, const ScalingLaw& law, TokenMode mode) {
  const auto data = recorded_data(r, mode);
  if (!data) throw ValidationError("run " + r.run_id + " has no recorded data quantity");
  return chinchilla_loss(static_cast<double>(count_params(r.shape)), *data, law);
}

inline ScalingLaw fit_law_coefficients(const RunDataset& ds, double alpha, double beta,
                                       TokenMode mode = TokenMode::steps) {
  if (!(alpha > 0) || !(beta > 0)) throw DomainError("exponents alpha and beta must be positive");
  DesignMatrix m;
  m.names = {"params_term", "data_term"};
  for (std::size_t i : ds.fit_indices()) {
    const auto& r = ds.records[i];
    const auto data = recorded_data(r, mode);
    if (!r.final_loss || !data || !(*data > 0)) continue;
    const double params = static_cast<double>(count_params(r.shape));
    m.rows.push_back({std::pow(params, -alpha), std::pow(*data, -beta)});
    m.targets.push_back(*r.final_loss);
  }
  if (m.rows.size() < 4) {
    throw ValidationError("law fit needs at least 4 runs with loss and data quantity, got " +
                          std::to_string(m.rows.size()));
  }
  const auto coef = least_squares_fit(m, true);
  ScalingLaw law = make_law(coef[0], coef[1], coef[2], alpha, beta);
  if (law.A < 0) law.warnings.push_back("fitted A is negative");
  if (law.B < 0) law.warnings.push_back("fitted B is negative");
  if (law.E < 0) law.warnings.push_back("fitted E is negative");

  auto eval = ds.holdout_indices();
  if (eval.empty()) eval = ds.fit_indices();
  std::vector<double> predicted, actual;
  for (std::size_t i : eval) {
    const auto& r = ds.records[i];
    const auto data = recorded_data(r, mode);
    if (!r.final_loss || !data || !(*data > 0)) continue;
    predicted.push_back(chinchilla_loss(static_cast<double>(count_params(r.shape)), *data, law));
    actual.push_back(*r.final_loss);
  }
  if (predicted.size() >= 2) {
    try {
      law.fit = calibration_line(predicted, actual);
    } catch (const UndefinedVariance&) {
      law.warnings.push_back("evaluation set has constant losses; no fit report");
    }
  }
  return law;
}

}  // namespace hyperloss
