#pragma once

// Synthetic run generator with known ground-truth coefficients. Shapes are
// sampled log-uniformly over power-of-two grids (layers uniformly over
// integers); times and losses get multiplicative lognormal noise.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "hyperloss/accounting.hpp"
#include "hyperloss/dataset.hpp"
#include "hyperloss/scaling.hpp"
#include "hyperloss/throughput.hpp"

namespace hyperloss {

struct IntRange {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;
};

struct SweepSpec {
  IntRange log2_d{5, 12};
  IntRange layers{1, 8};
  IntRange log2_w{8, 15};
  IntRange log2_h{0, 7};
  std::uint64_t s = 512;
  std::uint64_t v = 8000;
  std::size_t count = 100;
  std::uint64_t seed = 0;
  double noise_sigma = 0;
  TimeCoefficients true_time = published_time_coefficients();
  ScalingLaw true_law;
  TrainBudget budget;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Per-record stream keyed on (seed, index) so records can be generated in
// any order.
class RecordRng {
 public:
  RecordRng(std::uint64_t seed, std::uint64_t index) : engine_(splitmix64(seed ^ splitmix64(index + 1))) {}

  std::uint64_t integer(IntRange r) {
    const std::uint64_t span = r.hi - r.lo + 1;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % span;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return r.lo + x % span;
  }

  double uniform() {  // (0, 1)
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    const double u1 = uniform(), u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

inline void check_range(const IntRange& r, const char* name, std::uint64_t max_log2) {
  if (r.lo > r.hi) throw ValidationError(std::string("sweep range for ") + name + " is empty");
  if (r.hi > max_log2) throw ValidationError(std::string("sweep range for ") + name + " is too large");
}

}  // namespace detail

inline void validate(const SweepSpec& spec) {
  detail::check_range(spec.log2_d, "d", 40);
  detail::check_range(spec.log2_w, "w", 40);
  detail::check_range(spec.log2_h, "h", 40);
  detail::check_range(spec.layers, "n", 1u << 20);
  if (spec.layers.lo < 1) throw ValidationError("layer range must start at >= 1");
  if (spec.s < 1 || spec.v < 1) throw ValidationError("s and v must be >= 1");
  if (!(spec.noise_sigma >= 0) || !std::isfinite(spec.noise_sigma)) throw ValidationError("noise sigma must be >= 0");
  if (spec.log2_h.lo > spec.log2_d.hi) {
    throw ValidationError("infeasible sweep: every head count exceeds every embedding size, so h never divides d");
  }
  validate(spec.budget);
}

inline RunRecord generate_run(const SweepSpec& spec, std::size_t index) {
  detail::RecordRng rng(spec.seed, index);
  RunRecord r;
  char id[32];
  std::snprintf(id, sizeof id, "synth-%06zu", index);
  r.run_id = id;
  r.batch = spec.budget.batch;

  std::uint64_t log2_d, log2_h;
  do {
    log2_d = rng.integer(spec.log2_d);
    log2_h = rng.integer(spec.log2_h);
  } while (log2_h > log2_d);
  r.shape = {std::uint64_t{1} << log2_d, rng.integer(spec.layers), spec.s, spec.v,
             std::uint64_t{1} << rng.integer(spec.log2_w), std::uint64_t{1} << log2_h};

  const double time_noise = std::exp(spec.noise_sigma * rng.normal());
  const double loss_noise = std::exp(spec.noise_sigma * rng.normal());

  const double seconds = predict_step_time(r.shape, spec.true_time) * time_noise;
  const double steps = spec.budget.T / seconds;
  r.seconds_per_step = seconds;
  r.tokens_per_second = r.tokens_per_step() / seconds;
  r.tokens_seen = steps * r.tokens_per_step();
  r.train_seconds = spec.budget.T;
  const double data = spec.budget.token_mode == TokenMode::steps ? steps : *r.tokens_seen;
  r.final_loss = chinchilla_loss(static_cast<double>(count_params(r.shape)), data, spec.true_law) * loss_noise;
  return r;
}

inline RunDataset generate_runs(const SweepSpec& spec) {
  validate(spec);
  RunDataset ds;
  ds.records.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) ds.add(generate_run(spec, i));
  return ds;
}

}  // namespace hyperloss
