#include <gtest/gtest.h>

#include <bit>
#include <cmath>

#include "hyperloss/dataio.hpp"
#include "hyperloss/synth.hpp"

using namespace hyperloss;

namespace {

SweepSpec spec_with(double sigma, std::uint64_t seed, std::size_t count = 300) {
  SweepSpec spec;
  spec.true_law = published_linear_coefficients(0.34, 0.28);
  spec.noise_sigma = sigma;
  spec.seed = seed;
  spec.count = count;
  return spec;
}

double rel(double got, double want) { return std::abs(got - want) / std::abs(want); }

}  // namespace

TEST(Synth, ShapesAreValidAndInRange) {
  const auto ds = generate_runs(spec_with(0.05, 1, 2000));
  for (const auto& r : ds.records) {
    EXPECT_TRUE(is_valid(r.shape));
    EXPECT_TRUE(range_warnings(r.shape).empty());
    EXPECT_EQ(r.shape.v, 8000u);
    EXPECT_EQ(std::popcount(r.shape.d), 1);
    EXPECT_NO_THROW(validate_record(r, 0));
  }
}

TEST(Synth, DeterministicPerSeed) {
  const auto a = generate_runs(spec_with(0.01, 7));
  const auto b = generate_runs(spec_with(0.01, 7));
  const auto c = generate_runs(spec_with(0.01, 8));
  EXPECT_EQ(a.records, b.records);
  EXPECT_NE(a.records, c.records);
  // Record streams are keyed by index: a longer sweep extends a shorter one.
  const auto longer = generate_runs(spec_with(0.01, 7, 400));
  EXPECT_EQ(longer.records[299], a.records[299]);
}

TEST(Synth, NoiselessTimeRecovery) {
  const auto c = fit_time_coefficients(generate_runs(spec_with(0, 2)), TimeMode::both);
  EXPECT_LT(rel(c.c1, 3.74e-19), 1e-6);
  EXPECT_LT(rel(c.c2, 2.4e-15), 1e-6);
  EXPECT_LT(rel(c.c3, 1.46e-7), 1e-6);
}

TEST(Synth, NoiselessLawRecovery) {
  const auto law = fit_law_coefficients(generate_runs(spec_with(0, 3)), 0.34, 0.28);
  EXPECT_LT(rel(law.A, 195.76), 1e-8);
  EXPECT_LT(rel(law.B, 182.52), 1e-8);
  EXPECT_LT(rel(law.E, 2.34), 1e-8);
}

TEST(Synth, InfeasibleRanges) {
  auto spec = spec_with(0, 1);
  spec.log2_d = {2, 3};
  spec.log2_h = {4, 5};
  EXPECT_THROW(generate_runs(spec), ValidationError);
}

TEST(Synth, FitErrorGrowsWithNoise) {
  // Mean relative error of the fitted law coefficients over ten seeds.
  double previous = -1;
  for (double sigma : {0.0, 0.01, 0.05}) {
    double total = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto law = fit_law_coefficients(generate_runs(spec_with(sigma, 100 + seed)), 0.34, 0.28);
      total += rel(law.A, 195.76) + rel(law.B, 182.52) + rel(law.E, 2.34);
    }
    EXPECT_GT(total, previous) << sigma;
    previous = total;
  }
}

TEST(Synth, TimingFieldsAreConsistent) {
  const auto ds = generate_runs(spec_with(0.02, 4, 100));
  for (const auto& r : ds.records) {
    EXPECT_NEAR(*r.seconds_per_step * *r.tokens_per_second, r.tokens_per_step(), 1e-9 * r.tokens_per_step());
    EXPECT_NEAR(*r.tokens_seen, *r.train_seconds / *r.seconds_per_step * r.tokens_per_step(), 1e-6 * *r.tokens_seen);
  }
}
