#include <gtest/gtest.h>

#include <atomic>

#include "fpqsdc/optimizer.hpp"
#include "fpqsdc/parallel.hpp"

using namespace fpqsdc;

namespace {

const double kPiV = std::numbers::pi;

SearchSpace small_space() {
  SearchSpace s;
  s.grid_intensity = s.grid_delta_x = s.grid_delta_z = 3;
  s.refine_iterations = 5;
  return s;
}

}  // namespace

TEST(Optimizer, SearchSpaceValidation) {
  SearchSpace s;
  EXPECT_NO_THROW(s.validate());
  s.intensity = {0.0, 0.3};
  EXPECT_THROW(s.validate(), InvariantError);
  s = SearchSpace{};
  s.delta_x = {0.01 * kPiV, 0.3 * kPiV};
  EXPECT_THROW(s.validate(), InvariantError);
  s = SearchSpace{};
  s.grid_delta_z = 1;
  EXPECT_THROW(s.validate(), InvariantError);
}

TEST(Optimizer, SnappingIsIdempotent) {
  const OperatingPoint p{0.08951234567, 0.0490123456 * kPiV, 0.0546987654 * kPiV};
  const OperatingPoint a = snap(p);
  const OperatingPoint b = snap(a);
  EXPECT_EQ(a.intensity, b.intensity);
  EXPECT_EQ(a.delta_x, b.delta_x);
  EXPECT_EQ(a.delta_z, b.delta_z);
  EXPECT_NEAR(a.intensity, 0.089512, 1e-15);
}

TEST(Optimizer, ObjectiveCachesSnappedPoints) {
  RateObjective f(SystemParams{}, 2.0);
  const OperatingPoint p{0.0895, 0.049 * kPiV, 0.0546 * kPiV};
  const double a = f(p);
  const double b = f({p.intensity + 1e-9, p.delta_x, p.delta_z});
  EXPECT_EQ(a, b);
  EXPECT_EQ(f.evaluations(), 1);
  EXPECT_EQ(f.failures(), 0);
  EXPECT_GT(a, 0.0);
}

TEST(Optimizer, ObjectiveRethrowsInvalidPoints) {
  RateObjective f(SystemParams{}, 2.0);
  EXPECT_THROW(f({0.0895, 0.0, 0.05 * kPiV}), InvariantError);
}

TEST(Optimizer, FindsThePublishedOptimumAtTwoDecibels) {
  const OptResult r = optimize(SystemParams{}, 2.0, SearchSpace{});
  EXPECT_NEAR(r.rate, 5.76e-5, 0.2 * 5.76e-5);
  EXPECT_NEAR(r.best.intensity, 0.0895, 0.3 * 0.0895);
  EXPECT_GE(r.rate, r.grid_best_rate);
  EXPECT_FALSE(r.beyond_cutoff);
  EXPECT_EQ(r.failed_evaluations, 0);
  EXPECT_GT(r.evaluations, 1000);

  // The reported rate is exactly what a fresh evaluation at the reported point gives.
  EvalOptions opt;
  opt.exploit_symmetry = true;
  const double again =
      evaluate(SystemParams{}, SourceParams::from_point(r.best.intensity, r.best.delta_x, r.best.delta_z), 2.0, opt)
          .rate;
  EXPECT_EQ(again, r.rate);

  // No grid point beats the refined optimum.
  for (const TraceEntry& t : r.trace) EXPECT_LE(t.rate, r.rate);
}

TEST(Optimizer, FlagsAttenuationBeyondCutoff) {
  const OptResult r = optimize(SystemParams{}, 30.0, small_space());
  EXPECT_TRUE(r.beyond_cutoff);
  EXPECT_EQ(r.rate, 0.0);
  EXPECT_EQ(r.evaluations, 27);
}

TEST(Optimizer, ParallelGridMatchesSerial) {
  const SearchSpace s = small_space();
  const OptResult a = optimize(SystemParams{}, 3.0, s, EvalOptions{}, 1);
  const OptResult b = optimize(SystemParams{}, 3.0, s, EvalOptions{}, 3);
  EXPECT_EQ(a.rate, b.rate);
  EXPECT_EQ(a.best.intensity, b.best.intensity);
  EXPECT_EQ(a.best.delta_x, b.best.delta_x);
  EXPECT_EQ(a.best.delta_z, b.best.delta_z);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) EXPECT_EQ(a.trace[i].rate, b.trace[i].rate);
}

TEST(Optimizer, BisectionKeepsItsBracket) {
  const SystemParams sys;
  int calls = 0;
  auto rate = [&](double db) {
    ++calls;
    return std::max(0.0, 7.3 - db);
  };
  const DistanceResult d = bisect_distance(sys, 2.0, 5.0, rate, 0.05);
  EXPECT_NEAR(d.attenuation_db, 7.3, km_to_attenuation(sys, 0.05));
  EXPECT_LE(d.attenuation_db, 7.3);
  EXPECT_NEAR(d.km, attenuation_to_km(sys, d.attenuation_db), 1e-12);
  for (const BisectionStep& s : d.steps) {
    EXPECT_GT(s.rate_lo, 0.0);
    EXPECT_LE(s.rate_hi, 0.0);
    EXPECT_LT(s.lo_db, s.hi_db);
  }
  EXPECT_LE(d.steps.back().hi_db - d.steps.back().lo_db, km_to_attenuation(sys, 0.05));
}

TEST(Optimizer, BisectionWithoutAnyPositiveRate) {
  const DistanceResult d = bisect_distance(SystemParams{}, 1.0, 2.0, [](double) { return 0.0; });
  EXPECT_EQ(d.km, 0.0);
  EXPECT_TRUE(d.steps.empty());
  EXPECT_THROW(bisect_distance(SystemParams{}, 2.0, 1.0, [](double) { return 1.0; }), InvariantError);
}

TEST(Optimizer, ActiveDistance) {
  const DistanceResult d = active_max_distance(SystemParams{});
  EXPECT_GT(d.km, 15.0);
  EXPECT_LT(d.km, 20.0);
  EXPECT_GT(optimize_active(SystemParams{}, d.attenuation_db).capacity, 0.0);
}

TEST(Parallel, CoversEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(Parallel, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(100, 3,
                            [](std::size_t i) {
                              if (i == 37) throw NumericalError("boom");
                            }),
               NumericalError);
}
