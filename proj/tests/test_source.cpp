#include <gtest/gtest.h>

#include <cmath>

#include "fpqsdc/oracles.hpp"
#include "fpqsdc/source.hpp"

using namespace fpqsdc;

namespace {

const double kPiV = std::numbers::pi;

SourceParams anchor() { return SourceParams::from_point(0.0895, 0.0490 * kPiV, 0.0546 * kPiV); }

}  // namespace

TEST(Source, DensityIsNormalizedOverTheSupport) {
  for (double vt : {0.01, 0.0895 / 2, 0.5}) {
    const double p = interval_probability(full_domain_interval(vt));
    EXPECT_NEAR(p, 1.0, 1e-6) << "vt=" << vt;
  }
}

TEST(Source, DensityIsSymmetricUnderThetaReflection) {
  for (double i : {0.001, 0.03, 0.0894})
    for (double th : {0.01, 0.4, 1.2})
      EXPECT_NEAR(density(i, th, 0.0895 / 2), density(i, kPiV - th, 0.0895 / 2),
                  1e-12 * density(i, th, 0.0895 / 2));
}

TEST(Source, DensityRejectsPointsOffTheSupport) {
  EXPECT_THROW(density(0.0, 0.5, 0.1), DomainError);
  EXPECT_THROW(density(0.3, 0.5, 0.1), DomainError);
  EXPECT_THROW(density(0.1, -0.1, 0.1), DomainError);
  EXPECT_THROW(density(0.1, 4.0, 0.1), DomainError);
}

TEST(Source, StatesOfABasisAreSelectedEqually) {
  const SourceParams src = anchor();
  for (IntensityClass c : kClasses) {
    const double h = interval_probability(make_interval(src, Basis::Z, c, 0));
    const double v = interval_probability(make_interval(src, Basis::Z, c, 1));
    EXPECT_NEAR(h, v, 1e-9 * h);
    const double d = interval_probability(make_interval(src, Basis::X, c, 0));
    for (Basis b : {Basis::X, Basis::Y})
      for (int k = 0; k < 2; ++k)
        EXPECT_NEAR(interval_probability(make_interval(src, b, c, k)), d, 1e-9 * d);
  }
}

TEST(Source, UnionIsTheSumOfItsStates) {
  const SourceParams src = anchor();
  for (Basis b : kBases) {
    const double u = interval_probability(make_interval(src, b, IntensityClass::s));
    const double s0 = interval_probability(make_interval(src, b, IntensityClass::s, 0));
    const double s1 = interval_probability(make_interval(src, b, IntensityClass::s, 1));
    EXPECT_NEAR(u, s0 + s1, 1e-9 * u);
  }
}

// With 2vt above I_s the density is smooth on the interval, so a plain
// tensor Gauss rule in (I, theta) is an independent reference.
TEST(Source, IntervalProbabilityMatchesPlainIntegration) {
  SourceParams src = anchor();
  src.vt_product = src.intensity_max;
  const double vt = src.vt_product;
  const Range ir = intensity_range(src, IntensityClass::s);
  auto f = [vt](double i, double th) { return density(i, th, vt); };
  const double z = 2 * integrate_2d(f, Rect{ir.lo, ir.hi, 0.0, src.delta_z});
  const double x = integrate_2d(f, Rect{ir.lo, ir.hi, kPiV / 2 - src.delta_x, kPiV / 2 + src.delta_x}) *
                   2 * src.delta_x / kPiV;
  EXPECT_NEAR(interval_probability(make_interval(src, Basis::Z, IntensityClass::s)), z, 1e-9 * z);
  EXPECT_NEAR(interval_probability(make_interval(src, Basis::X, IntensityClass::s)), x, 1e-9 * x);
}

TEST(Source, IntervalProbabilityAgreesWithPhaseSimulation) {
  const SourceParams src = anchor();
  for (Basis b : {Basis::Z, Basis::X})
    for (IntensityClass c : kClasses) {
      const SelectionInterval iv = make_interval(src, b, c);
      const double q = interval_probability(iv);
      const auto mc = oracle::interval_probability_mc(iv, 7, 400000);
      EXPECT_TRUE(mc.agrees(q, 4.0)) << iv.label() << " quadrature " << q << " mc " << mc.mean
                                     << " +- " << mc.std_error;
    }
}

TEST(Source, EqualPhasesGiveTheLargestIntensity) {
  const double vt = 0.3;
  const BlochSample s = bloch_from_phases(0.7, 0.7, 2.1, 2.1, vt);
  EXPECT_NEAR(s.intensity, 4 * vt, 1e-12);
  EXPECT_NEAR(s.theta, kPiV / 2, 1e-12);
  EXPECT_NEAR(s.phi, 2.1 - 0.7, 1e-12);
  const BlochSample h = bloch_from_phases(0.0, 0.0, 0.0, kPiV, vt);
  EXPECT_NEAR(h.intensity, 2 * vt, 1e-12);
  EXPECT_NEAR(h.theta, 0.0, 1e-12);
}

TEST(Source, SamplerStaysOnTheSupport) {
  const double vt = 0.04;
  const auto s = sample_source(3, 20000, vt);
  ASSERT_EQ(s.size(), 20000u);
  for (const BlochSample& b : s) {
    EXPECT_GT(b.intensity, 0.0);
    EXPECT_LE(b.intensity, 2 * vt);
    EXPECT_GE(b.theta, 0.0);
    EXPECT_LE(b.theta, kPiV);
    EXPECT_GE(b.phi, 0.0);
    EXPECT_LT(b.phi, 2 * kPiV);
  }
}

TEST(Source, SamplerIsReproducible) {
  const auto a = sample_source(11, 100, 0.05);
  const auto b = sample_source(11, 100, 0.05);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].intensity, b[i].intensity);
    EXPECT_EQ(a[i].theta, b[i].theta);
    EXPECT_EQ(a[i].phi, b[i].phi);
  }
}

TEST(Source, PoissonMomentsAreDistributions) {
  const SourceParams src = anchor();
  for (IntensityClass c : kClasses) {
    const auto p = poisson_moments(make_interval(src, Basis::Z, c), 30);
    double s = 0;
    for (double v : p) {
      EXPECT_GE(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Source, IntervalsPartitionTheIntensityAxis) {
  const SourceParams src = anchor();
  EXPECT_EQ(intensity_range(src, IntensityClass::d1).lo, 0.0);
  EXPECT_EQ(intensity_range(src, IntensityClass::d1).hi, intensity_range(src, IntensityClass::d2).lo);
  EXPECT_EQ(intensity_range(src, IntensityClass::d2).hi, intensity_range(src, IntensityClass::s).lo);
  EXPECT_EQ(intensity_range(src, IntensityClass::s).hi, src.intensity_max);
}
