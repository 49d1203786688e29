#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "flowlin/catalog.hpp"
#include "flowlin/phase.hpp"

using namespace flowlin;

namespace {

Vector v2(double a, double b) {
  Vector x(2);
  x << a, b;
  return x;
}

// Exact asymptotic phase of log_radial, from v(t) = v0 e^{-t} and theta(t) = theta0 + t + v0 (1 - e^{-t}).
double log_radial_phase_angle(const Vector& x) { return x[1] + std::log(x[0]); }

// Lifted phase-estimate angle of annulus_cubic at horizon T for r0 > 1:
// theta0 - 1/u0 + sqrt(2T + u0^{-2}), with u0 = r0 - 1.
double annulus_estimate_angle(const Vector& x, double horizon) {
  const double u0 = x[0] - 1.0;
  return x[1] - 1.0 / u0 + std::sqrt(2.0 * horizon + 1.0 / (u0 * u0));
}

}  // namespace

TEST(GeometricSchedule, Horizons) {
  EXPECT_EQ((GeometricSchedule{1.0, 2.0, 4}.horizons()), (std::vector<double>{1, 2, 4, 8}));
  EXPECT_THROW((GeometricSchedule{1.0, 1.0, 4}.horizons()), Error);
  EXPECT_THROW((GeometricSchedule{0.0, 2.0, 4}.horizons()), Error);
}

TEST(EstimatePhase, LogRadialConvergesToExactPhase) {
  const auto& e = catalog::get("log_radial");
  const auto est = estimate_phase(e.system, *e.attractor, v2(std::exp(1.0), 0.0), {1.0, 2.0, 8});
  ASSERT_EQ(est.classification, PhaseClass::Converged);
  ASSERT_EQ(est.estimates.size(), 8u);
  EXPECT_NEAR(angle_distance(est.limit[1], 1.0, kTwoPi), 0.0, 1e-12);
  EXPECT_EQ(est.limit[0], 1.0);
  for (std::size_t k = 0; k < est.horizons.size(); ++k) {
    const double err = angle_distance(est.estimates[k][1], 1.0, kTwoPi);
    EXPECT_LE(err, std::max(3.0 * std::exp(-est.horizons[k]), 1e-13)) << est.horizons[k];
  }
}

TEST(EstimatePhase, LogRadialErrorConstantIsBounded) {
  const auto& e = catalog::get("log_radial");
  std::mt19937_64 rng(21);
  double worst_c = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Vector x = e.sample_state(rng);
    const auto est = estimate_phase(e.system, *e.attractor, x, {1.0, 2.0, 8});
    EXPECT_EQ(est.classification, PhaseClass::Converged);
    const double exact = reduce_angle(log_radial_phase_angle(x), kTwoPi);
    for (std::size_t k = 0; k < est.horizons.size(); ++k) {
      const double bound = std::exp(-est.horizons[k]);
      if (bound < 1e-9) continue;  // below this the error sits at round-off
      worst_c = std::max(worst_c, angle_distance(est.estimates[k][1], exact, kTwoPi) / bound);
    }
  }
  EXPECT_LE(worst_c, 5.0);
}

TEST(EstimatePhase, PointsOnAttractorAreFixed) {
  for (const char* name : {"log_radial", "annulus_cubic"}) {
    const auto& e = catalog::get(name);
    for (double th : {0.0, 1.0, 4.0}) {
      const Vector a = v2(1.0, th);
      const auto est = estimate_phase(e.system, *e.attractor, a, {1.0, 2.0, 6});
      for (const auto& p : est.estimates) EXPECT_LT(e.system.chart().distance(p, a), 1e-12) << name;
      EXPECT_EQ(est.classification, PhaseClass::Converged) << name;
    }
  }
}

TEST(EstimatePhase, AnnulusDiverges) {
  const auto& e = catalog::get("annulus_cubic");
  const auto est = estimate_phase(e.system, *e.attractor, v2(2.0, 0.0), {1.0, 2.0, 12});
  EXPECT_EQ(est.classification, PhaseClass::Diverged);
  EXPECT_TRUE(est.drift.monotone_growth);
  // Estimates follow the closed-form drift.
  for (std::size_t k = 0; k < est.horizons.size(); ++k) {
    EXPECT_NEAR(est.lifted_estimates[k][1], annulus_estimate_angle(v2(2.0, 0.0), est.horizons[k]), 1e-9);
  }
}

TEST(EstimatePhase, AnnulusGapsGrowLikeSqrtHorizon) {
  const auto& e = catalog::get("annulus_cubic");
  std::mt19937_64 rng(22);
  for (int i = 0; i < 20; ++i) {
    Vector x = e.sample_state(rng);
    const auto est = estimate_phase(e.system, *e.attractor, x, {1.0, 2.0, 12});
    const auto& g = est.drift.gaps;
    ASSERT_EQ(g.size(), 11u);
    for (std::size_t k = g.size() - 5; k < g.size(); ++k) EXPECT_GT(g[k], g[k - 1]);
  }
  // Far from the circle the gap between T and 2T approaches (sqrt2 - 1) sqrt(2T).
  const auto est = estimate_phase(e.system, *e.attractor, v2(2.0, 0.0), {1.0, 2.0, 12});
  for (std::size_t k = 4; k < est.drift.gaps.size(); ++k) {
    EXPECT_GE(est.drift.gaps[k], 0.9 * (std::sqrt(2.0) - 1.0) * std::sqrt(2.0 * est.horizons[k]));
  }
}

TEST(EstimatePhase, ClassificationIsScheduleRobust) {
  std::mt19937_64 rng(23);
  for (const char* name : {"log_radial", "annulus_cubic"}) {
    const auto& e = catalog::get(name);
    for (int i = 0; i < 10; ++i) {
      const Vector x = e.sample_state(rng);
      const auto a = estimate_phase(e.system, *e.attractor, x, {1.0, 2.0, 12});
      const auto b = estimate_phase(e.system, *e.attractor, x, {2.0, 2.0, 12});
      if (a.classification == PhaseClass::Diverged) EXPECT_NE(b.classification, PhaseClass::Converged) << name;
      if (std::string(name) == "log_radial") EXPECT_EQ(b.classification, PhaseClass::Converged);
    }
  }
}

TEST(EstimatePhase, ArithmeticScheduleWouldMasqueradeAsConvergence) {
  // sqrt(2T) drift has successive differences that shrink on arithmetic schedules.
  const Vector x = v2(2.0, 0.0);
  double prev_gap = std::numeric_limits<double>::infinity();
  for (int k = 100; k < 110; ++k) {
    const double gap = annulus_estimate_angle(x, k + 1.0) - annulus_estimate_angle(x, k);
    EXPECT_LT(gap, prev_gap);
    prev_gap = gap;
  }
  EXPECT_LT(prev_gap, 0.1);
}

TEST(EstimatePhase, EmptyAttractor) {
  const auto& e = catalog::get("log_radial");
  const AttractorModel empty({}, e.attractor->restricted_flow());
  try {
    estimate_phase(e.system, empty, v2(2.0, 0.0), {1.0, 2.0, 4});
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), Errc::EmptyAttractor);
  }
}

TEST(NearestPoint, CloudWithRefinementMatchesExactProjector) {
  const auto& e = catalog::get("annulus_cubic");
  const AttractorModel cloud_only(catalog_detail::unit_circle_polar(400), e.attractor->restricted_flow());
  std::mt19937_64 rng(24);
  std::uniform_real_distribution<double> th(0.0, kTwoPi), r(0.5, 1.5);
  for (int i = 0; i < 100; ++i) {
    const Vector y = v2(r(rng), th(rng));
    EXPECT_LT(e.system.chart().distance(cloud_only.nearest_point(y), e.attractor->nearest_point(y)), 1e-8);
  }
}

TEST(PhaseProperties, LogRadialExactPhase) {
  const auto& e = catalog::get("log_radial");
  std::mt19937_64 rng(25);
  const auto xs = catalog::sample_states(e, rng, 100);
  const auto rep = verify_phase_properties(e.system, *e.exact_phase, xs, e.attractor->cloud(),
                                           {0.0, 0.5, 1.0, 2.0, 4.0, 8.0}, 1e-9);
  EXPECT_TRUE(rep.pass) << rep.idempotence_max << ' ' << rep.equivariance_max << ' ' << rep.retraction_max;
}

TEST(PhaseProperties, ProductAttractorExactly) {
  const auto& e = catalog::get("product_attractor");
  std::mt19937_64 rng(26);
  const auto xs = catalog::sample_states(e, rng, 100);
  const auto rep = verify_phase_properties(e.system, *e.exact_phase, xs, e.attractor->cloud(),
                                           {0.0, 0.5, 1.0, 2.0, 4.0}, 1e-12);
  EXPECT_TRUE(rep.pass);
  EXPECT_EQ(rep.idempotence_max, 0.0);
  EXPECT_EQ(rep.retraction_max, 0.0);
}

TEST(PhaseProperties, IdentityOnAttractor) {
  const auto& e = catalog::get("log_radial");
  const StateMap identity = [](const Vector& x) { return x; };
  const auto& cloud = e.attractor->cloud();
  const auto rep = verify_phase_properties(e.system, identity, cloud, cloud, {0.0, 1.0, 2.0}, 1e-12);
  EXPECT_TRUE(rep.pass);
}

TEST(PhaseProperties, WrongPhaseIsCaught) {
  const auto& e = catalog::get("log_radial");
  // Radial projection ignores the ln r phase shift, so it is not equivariant.
  const StateMap radial = [](const Vector& x) { return v2(1.0, x[1]); };
  std::mt19937_64 rng(27);
  const auto xs = catalog::sample_states(e, rng, 50);
  const auto rep = verify_phase_properties(e.system, radial, xs, e.attractor->cloud(), {0.0, 1.0, 2.0}, 1e-9);
  EXPECT_FALSE(rep.pass);
  EXPECT_GT(rep.equivariance_max, 1e-3);
}
