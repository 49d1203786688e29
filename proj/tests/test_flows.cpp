#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "flowlin/catalog.hpp"
#include "flowlin/flows.hpp"

using namespace flowlin;

namespace {

Vector v2(double a, double b) {
  Vector x(2);
  x << a, b;
  return x;
}

// Reference for log_radial, written in the v = ln r coordinate independently of the catalog.
Vector log_radial_oracle(double t, const Vector& x) {
  const double v0 = std::log(x[0]);
  const double v = v0 * std::exp(-t);
  double theta = std::fmod(x[1] + t + v0 - v, kTwoPi);
  if (theta < 0) theta += kTwoPi;
  return v2(std::exp(v), theta);
}

}  // namespace

TEST(Evolve, AnnulusCubicClosedForm) {
  const auto& sys = catalog::get("annulus_cubic").system;
  const Vector y = evolve(sys, v2(2.0, 0.0), 4.0);
  EXPECT_NEAR(y[0], 4.0 / 3.0, 1e-14);
  EXPECT_NEAR(y[1], std::fmod(6.0, kTwoPi), 1e-13);
}

TEST(Evolve, AnnulusCubicAgreesWithIntegration) {
  const auto& entry = catalog::get("annulus_cubic");
  const Vector x = v2(2.0, 0.0);
  const Vector closed = evolve(entry.system, x, 4.0);
  const Vector integrated = evolve(*entry.vector_field_system, x, 4.0);
  EXPECT_LT(entry.system.chart().distance(closed, integrated), 1e-7);
}

TEST(Evolve, AnnulusCubicUnitCircleIsPeriodic) {
  const auto& sys = catalog::get("annulus_cubic").system;
  for (double t : {0.5, 3.0, 20.0, -7.0}) {
    const Vector y = evolve(sys, v2(1.0, 0.3), t);
    EXPECT_EQ(y[0], 1.0);
    EXPECT_NEAR(angle_distance(y[1], 0.3 + t, kTwoPi), 0.0, 1e-12);
  }
}

TEST(Evolve, TimeZeroIsExactIdentity) {
  std::mt19937_64 rng(1);
  for (const auto& name : catalog::names()) {
    const auto& e = catalog::get(name);
    const Vector x = e.sample_state(rng);
    EXPECT_EQ(evolve(e.system, x, 0.0), x) << name;
    if (e.vector_field_system) EXPECT_EQ(evolve(*e.vector_field_system, x, 0.0), x) << name;
  }
}

TEST(Evolve, BelowTimeDomainIsRejected) {
  const auto& sys = catalog::get("annulus_cubic").system;
  // Outside the circle the radius blows up in backward time at t = -1/(2 u0^2) = -0.5.
  try {
    evolve(sys, v2(2.0, 0.0), -0.6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TimeOutOfDomain);
  }
  EXPECT_NO_THROW(evolve(sys, v2(2.0, 0.0), -0.4));
}

TEST(Evolve, DimensionAndFinitenessChecks) {
  const auto& sys = catalog::get("quasiperiodic_torus_2").system;
  EXPECT_THROW(evolve(sys, Vector::Zero(3), 1.0), Error);
  EXPECT_THROW(evolve(sys, v2(0.0, std::nan("")), 1.0), Error);
  EXPECT_THROW(evolve(sys, v2(0.0, 0.0), std::numeric_limits<double>::infinity()), Error);
}

TEST(SampleTrajectory, SingleGridPoint) {
  const auto& sys = catalog::get("log_radial").system;
  const auto tr = sample_trajectory(sys, v2(2.0, 1.0), {0.0});
  ASSERT_EQ(tr.states.size(), 1u);
  EXPECT_EQ(tr.states[0], v2(2.0, 1.0));
}

TEST(SampleTrajectory, TorusAngleAdvance) {
  const auto& sys = catalog::get("quasiperiodic_torus_2").system;
  const auto tr = sample_trajectory(sys, v2(0.0, 0.0), {0.0, 1.0});
  EXPECT_EQ(tr.states[0], v2(0.0, 0.0));
  EXPECT_NEAR(tr.states[1][0], 0.0, 1e-15);
  EXPECT_NEAR(tr.states[1][1], std::sqrt(2.0) - 1.0, 1e-15);
}

TEST(SampleTrajectory, LogRadialHalvesLogRadius) {
  const auto& sys = catalog::get("log_radial").system;
  const auto tr = sample_trajectory(sys, v2(std::exp(2.0), 0.0), {0.0, std::log(2.0)});
  EXPECT_NEAR(tr.states[1][0], std::exp(1.0), 1e-14);
}

TEST(SampleTrajectory, DenseOutputTracksClosedForm) {
  const auto& entry = catalog::get("log_radial");
  std::vector<double> grid;
  for (int i = -10; i <= 40; ++i) grid.push_back(0.125 * i);
  const Vector x = v2(3.0, 0.4);
  const auto tr = sample_trajectory(*entry.vector_field_system, x, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_LT(entry.system.chart().distance(tr.states[i], log_radial_oracle(grid[i], x)), 1e-6) << grid[i];
  }
}

TEST(SampleTrajectory, RejectsUnsortedGrid) {
  const auto& sys = catalog::get("log_radial").system;
  EXPECT_THROW(sample_trajectory(sys, v2(1.0, 0.0), {0.0, 2.0, 1.0}), Error);
}

// Per-entry time window: forward-only for the annulus, and bounded backward
// time for log_radial, whose radius grows like exp(v0 e^{-t}).
namespace {

std::uniform_real_distribution<double> time_window(const std::string& name, double span) {
  if (name == "annulus_cubic") return std::uniform_real_distribution<double>(0.0, span);
  if (name == "log_radial") return std::uniform_real_distribution<double>(-0.5, span);
  return std::uniform_real_distribution<double>(-span, span);
}

}  // namespace

TEST(GroupLaw, ClosedFormEntries) {
  std::mt19937_64 rng(7);
  for (const auto& name : catalog::names()) {
    const auto& e = catalog::get(name);
    auto time = time_window(name, 3.0);
    std::vector<GroupLawSample> samples;
    for (int i = 0; i < 100; ++i) samples.push_back({e.sample_state(rng), time(rng), time(rng)});
    const auto rep = check_group_law(e.system, samples, 1e-9);
    EXPECT_TRUE(rep.pass) << name << " max " << rep.max_violation << " errors " << rep.errors;
  }
}

TEST(GroupLaw, LogRadialVectorField) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> time(-1.0, 2.0);
  const auto& e = catalog::get("log_radial");
  std::vector<GroupLawSample> samples;
  for (int i = 0; i < 100; ++i) samples.push_back({e.sample_state(rng), time(rng), time(rng)});
  EXPECT_TRUE(check_group_law(*e.vector_field_system, samples, 1e-6).pass);
}

TEST(GroupLaw, ZeroTimesExact) {
  const auto& e = catalog::get("log_radial");
  const auto rep = check_group_law(*e.vector_field_system, {{v2(2.0, 1.0), 0.0, 0.0}}, 0.0);
  EXPECT_TRUE(rep.pass);
  EXPECT_EQ(rep.max_violation, 0.0);
}

TEST(GroupLaw, DomainErrorsAreReportedPerSample) {
  const auto& sys = catalog::get("annulus_cubic").system;
  const auto rep = check_group_law(sys, {{v2(2.0, 0.0), -5.0, 0.0}, {v2(0.5, 0.0), 1.0, 1.0}}, 1e-9);
  EXPECT_EQ(rep.errors, 1u);
  EXPECT_FALSE(rep.pass);
  EXPECT_TRUE(std::isnan(rep.violation[0]));
  EXPECT_FALSE(rep.error[0].empty());
  EXPECT_LT(rep.violation[1], 1e-9);
}

TEST(Chart, EmittedAnglesAreCanonical) {
  std::mt19937_64 rng(13);
  for (const auto& name : catalog::names()) {
    const auto& e = catalog::get(name);
    auto time = time_window(name, 50.0);
    for (int i = 0; i < 50; ++i) {
      const Vector x = e.sample_state(rng);
      EXPECT_TRUE(e.system.chart().is_canonical(evolve(e.system, x, time(rng)))) << name;
    }
  }
}

TEST(Evolve, UnrepresentableStateIsRangeError) {
  const auto& sys = catalog::get("log_radial").system;
  try {
    evolve(sys, v2(std::exp(2.0), 0.0), -50.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::RangeError);
  }
}

TEST(Chart, TorusDistanceWrapsAround) {
  const auto c = ChartDescriptor::torus_angles(2);
  EXPECT_NEAR(c.distance(v2(0.95, 0.0), v2(0.05, 0.0)), 0.1, 1e-15);
  EXPECT_NEAR(c.distance(v2(0.0, 0.0), v2(0.5, 0.5)), std::sqrt(0.5), 1e-15);
  const auto p = ChartDescriptor::polar_annulus();
  EXPECT_NEAR(p.distance(v2(1.0, 0.1), v2(1.0, kTwoPi - 0.1)), 0.2, 1e-14);
}

TEST(Chart, SphereRotationKeepsLatitude) {
  const auto& sys = catalog::get("sphere_rotation").system;
  Vector x(3);
  x << std::sqrt(0.75), 0.0, 0.5;
  for (double t : {0.1, 0.37, 2.0}) {
    const Vector y = evolve(sys, x, t);
    EXPECT_NEAR(std::hypot(y[0], y[1]), std::sqrt(0.75), 1e-15);
    EXPECT_EQ(y[2], 0.5);
  }
}

// The adaptive controller keeps local error near the tolerance, so the order
// of the scheme shows up when the step is pinned: halving the step on
// t in [0, 5] must cut the error against the closed form by at least 8x.
TEST(Integrator, FourthOrderConvergenceOnLogRadial) {
  const auto& entry = catalog::get("log_radial");
  const Vector x = v2(std::exp(1.5), 0.2);
  auto max_error = [&](double step) {
    IntegratorSettings cfg;
    cfg.abs_tol = 1.0;
    cfg.rel_tol = 1.0;
    cfg.max_step = step;
    const auto sys = entry.vector_field_system->with_settings(cfg);
    double err = 0.0;
    for (double t = 0.5; t <= 5.0; t += 0.5) {
      err = std::max(err, entry.system.chart().distance(evolve(sys, x, t), log_radial_oracle(t, x)));
    }
    return err;
  };
  const double coarse = max_error(0.2);
  const double fine = max_error(0.1);
  EXPECT_GT(coarse / fine, 8.0) << coarse << " vs " << fine;
}

TEST(Integrator, TighterToleranceIsMoreAccurate) {
  const auto& entry = catalog::get("log_radial");
  const Vector x = v2(std::exp(1.5), 0.2);
  double prev = std::numeric_limits<double>::infinity();
  for (double tol : {1e-4, 1e-6, 1e-8, 1e-10}) {
    IntegratorSettings cfg;
    cfg.abs_tol = cfg.rel_tol = tol;
    const auto sys = entry.vector_field_system->with_settings(cfg);
    double err = 0.0;
    for (double t = 0.5; t <= 5.0; t += 0.5) {
      err = std::max(err, entry.system.chart().distance(evolve(sys, x, t), log_radial_oracle(t, x)));
    }
    EXPECT_LT(err, prev);
    prev = err;
  }
  EXPECT_LT(prev, 1e-8);
}

TEST(TrajectoryCsv, HeaderAndRows) {
  const auto& sys = catalog::get("quasiperiodic_torus_2").system;
  const auto tr = sample_trajectory(sys, v2(0.0, 0.0), {0.0, 1.0});
  std::ostringstream out;
  write_trajectory_csv(out, tr, 2);
  std::istringstream in(out.str());
  std::string header, row0, row1;
  std::getline(in, header);
  std::getline(in, row0);
  std::getline(in, row1);
  EXPECT_EQ(header, "t,x1,x2");
  EXPECT_EQ(row0, "0,0,0");
  // Seventeen significant digits round-trip exactly.
  const double back = std::stod(row1.substr(row1.rfind(',') + 1));
  EXPECT_EQ(back, tr.states[1][1]);
}

TEST(TrajectoryCsv, EmptyTrajectoryIsHeaderOnly) {
  std::ostringstream out;
  write_trajectory_csv(out, Trajectory{}, 3);
  EXPECT_EQ(out.str(), "t,x1,x2,x3\n");
}
