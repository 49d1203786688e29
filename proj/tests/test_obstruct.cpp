#include <cmath>
#include <complex>
#include <random>

#include <gtest/gtest.h>

#include "flowlin/catalog.hpp"
#include "flowlin/obstruct.hpp"
#include "oracles.hpp"
#include "verdict_fixtures.hpp"

using namespace flowlin;

namespace {

using P2 = Eigen::Vector2d;

const PlanarVectorField kRotation = [](const P2& p) { return P2(-p.y(), p.x()); };
const PlanarVectorField kSaddle = [](const P2& p) { return P2(p.x(), -p.y()); };
const PlanarVectorField kNode = [](const P2& p) { return p; };
const PlanarVectorField kDipole = [](const P2& p) {
  const std::complex<double> z(p.x(), p.y());
  const auto w = z * z;
  return P2(w.real(), w.imag());
};

std::vector<FactorSample> factor_samples(const CatalogEntry& e, std::uint64_t seed, std::size_t n = 200) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> time(-10.0, 10.0);
  std::vector<FactorSample> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({e.sample_state(rng), time(rng)});
  return out;
}

Vector omega2(double a, double b) {
  Vector w(2);
  w << a, b;
  return w;
}

}  // namespace

TEST(HopfIndex, AgreesWithWindingOracle) {
  const std::vector<std::pair<PlanarVectorField, int>> cases = {
      {kRotation, 1}, {kSaddle, -1}, {kNode, 1}, {kDipole, 2}};
  for (const auto& [field, want] : cases) {
    for (double radius : {1.0, 0.5, 0.25}) {
      const auto rep = hopf_index_2d(field, P2::Zero(), radius);
      EXPECT_EQ(rep.index, want);
      EXPECT_EQ(rep.index, static_cast<int>(std::lround(oracle::winding(field, P2::Zero(), radius))));
      EXPECT_NEAR(rep.winding, want, 0.1 / kTwoPi);
    }
  }
}

TEST(HopfIndex, OffCentreCircleWithoutZerosHasIndexZero) {
  const auto rep = hopf_index_2d(kRotation, P2(3.0, 0.0), 1.0);
  EXPECT_EQ(rep.index, 0);
}

TEST(HopfIndex, DoublingSamplesKeepsIndex) {
  for (std::size_t n : {64u, 128u, 1024u}) EXPECT_EQ(hopf_index_2d(kDipole, P2::Zero(), 0.3, n).index, 2);
}

TEST(HopfIndex, HighDegreeFieldIsResampled) {
  // z^d turns by 2 pi d along the circle. At 64 samples z^20 steps by 1.96 rad and
  // z^40 by 3.93 rad, which a per-step atan2 would wrap; both must be resampled.
  for (int degree : {20, 40}) {
    const PlanarVectorField f = [degree](const P2& p) {
      const auto w = std::pow(std::complex<double>(p.x(), p.y()), degree);
      return P2(w.real(), w.imag());
    };
    const auto rep = hopf_index_2d(f, P2::Zero(), 1.0, 64);
    EXPECT_EQ(rep.index, degree);
    EXPECT_GT(rep.winding_samples, 64u);
    EXPECT_EQ(rep.index, static_cast<int>(std::lround(oracle::winding(f, P2::Zero(), 1.0))));
  }
}

TEST(HopfIndex, ZeroOnCircle) {
  try {
    hopf_index_2d(kRotation, P2(1.0, 0.0), 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ZeroOnCircle);
  }
  EXPECT_THROW(hopf_index_2d(kRotation, P2::Zero(), 1.0, 32), Error);
}

TEST(HopfIndex, CatalogEquilibria) {
  int sphere_sum = 0;
  for (const auto& name : catalog::names()) {
    const auto& e = catalog::get(name);
    for (const auto& eq : e.equilibria) {
      const auto rep = hopf_index_2d(eq.planar_field, eq.planar_center, 0.1);
      EXPECT_EQ(rep.index, eq.expected_index) << name;
      if (name == "sphere_rotation") sphere_sum += rep.index;
    }
  }
  EXPECT_EQ(sphere_sum, 2);
}

TEST(HopfIndex, SphereChartFieldMatchesAmbientField) {
  // In the graph chart over the north pole the ambient field (-2 pi y, 2 pi x, 0) projects to the planar field.
  const auto& e = catalog::get("sphere_rotation");
  const auto& eq = e.equilibria.front();
  const P2 p(0.05, -0.02);
  Vector x(3);
  x << p.x(), p.y(), std::sqrt(1.0 - p.squaredNorm());
  const Vector amb = e.vector_field_system->field()(x);
  EXPECT_LT((eq.planar_field(p) - amb.head<2>()).norm(), 1e-15);
}

TEST(Verdict, FixtureTable) {
  for (const auto& c : fixtures::verdict_cases()) {
    const auto v = smooth_linearizability_verdict(c.facts);
    EXPECT_EQ(v.conclusion, c.conclusion) << c.label;
    EXPECT_EQ(v.rule, c.rule) << c.label;
    if (v.conclusion == Conclusion::NotLinearizableSmooth) {
      EXPECT_FALSE(v.reason.empty());
      int violated = 0;
      for (const auto& r : v.applied_rules) violated += r.outcome == RuleOutcome::Violated;
      EXPECT_EQ(violated, 1) << c.label;
      EXPECT_EQ(v.applied_rules.back().rule, c.rule);
    }
  }
}

TEST(Verdict, NeverCertifies) {
  for (const auto& c : fixtures::verdict_cases()) {
    EXPECT_NE(smooth_linearizability_verdict(c.facts).conclusion, Conclusion::CertifiedLinearizable);
  }
}

TEST(Verdict, SphereRotationFacts) {
  VerdictFacts f;
  f.dim = 2;
  f.equilibria = fixtures::known({1, 1});
  f.surface_type = "sphere";
  f.euler_characteristic = 2;
  const auto v = smooth_linearizability_verdict(f);
  EXPECT_EQ(v.conclusion, Conclusion::NoObstructionFound);
  ASSERT_EQ(v.applied_rules.size(), 4u);
  for (const auto& r : v.applied_rules) EXPECT_EQ(r.outcome, RuleOutcome::Passed) << r.rule;
}

TEST(Verdict, NonCompactSpacesAreOutOfScope) {
  VerdictFacts f;
  f.dim = 2;
  f.compact = false;
  f.equilibria = fixtures::known({-1});
  const auto v = smooth_linearizability_verdict(f);
  EXPECT_EQ(v.conclusion, Conclusion::NoObstructionFound);
  for (const auto& r : v.applied_rules) EXPECT_EQ(r.outcome, RuleOutcome::NotApplicable);
}

TEST(Verdict, InconsistentFacts) {
  auto expect_inconsistent = [](const VerdictFacts& f) {
    try {
      smooth_linearizability_verdict(f);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::InconsistentFacts);
    }
  };
  VerdictFacts f;
  f.dim = 3;
  f.surface_type = "sphere";
  expect_inconsistent(f);
  f.dim = 2;
  f.surface_type = "pretzel";
  expect_inconsistent(f);
  f.surface_type = "torus";
  f.euler_characteristic = 2;
  expect_inconsistent(f);
  f.surface_type = "sphere";
  f.equilibria = fixtures::known({1});
  expect_inconsistent(f);  // indices sum to 1, not 2
}

TEST(Verdict, SurfaceEulerCharacteristics) {
  EXPECT_EQ(surface_euler_characteristic("sphere"), 2);
  EXPECT_EQ(surface_euler_characteristic("projective_plane"), 1);
  EXPECT_EQ(surface_euler_characteristic("orientable_genus_3"), -4);
  EXPECT_EQ(surface_euler_characteristic("nonorientable_genus_2"), 0);
  EXPECT_FALSE(surface_euler_characteristic("nonorientable_genus_0").has_value());
  EXPECT_FALSE(surface_euler_characteristic("orientable_genus_").has_value());
}

// Adding facts never flips NotLinearizableSmooth to NoObstructionFound.
TEST(Verdict, Monotonicity) {
  std::mt19937_64 rng(81);
  std::uniform_int_distribution<int> dim(1, 4), count(0, 4), idx(-2, 2), coin(0, 1);
  const std::vector<std::string> surfaces = {"sphere", "torus", "klein_bottle", "projective_plane",
                                             "orientable_genus_2", "nonorientable_genus_3"};
  std::uniform_int_distribution<std::size_t> pick(0, surfaces.size() - 1);
  int checked = 0;
  for (int trial = 0; trial < 4000; ++trial) {
    VerdictFacts full;
    full.dim = dim(rng);
    if (full.dim == 2 && coin(rng)) {
      full.surface_type = surfaces[pick(rng)];
      full.euler_characteristic = surface_euler_characteristic(*full.surface_type);
    }
    const int n = count(rng);
    for (int i = 0; i < n; ++i) full.equilibria.push_back({idx(rng), true});
    // Drop facts: forget some indices, the surface, or the Euler characteristic.
    VerdictFacts partial = full;
    for (auto& e : partial.equilibria) {
      if (coin(rng)) e.index.reset();
    }
    if (coin(rng)) partial.surface_type.reset();
    if (coin(rng)) partial.euler_characteristic.reset();
    Verdict vp, vf;
    try {
      vp = smooth_linearizability_verdict(partial);
      vf = smooth_linearizability_verdict(full);
    } catch (const Error& e) {
      ASSERT_EQ(e.code(), Errc::InconsistentFacts);
      continue;
    }
    ++checked;
    if (vp.conclusion == Conclusion::NotLinearizableSmooth) {
      EXPECT_EQ(vf.conclusion, Conclusion::NotLinearizableSmooth);
    }
  }
  EXPECT_GT(checked, 500);
}

TEST(Certificate, GrantsOnQuasiperiodicTorus) {
  const auto& e = catalog::get("quasiperiodic_torus_2");
  const auto v = quasiperiodic_factor_certificate(e.system, *e.torus_factor, omega2(1.0, std::sqrt(2.0)), 50,
                                                  factor_samples(e, 90));
  ASSERT_EQ(v.conclusion, Conclusion::CertifiedLinearizable);
  ASSERT_TRUE(v.witness.has_value());
  EXPECT_EQ(v.witness->bound, 50);
  EXPECT_LE(v.witness->max_residual, 1e-9);

  // Soundness: the granted system linearizes under the standard torus embedding.
  std::mt19937_64 rng(91);
  EXPECT_LE(catalog::exact_embedding_residual(e, catalog::sample_states(e, rng, 20), catalog::standard_times()),
            1e-8);
}

TEST(Certificate, RefusesRationalRatio) {
  const auto& e = catalog::get("quasiperiodic_torus_2");
  const auto v = quasiperiodic_factor_certificate(e.system, *e.torus_factor, omega2(1.0, 2.0), 50,
                                                  factor_samples(e, 92));
  EXPECT_EQ(v.conclusion, Conclusion::NoObstructionFound);
  EXPECT_EQ(v.rule, "rational-independence");
  ASSERT_TRUE(v.independence.has_value());
  EXPECT_EQ(v.independence->relation, (std::vector<std::int64_t>{2, -1}));
}

TEST(Certificate, RefusesWrongFrequency) {
  const auto& e = catalog::get("quasiperiodic_torus_2");
  const auto v = quasiperiodic_factor_certificate(e.system, *e.torus_factor, omega2(1.0, std::sqrt(3.0)), 50,
                                                  factor_samples(e, 93));
  EXPECT_EQ(v.conclusion, Conclusion::NoObstructionFound);
  EXPECT_EQ(v.rule, "factor-equivariance");
}

TEST(Certificate, DimensionMismatch) {
  const auto& e = catalog::get("sphere_rotation");
  try {
    quasiperiodic_factor_certificate(e.system, [](const Vector& x) { return x; }, omega2(1.0, std::sqrt(2.0)), 50,
                                     factor_samples(e, 94));
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), Errc::DimensionMismatch);
  }
}

TEST(Certificate, SampleRequirements) {
  const auto& e = catalog::get("quasiperiodic_torus_2");
  EXPECT_THROW(quasiperiodic_factor_certificate(e.system, *e.torus_factor, omega2(1.0, std::sqrt(2.0)), 50,
                                                factor_samples(e, 95, 50)),
               Error);
  auto samples = factor_samples(e, 96);
  samples[7].t = 11.0;
  EXPECT_THROW(quasiperiodic_factor_certificate(e.system, *e.torus_factor, omega2(1.0, std::sqrt(2.0)), 50, samples),
               Error);
}
