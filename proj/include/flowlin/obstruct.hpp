#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "flowlin/errors.hpp"
#include "flowlin/flows.hpp"
#include "flowlin/linalg.hpp"
#include "flowlin/parallel.hpp"

namespace flowlin {

// ---------------------------------------------------------------------------
// Hopf index
// ---------------------------------------------------------------------------

using PlanarVectorField = std::function<Eigen::Vector2d(const Eigen::Vector2d&)>;

struct EquilibriumReport {
  Eigen::Vector2d location = Eigen::Vector2d::Zero();
  int index = 0;
  std::size_t winding_samples = 0;
  double min_field_norm_on_circle = 0.0;
  double winding = 0.0;  // accumulated angle / 2 pi before rounding
};

inline constexpr std::size_t kMaxWindingSamples = std::size_t{1} << 20;
inline constexpr double kZeroFieldNorm = 1e-8;

/// Winding number of f/|f| along the circle |p - center| = radius.
/// Consecutive samples must turn by less than pi/2; otherwise the circle is
/// resampled at twice the density.
inline EquilibriumReport hopf_index_2d(const PlanarVectorField& field, const Eigen::Vector2d& center, double radius,
                                       std::size_t n_samples = 256) {
  if (n_samples < 64) raise(Errc::InvalidArgument, "hopf_index_2d needs at least 64 samples");
  if (!(radius > 0.0) || !std::isfinite(radius)) raise(Errc::InvalidArgument, "radius must be positive and finite");
  EquilibriumReport rep;
  rep.location = center;
  for (std::size_t n = n_samples;; n *= 2) {
    std::vector<Eigen::Vector2d> values(n);
    parallel_for(n, [&](std::size_t k) {
      const double a = kTwoPi * static_cast<double>(k) / static_cast<double>(n);
      values[k] = field(center + radius * Eigen::Vector2d(std::cos(a), std::sin(a)));
    });
    double min_norm = std::numeric_limits<double>::infinity();
    for (const auto& v : values) min_norm = std::min(min_norm, v.norm());
    rep.min_field_norm_on_circle = min_norm;
    if (!(min_norm > kZeroFieldNorm)) {
      raise(Errc::ZeroOnCircle, "field norm " + format_number(min_norm) + " on the circle; shrink or move it");
    }
    double total = 0.0;
    bool aliased = false;
    for (std::size_t k = 0; k < n; ++k) {
      const auto& u = values[k];
      const auto& v = values[(k + 1) % n];
      const double step = std::atan2(u.x() * v.y() - u.y() * v.x(), u.dot(v));
      if (std::abs(step) >= kPi / 2) aliased = true;
      total += step;
    }
    const double winding = total / kTwoPi;
    const double rounded = std::round(winding);
    if (!aliased && std::abs(total - kTwoPi * rounded) <= 0.1) {
      rep.index = static_cast<int>(rounded);
      rep.winding = winding;
      rep.winding_samples = n;
      return rep;
    }
    if (n >= kMaxWindingSamples) {
      raise(Errc::RangeError, "winding did not resolve within " + std::to_string(kMaxWindingSamples) + " samples");
    }
  }
}

// ---------------------------------------------------------------------------
// Verdicts
// ---------------------------------------------------------------------------

struct EquilibriumFact {
  std::optional<int> index;  // Hopf index when known
  bool isolated = true;
};

struct VerdictFacts {
  int dim = 0;
  bool compact = true;
  bool connected = true;
  std::vector<EquilibriumFact> equilibria;
  bool finitely_many_equilibria = true;
  std::optional<std::string> surface_type;
  std::optional<int> euler_characteristic;
};

enum class Conclusion { NotLinearizableSmooth, NoObstructionFound, CertifiedLinearizable };

inline std::string to_string(Conclusion c) {
  switch (c) {
    case Conclusion::NotLinearizableSmooth: return "NotLinearizableSmooth";
    case Conclusion::NoObstructionFound: return "NoObstructionFound";
    case Conclusion::CertifiedLinearizable: return "CertifiedLinearizable";
  }
  return "NoObstructionFound";
}

enum class RuleOutcome { Passed, Violated, NotApplicable };

inline std::string to_string(RuleOutcome o) {
  switch (o) {
    case RuleOutcome::Passed: return "passed";
    case RuleOutcome::Violated: return "violated";
    case RuleOutcome::NotApplicable: return "not_applicable";
  }
  return "not_applicable";
}

struct AppliedRule {
  std::string rule;
  RuleOutcome outcome = RuleOutcome::NotApplicable;
  std::string detail;
};

struct CertificateWitness {
  Vector omega;
  int bound = 0;
  std::size_t samples = 0;
  double max_residual = 0.0;
};

struct Verdict {
  Conclusion conclusion = Conclusion::NoObstructionFound;
  std::string rule;    // the single rule behind a NotLinearizableSmooth or a refusal
  std::string reason;
  std::vector<AppliedRule> applied_rules;
  std::optional<CertificateWitness> witness;
  std::optional<RationalIndependence> independence;
};

inline constexpr const char* kRuleOddDimension = "odd-dimension";
inline constexpr const char* kRuleHopfIndex = "hopf-index";
inline constexpr const char* kRuleEuler = "euler-characteristic";
inline constexpr const char* kRuleSurface = "surface-classification";

/// Euler characteristic of a named closed surface: sphere, torus, klein_bottle,
/// projective_plane, orientable_genus_<g>, nonorientable_genus_<k>.
inline std::optional<int> surface_euler_characteristic(const std::string& name) {
  if (name == "sphere") return 2;
  if (name == "torus") return 0;
  if (name == "klein_bottle") return 0;
  if (name == "projective_plane") return 1;
  auto suffix = [&](const std::string& prefix) -> std::optional<int> {
    if (name.rfind(prefix, 0) != 0 || name.size() == prefix.size()) return std::nullopt;
    const std::string digits = name.substr(prefix.size());
    if (digits.find_first_not_of("0123456789") != std::string::npos || digits.size() > 6) return std::nullopt;
    return std::stoi(digits);
  };
  if (auto g = suffix("orientable_genus_")) return 2 - 2 * *g;
  if (auto k = suffix("nonorientable_genus_"); k && *k >= 1) return 2 - *k;
  return std::nullopt;
}

/// Sphere, torus, Klein bottle or projective plane, under either naming.
inline bool admits_linearizable_flow(const std::string& surface) {
  static const std::set<std::string> allowed = {"sphere",         "torus",
                                                "klein_bottle",   "projective_plane",
                                                "orientable_genus_0", "orientable_genus_1",
                                                "nonorientable_genus_1", "nonorientable_genus_2"};
  return allowed.count(surface) > 0;
}

/// Necessary conditions for smooth linearizability, applied in order. Never
/// returns CertifiedLinearizable.
inline Verdict smooth_linearizability_verdict(const VerdictFacts& f) {
  if (f.dim < 0) raise(Errc::InconsistentFacts, "negative dimension");
  std::optional<int> surface_chi;
  if (f.surface_type) {
    if (f.dim != 2) raise(Errc::InconsistentFacts, "surface_type given for dimension " + std::to_string(f.dim));
    surface_chi = surface_euler_characteristic(*f.surface_type);
    if (!surface_chi) raise(Errc::InconsistentFacts, "unrecognised surface type '" + *f.surface_type + "'");
    if (f.euler_characteristic && *f.euler_characteristic != *surface_chi) {
      raise(Errc::InconsistentFacts, "euler characteristic " + std::to_string(*f.euler_characteristic) +
                                         " contradicts surface type " + *f.surface_type);
    }
  }
  const std::optional<int> chi = f.euler_characteristic;
  bool all_indices_known = f.finitely_many_equilibria;
  int index_sum = 0;
  for (const auto& e : f.equilibria) {
    if (!e.isolated || !e.index) all_indices_known = false;
    else index_sum += *e.index;
  }
  if (f.compact && chi && all_indices_known && index_sum != *chi) {
    raise(Errc::InconsistentFacts, "index sum " + std::to_string(index_sum) + " differs from euler characteristic " +
                                       std::to_string(*chi));
  }

  Verdict v;
  auto record = [&](const char* rule, RuleOutcome o, std::string detail) {
    v.applied_rules.push_back({rule, o, detail});
    if (o == RuleOutcome::Violated) {
      v.conclusion = Conclusion::NotLinearizableSmooth;
      v.rule = rule;
      v.reason = std::move(detail);
      return true;
    }
    return false;
  };
  if (!f.compact || !f.connected) {
    const std::string why = !f.compact ? "state space is not compact" : "state space is not connected";
    for (const char* r : {kRuleOddDimension, kRuleHopfIndex, kRuleEuler, kRuleSurface}) {
      record(r, RuleOutcome::NotApplicable, why);
    }
    return v;
  }

  std::size_t isolated = 0;
  for (const auto& e : f.equilibria) isolated += e.isolated ? 1 : 0;

  if (isolated == 0) {
    record(kRuleOddDimension, RuleOutcome::NotApplicable, "no isolated equilibrium");
  } else if (f.dim % 2 == 1) {
    if (record(kRuleOddDimension, RuleOutcome::Violated,
               "odd dimension " + std::to_string(f.dim) + " with an isolated equilibrium")) {
      return v;
    }
  } else {
    record(kRuleOddDimension, RuleOutcome::Passed, "even dimension");
  }

  bool any_index = false;
  for (std::size_t i = 0; i < f.equilibria.size(); ++i) {
    const auto& e = f.equilibria[i];
    if (!e.isolated || !e.index) continue;
    any_index = true;
    if (*e.index != 1) {
      if (record(kRuleHopfIndex, RuleOutcome::Violated,
                 "isolated equilibrium " + std::to_string(i) + " has Hopf index " + std::to_string(*e.index))) {
        return v;
      }
    }
  }
  record(kRuleHopfIndex, any_index ? RuleOutcome::Passed : RuleOutcome::NotApplicable,
         any_index ? "every known index equals 1" : "no isolated equilibrium with a known index");

  const std::size_t count = f.equilibria.size();
  if (!f.finitely_many_equilibria || !chi) {
    record(kRuleEuler, RuleOutcome::NotApplicable,
           !f.finitely_many_equilibria ? "equilibria are not finite" : "euler characteristic not supplied");
  } else if (*chi < 0 || static_cast<std::size_t>(*chi) != count) {
    if (record(kRuleEuler, RuleOutcome::Violated,
               "euler characteristic " + std::to_string(*chi) + " but " + std::to_string(count) + " equilibria")) {
      return v;
    }
  } else {
    record(kRuleEuler, RuleOutcome::Passed, "euler characteristic equals the number of equilibria");
  }

  if (!f.surface_type || !f.finitely_many_equilibria) {
    record(kRuleSurface, RuleOutcome::NotApplicable,
           !f.surface_type ? "surface type not supplied" : "equilibria are not finite");
  } else if (!admits_linearizable_flow(*f.surface_type)) {
    if (record(kRuleSurface, RuleOutcome::Violated,
               *f.surface_type + " is not a torus, sphere, Klein bottle or projective plane")) {
      return v;
    }
  } else {
    record(kRuleSurface, RuleOutcome::Passed, *f.surface_type + " admits linearizable flows");
  }
  return v;
}

// ---------------------------------------------------------------------------
// Quasiperiodic factor certificate
// ---------------------------------------------------------------------------

struct FactorSample {
  Vector x;
  double t = 0.0;
};

inline constexpr std::size_t kMinCertificateSamples = 100;

/// Grants CertifiedLinearizable iff omega has no integer relation with
/// coefficients bounded by Q and Fmap(flow(t, x)) = omega t + Fmap(x) mod 1 on
/// every sample. The grant is relative to Q and the samples.
inline Verdict quasiperiodic_factor_certificate(const FlowSystem& sys, const StateMap& fmap, const Vector& omega,
                                                int max_coeff, const std::vector<FactorSample>& samples,
                                                double tol = 1e-9) {
  const auto n = omega.size();
  if (sys.dim() != n) {
    raise(Errc::DimensionMismatch,
          "system dimension " + std::to_string(sys.dim()) + " differs from torus dimension " + std::to_string(n));
  }
  if (samples.size() < kMinCertificateSamples) {
    raise(Errc::InvalidArgument, "certificate needs at least 100 (x, t) samples");
  }
  Verdict v;
  const auto ri = rational_independence(omega, max_coeff, tol);
  v.independence = ri;
  if (!ri.independent) {
    std::string rel;
    for (std::size_t i = 0; i < ri.relation.size(); ++i) rel += (i ? "," : "") + std::to_string(ri.relation[i]);
    v.applied_rules.push_back({"rational-independence", RuleOutcome::Violated, "integer relation (" + rel + ")"});
    v.rule = "rational-independence";
    v.reason = "omega is rationally dependent: relation (" + rel + ")";
    return v;
  }
  v.applied_rules.push_back(
      {"rational-independence", RuleOutcome::Passed, "no relation with |k_i| <= " + std::to_string(max_coeff)});

  std::vector<double> residual(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    const auto& s = samples[i];
    if (std::abs(s.t) > 10.0) raise(Errc::InvalidArgument, "certificate samples need |t| <= 10");
    const Vector lhs = fmap(evolve(sys, s.x, s.t));
    const Vector rhs = fmap(s.x) + s.t * omega;
    double sq = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      const double d = angle_distance(lhs[k], rhs[k], 1.0);
      sq += d * d;
    }
    residual[i] = std::sqrt(sq);
  });
  double worst = 0.0;
  for (double r : residual) worst = std::max(worst, r);
  if (worst > tol) {
    v.applied_rules.push_back({"factor-equivariance", RuleOutcome::Violated, "residual " + format_number(worst)});
    v.rule = "factor-equivariance";
    v.reason = "Fmap is not a torus factor: residual " + format_number(worst);
    return v;
  }
  v.applied_rules.push_back({"factor-equivariance", RuleOutcome::Passed, "residual " + format_number(worst)});
  v.conclusion = Conclusion::CertifiedLinearizable;
  v.witness = CertificateWitness{omega, max_coeff, samples.size(), worst};
  v.reason = "rationally independent torus factor, relative to the coefficient bound and the sample set";
  return v;
}

}  // namespace flowlin
