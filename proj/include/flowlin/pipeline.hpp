#pragma once

#include <random>
#include <string>
#include <vector>

#include "flowlin/catalog.hpp"
#include "flowlin/embed.hpp"
#include "flowlin/errors.hpp"
#include "flowlin/phase.hpp"

namespace flowlin {

enum class BuildMode { Topological, Smooth };

inline BuildMode parse_build_mode(const std::string& s) {
  if (s == "topological") return BuildMode::Topological;
  if (s == "smooth") return BuildMode::Smooth;
  raise(Errc::InvalidArgument, "mode must be topological or smooth, got '" + s + "'");
}

inline std::string to_string(BuildMode m) { return m == BuildMode::Topological ? "topological" : "smooth"; }

/// The entry's exact asymptotic phase, or one estimated by horizon refinement
/// when a probe point converges. A non-converging probe is a failed precondition.
inline StateMap phase_map_for(const CatalogEntry& entry, std::mt19937_64& rng,
                              const GeometricSchedule& schedule = GeometricSchedule{1.0, 2.0, 12}) {
  if (entry.exact_phase) return *entry.exact_phase;
  if (!entry.attractor) raise(Errc::PreconditionFailed, entry.name + " has no attractor and hence no asymptotic phase");
  const Vector probe = entry.sample_state(rng);
  const auto est = estimate_phase(entry.system, *entry.attractor, probe, schedule);
  if (est.classification != PhaseClass::Converged) {
    raise(Errc::PhaseMapInvalid, "asymptotic phase estimate is " + to_string(est.classification) +
                                     " (last horizon gap " + format_number(est.drift.last_gap) +
                                     ", total drift " + format_number(est.drift.total_drift) +
                                     "); there is no continuous asymptotic phase to build from");
  }
  const CatalogEntry* e = &entry;
  return [e, schedule](const Vector& x) -> Vector {
    const auto r = estimate_phase(e->system, *e->attractor, x, schedule);
    if (r.classification != PhaseClass::Converged) raise(Errc::PhaseMapInvalid, "phase estimate did not converge");
    return r.limit;
  };
}

inline BuildResult build_for(const CatalogEntry& entry, BuildMode mode, const std::vector<Vector>& samples,
                             std::mt19937_64& rng) {
  const StateMap phase = phase_map_for(entry, rng);
  if (!entry.attractor) raise(Errc::PreconditionFailed, entry.name + " has no attractor model");
  if (!entry.attractor_embedding) raise(Errc::MissingEmbedding, entry.name + " has no embedding of its attractor");
  if (!entry.lyapunov) raise(Errc::PreconditionFailed, entry.name + " has no Lyapunov data");
  BuildOptions opt;
  opt.samples = samples;
  if (entry.tangent_basis) opt.state_tangent_basis = *entry.tangent_basis;
  if (mode == BuildMode::Topological) {
    return build_topological_embedding(entry.system, *entry.attractor, phase, *entry.attractor_embedding,
                                       *entry.lyapunov, opt);
  }
  if (!entry.transverse) raise(Errc::PreconditionFailed, entry.name + " has no transverse map G");
  return build_smooth_embedding(entry.system, *entry.attractor, phase, *entry.attractor_embedding, *entry.transverse,
                                entry.lyapunov->value, entry.lyapunov->level, opt);
}

inline QualityOptions quality_options_for(const CatalogEntry& entry) {
  QualityOptions q;
  const CatalogEntry* e = &entry;
  q.distance = [e](const Vector& a, const Vector& b) { return e->distance(a, b); };
  if (entry.tangent_basis) q.tangent_basis = *entry.tangent_basis;
  q.escape_sequence = entry.escape_sequence;
  if (entry.lyapunov) q.escape_measure = entry.lyapunov->value;
  else q.escape_measure = [](const Vector& x) { return x.norm(); };
  return q;
}

}  // namespace flowlin
