#pragma once

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "flowlin/flowlin.hpp"
#include "flowlin/pinched_json.hpp"

namespace flowlin::cli {

using json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "flowlin 0.1.0";

enum Exit : int { kOk = 0, kCheckFailed = 1, kUsage = 2 };

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline json to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline json to_json(const std::vector<double>& v) { return json(v); }

inline json to_json(const Spectrum& s) {
  json a = json::array();
  for (const auto& z : s) {
    a.push_back({{"re", z.real()}, {"im", z.imag()}, {"abs", std::abs(z)}, {"arg", std::arg(z)}});
  }
  return a;
}

inline json to_json(const PhaseEstimate& e) {
  json est = json::array(), lifted = json::array();
  for (const auto& v : e.estimates) est.push_back(to_json(v));
  for (const auto& v : e.lifted_estimates) lifted.push_back(to_json(v));
  json out = {{"horizons", e.horizons},
              {"estimates", est},
              {"lifted_estimates", lifted},
              {"classification", to_string(e.classification)},
              {"limit", e.classification == PhaseClass::Converged ? to_json(e.limit) : json(nullptr)},
              {"rate", std::isfinite(e.rate) ? json(e.rate) : json(nullptr)},
              {"drift",
               {{"gaps", e.drift.gaps},
                {"first_gap", e.drift.first_gap},
                {"last_gap", e.drift.last_gap},
                {"total_drift", e.drift.total_drift},
                {"monotone_growth", e.drift.monotone_growth}}}};
  return out;
}

inline json to_json(const Verdict& v) {
  json rules = json::array();
  for (const auto& r : v.applied_rules) {
    rules.push_back({{"rule", r.rule}, {"outcome", to_string(r.outcome)}, {"detail", r.detail}});
  }
  json out = {{"conclusion", to_string(v.conclusion)},
              {"rule", v.rule.empty() ? json(nullptr) : json(v.rule)},
              {"reason", v.reason},
              {"applied_rules", rules}};
  if (v.independence) {
    out["rational_independence"] = {{"independent", v.independence->independent},
                                    {"bound", v.independence->bound},
                                    {"relation", v.independence->relation},
                                    {"residual", v.independence->residual}};
  }
  if (v.witness) {
    out["witness"] = {{"omega", to_json(v.witness->omega)},
                      {"Q", v.witness->bound},
                      {"samples", v.witness->samples},
                      {"max_residual", v.witness->max_residual}};
  }
  return out;
}

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

/// Report with per-check thresholds. Exit status follows the gating checks.
class Report {
 public:
  explicit Report(std::string command) {
    body_["tool_version"] = kToolVersion;
    body_["command"] = std::move(command);
    body_["config"] = json::object();
  }

  json& config() { return body_["config"]; }
  json& result() { return body_["result"]; }

  void check(const std::string& name, double value, const std::string& comparison, double threshold,
             bool gating = true) {
    bool pass = false;
    if (comparison == "<=") pass = value <= threshold;
    else if (comparison == "<") pass = value < threshold;
    else if (comparison == ">") pass = value > threshold;
    else if (comparison == ">=") pass = value >= threshold;
    else if (comparison == "==") pass = value == threshold;
    checks_.push_back({{"name", name},
                       {"value", finite_or_null(value)},
                       {"comparison", comparison},
                       {"threshold", threshold},
                       {"pass", pass},
                       {"gating", gating}});
    if (gating && !pass) pass_ = false;
  }

  void flag(const std::string& name, bool pass, const std::string& detail, bool gating = true) {
    checks_.push_back({{"name", name},
                       {"value", pass},
                       {"comparison", "=="},
                       {"threshold", true},
                       {"pass", pass},
                       {"gating", gating},
                       {"detail", detail}});
    if (gating && !pass) pass_ = false;
  }

  bool pass() const { return pass_; }

  json finish(std::optional<double> seconds) {
    body_["checks"] = checks_;
    body_["pass"] = pass_;
    if (seconds) body_["timing_seconds"] = *seconds;
    return body_;
  }

 private:
  json body_ = json::object();
  json checks_ = json::array();
  bool pass_ = true;
};

// ---------------------------------------------------------------------------
// Argument helpers
// ---------------------------------------------------------------------------

inline double parse_real(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    raise(Errc::InvalidArgument, "not a number: '" + s + "'");
  }
  if (used != s.size()) raise(Errc::InvalidArgument, "not a number: '" + s + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    const auto b = cur.find_first_not_of(" \t");
    const auto e = cur.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? "" : cur.substr(b, e - b + 1));
  }
  return out;
}

inline Vector parse_coords(const std::string& s) {
  const auto parts = split(s, ',');
  Vector v(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) v[static_cast<Eigen::Index>(i)] = parse_real(parts[i]);
  return v;
}

/// Number, sqrt(x) or c*sqrt(x).
inline double parse_frequency(const std::string& token) {
  const auto pos = token.find("sqrt(");
  if (pos == std::string::npos) return parse_real(token);
  if (token.back() != ')') raise(Errc::InvalidArgument, "malformed frequency '" + token + "'");
  const double radicand = parse_real(token.substr(pos + 5, token.size() - pos - 6));
  double coeff = 1.0;
  if (pos > 0) {
    if (token[pos - 1] != '*') raise(Errc::InvalidArgument, "malformed frequency '" + token + "'");
    coeff = parse_real(token.substr(0, pos - 1));
  }
  return coeff * std::sqrt(radicand);
}

inline Vector parse_omega(const std::string& s) {
  const auto parts = split(s, ',');
  Vector v(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) v[static_cast<Eigen::Index>(i)] = parse_frequency(parts[i]);
  return v;
}

/// Counts are read as reals so scientific notation works; they must be integral.
inline std::size_t as_count(double v, const std::string& flag, std::size_t min = 1) {
  if (!(v >= static_cast<double>(min)) || v != std::floor(v) || v > 1e9) {
    raise(Errc::InvalidArgument, flag + " must be an integer >= " + std::to_string(min));
  }
  return static_cast<std::size_t>(v);
}

inline void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) raise(Errc::InvalidArgument, "cannot write '" + path + "'");
  f << text;
  if (!f) raise(Errc::InvalidArgument, "write failed for '" + path + "'");
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

struct Common {
  std::uint64_t seed = 0;
  std::string out;
  bool timing = false;
};

inline void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "RNG seed (default 0)");
  sub->add_option("--out", c.out, "output path (default stdout)");
  sub->add_flag("--timing", c.timing, "include wall time in the report");
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline json entry_summary(const CatalogEntry& e) {
  return {{"name", e.name},
          {"expected_verdict", to_string(e.expected_verdict.kind)},
          {"reason", e.expected_verdict.reason}};
}

inline json entry_metadata(const CatalogEntry& e) {
  json j = entry_summary(e);
  j["description"] = e.description;
  j["chart"] = e.system.chart().describe();
  j["chart_dim"] = e.system.dim();
  j["manifold_dim"] = e.manifold_dim;
  j["compact"] = e.compact;
  j["closed_form"] = e.system.is_closed_form();
  j["vector_field"] = e.vector_field_system.has_value();
  j["surface_type"] = e.surface_type ? json(*e.surface_type) : json(nullptr);
  j["euler_characteristic"] = e.euler_characteristic ? json(*e.euler_characteristic) : json(nullptr);
  if (e.action) {
    j["action"] = {{"torus_dim", e.action->torus_dim}, {"omega", to_json(e.action->omega)}};
  } else {
    j["action"] = nullptr;
  }
  if (e.exact_embedding) {
    j["exact_embedding"] = {{"target_dim", e.exact_embedding->generator.dim()},
                            {"generator", to_json(e.exact_embedding->generator.matrix())}};
  } else {
    j["exact_embedding"] = nullptr;
  }
  j["exact_phase"] = e.exact_phase.has_value();
  j["lyapunov"] = e.lyapunov ? json({{"level", e.lyapunov->level}}) : json(nullptr);
  j["attractor_cloud_points"] = e.attractor ? json(e.attractor->cloud().size()) : json(nullptr);
  j["transverse_map"] = e.transverse ? json({{"generator", to_json(e.transverse->generator.matrix())}}) : json(nullptr);
  json eq = json::array();
  for (const auto& q : e.equilibria) {
    eq.push_back({{"location", to_json(q.location)}, {"expected_index", q.expected_index}, {"chart", q.chart}});
  }
  j["equilibria"] = eq;
  return j;
}

inline std::vector<double> verification_times(double tmax) {
  std::vector<double> out;
  for (double t : catalog::standard_times()) {
    if (t < tmax) out.push_back(t);
  }
  out.push_back(tmax);
  return out;
}

inline void evaluate_candidate(Report& rep, const CatalogEntry& entry, const EmbeddingCandidate& cand,
                               const std::vector<Vector>& states, const std::vector<double>& times, double tol) {
  const auto res = verify_linearization(cand, entry.system, states, times);
  const auto quality = verify_embedding_quality(cand, entry.system, states, quality_options_for(entry));
  rep.result()["provenance"] = to_string(cand.provenance);
  rep.result()["target_dim"] = cand.generator.dim();
  rep.result()["generator"] = to_json(cand.generator.matrix());
  rep.result()["residual"] = res.max;
  rep.result()["residual_by_time"] = res.by_time;
  rep.result()["injectivity_margin"] = finite_or_null(quality.injectivity_margin);
  rep.result()["min_jacobian_sigma"] = finite_or_null(quality.min_jacobian_sigma);
  const auto& p = quality.properness;
  rep.result()["properness_probe"] = {{"applicable", p.applicable},
                                      {"spearman", finite_or_null(p.spearman)},
                                      {"norm_growth", finite_or_null(p.norm_growth)},
                                      {"pass", p.pass}};
  rep.check("residual", res.max, "<=", tol);
  rep.check("injectivity_margin", quality.injectivity_margin, ">", QualityOptions{}.margin_floor);
  rep.check("min_jacobian_sigma", quality.min_jacobian_sigma, ">", QualityOptions{}.sigma_floor);
  if (p.applicable) rep.flag("properness_probe", p.pass, "rank correlation and norm growth along an escape sequence", false);
}

inline json diagnostics_json(const BuildDiagnostics& d) {
  return {{"phase",
           {{"idempotence_max", d.phase.idempotence_max},
            {"retraction_max", d.phase.retraction_max},
            {"equivariance_max", d.phase.equivariance_max},
            {"in_phase_failures", d.phase.in_phase_failures}}},
          {"attractor_residual", d.attractor_residual},
          {"level_set_norm_error", d.level_set_norm_error},
          {"lyapunov_on_attractor", d.lyapunov_on_attractor},
          {"transverse_equivariance", d.transverse_equivariance},
          {"max_generator_real_part", d.max_generator_real_part},
          {"kernel_tangent_max", d.kernel_tangent_max},
          {"kernel_transverse_min_sigma", finite_or_null(d.kernel_transverse_min_sigma)},
          {"kernel_points", d.kernel_points},
          {"overlap_max", d.overlap_max},
          {"overlap_points", d.overlap_points}};
}

struct VerifyArgs {
  std::string system;
  std::string embedding = "exact";
  std::string mode = "topological";
  double samples = 200;
  double tmax = 10.0;
  double tol = 1e-8;
};

inline int cmd_verify(const VerifyArgs& a, const Common& c, bool build_command, std::ostream& out) {
  Stopwatch sw;
  const auto& entry = catalog::get(a.system);
  const std::size_t n = as_count(a.samples, "--samples", 2);
  if (!(a.tmax >= 0.0)) raise(Errc::InvalidArgument, "--tmax must be >= 0");
  Report rep(build_command ? "build" : "verify");
  rep.config() = {{"system", a.system},
                  {"embedding", build_command ? "built" : a.embedding},
                  {"mode", a.mode},
                  {"samples", n},
                  {"tmax", a.tmax},
                  {"tol", a.tol},
                  {"seed", c.seed}};
  std::mt19937_64 rng(c.seed);
  const auto states = catalog::sample_states(entry, rng, n);
  EmbeddingCandidate cand;
  if (!build_command && a.embedding == "exact") {
    if (!entry.exact_embedding) raise(Errc::MissingEmbedding, entry.name + " has no exact embedding");
    cand = *entry.exact_embedding;
  } else if (build_command || a.embedding == "built") {
    const auto built = build_for(entry, parse_build_mode(a.mode), states, rng);
    cand = built.candidate;
    rep.result()["build_diagnostics"] = diagnostics_json(built.diagnostics);
  } else {
    raise(Errc::InvalidArgument, "--embedding must be exact or built");
  }
  evaluate_candidate(rep, entry, cand, states, verification_times(a.tmax), a.tol);
  const bool ok = rep.pass();
  emit(dump(rep.finish(c.timing ? std::optional<double>(sw.seconds()) : std::nullopt)), c.out, out);
  return ok ? kOk : kCheckFailed;
}

struct PhaseArgs {
  std::string system;
  std::string x;
  std::string schedule = "geometric:1,2,8";
  std::string expect;
};

inline GeometricSchedule parse_schedule(const std::string& s) {
  const std::string prefix = "geometric:";
  if (s.rfind(prefix, 0) != 0) raise(Errc::InvalidArgument, "schedule must be geometric:T0,ratio,count");
  const auto parts = split(s.substr(prefix.size()), ',');
  if (parts.size() != 3) raise(Errc::InvalidArgument, "schedule must be geometric:T0,ratio,count");
  GeometricSchedule g;
  g.t0 = parse_real(parts[0]);
  g.ratio = parse_real(parts[1]);
  g.count = static_cast<int>(as_count(parse_real(parts[2]), "schedule count"));
  return g;
}

inline int cmd_phase(const PhaseArgs& a, const Common& c, std::ostream& out) {
  Stopwatch sw;
  const auto& entry = catalog::get(a.system);
  if (!entry.attractor) raise(Errc::PreconditionFailed, entry.name + " has no attractor model");
  const Vector x = parse_coords(a.x);
  if (x.size() != entry.system.dim()) raise(Errc::InvalidArgument, "--x needs " + std::to_string(entry.system.dim()) + " coordinates");
  const auto schedule = parse_schedule(a.schedule);
  Report rep("phase");
  rep.config() = {{"system", a.system},
                  {"x", to_json(x)},
                  {"schedule", {{"t0", schedule.t0}, {"ratio", schedule.ratio}, {"count", schedule.count}}},
                  {"expect", a.expect.empty() ? json(nullptr) : json(a.expect)},
                  {"seed", c.seed}};
  const auto est = estimate_phase(entry.system, *entry.attractor, x, schedule);
  rep.result() = to_json(est);
  if (entry.exact_phase) {
    const Vector exact = (*entry.exact_phase)(x);
    std::vector<double> err;
    for (const auto& e : est.estimates) err.push_back(entry.system.chart().distance(e, exact));
    rep.result()["exact_phase"] = to_json(exact);
    rep.result()["error_vs_exact"] = err;
  }
  if (!a.expect.empty()) {
    std::string want = a.expect;
    if (want == "converged") want = "Converged";
    else if (want == "diverged") want = "Diverged";
    else if (want == "inconclusive") want = "Inconclusive";
    else raise(Errc::InvalidArgument, "--expect must be converged, diverged or inconclusive");
    rep.flag("classification", to_string(est.classification) == want, "expected " + want);
  }
  const bool ok = rep.pass();
  emit(dump(rep.finish(c.timing ? std::optional<double>(sw.seconds()) : std::nullopt)), c.out, out);
  return ok ? kOk : kCheckFailed;
}

struct IndexArgs {
  std::string system;
  std::string equilibrium;
  double radius = 0.1;
  double samples = 256;
};

inline const CatalogEquilibrium& find_equilibrium(const CatalogEntry& entry, const Vector& at) {
  for (const auto& q : entry.equilibria) {
    if (q.location.size() == at.size() && (q.location - at).norm() <= 1e-9) return q;
  }
  raise(Errc::InvalidArgument, entry.name + " has no catalogued equilibrium at the given coordinates");
}

inline int cmd_index(const IndexArgs& a, const Common& c, std::ostream& out) {
  Stopwatch sw;
  const auto& entry = catalog::get(a.system);
  const auto& eq = find_equilibrium(entry, parse_coords(a.equilibrium));
  const std::size_t n = as_count(a.samples, "--samples", 64);
  const auto r = hopf_index_2d(eq.planar_field, eq.planar_center, a.radius, n);
  Report rep("index");
  rep.config() = {{"system", a.system}, {"equilibrium", to_json(eq.location)}, {"radius", a.radius}, {"samples", n},
                  {"seed", c.seed}};
  rep.result() = {{"chart", eq.chart},
                  {"index", r.index},
                  {"winding", r.winding},
                  {"winding_samples", r.winding_samples},
                  {"min_field_norm_on_circle", r.min_field_norm_on_circle},
                  {"expected_index", eq.expected_index}};
  rep.check("index", r.index, "==", eq.expected_index);
  const bool ok = rep.pass();
  emit(dump(rep.finish(c.timing ? std::optional<double>(sw.seconds()) : std::nullopt)), c.out, out);
  return ok ? kOk : kCheckFailed;
}

inline VerdictFacts facts_for(const CatalogEntry& entry, json* record = nullptr) {
  VerdictFacts f;
  f.dim = entry.manifold_dim;
  f.compact = entry.compact;
  f.surface_type = entry.surface_type;
  f.euler_characteristic = entry.euler_characteristic;
  json eqs = json::array();
  for (const auto& q : entry.equilibria) {
    const auto r = hopf_index_2d(q.planar_field, q.planar_center, 0.1, 256);
    f.equilibria.push_back({r.index, true});
    eqs.push_back({{"location", to_json(q.location)}, {"index", r.index}, {"winding_samples", r.winding_samples}});
  }
  if (record) {
    *record = {{"dim", f.dim},
               {"compact", f.compact},
               {"equilibria", eqs},
               {"surface_type", f.surface_type ? json(*f.surface_type) : json(nullptr)},
               {"euler_characteristic", f.euler_characteristic ? json(*f.euler_characteristic) : json(nullptr)}};
  }
  return f;
}

inline int cmd_verdict(const std::string& system, const Common& c, std::ostream& out) {
  Stopwatch sw;
  const auto& entry = catalog::get(system);
  Report rep("verdict");
  rep.config() = {{"system", system}, {"seed", c.seed}};
  json facts;
  const auto v = smooth_linearizability_verdict(facts_for(entry, &facts));
  rep.result() = {{"facts", facts},
                  {"verdict", to_json(v)},
                  {"catalog_verdict", to_string(entry.expected_verdict.kind)}};
  const bool contradiction = v.conclusion == Conclusion::NotLinearizableSmooth &&
                             entry.expected_verdict.kind == VerdictKind::LinearizableSmooth;
  rep.flag("consistent_with_catalog", !contradiction, "a necessary condition must not fail for a linearizable entry");
  const bool ok = rep.pass();
  emit(dump(rep.finish(c.timing ? std::optional<double>(sw.seconds()) : std::nullopt)), c.out, out);
  return ok ? kOk : kCheckFailed;
}

struct CertifyArgs {
  std::string system;
  std::string omega;
  int q = 50;
  double samples = 200;
  double tol = 1e-9;
};

inline EmbeddingCandidate standard_torus_embedding(const Vector& omega) {
  const auto n = omega.size();
  std::vector<Matrix> blocks;
  for (Eigen::Index i = 0; i < n; ++i) blocks.push_back(rotation_block(kTwoPi * omega[i]));
  return EmbeddingCandidate{[n](const Vector& x) -> Vector {
                              Vector y(2 * n);
                              for (Eigen::Index i = 0; i < n; ++i) {
                                y[2 * i] = std::cos(kTwoPi * x[i]);
                                y[2 * i + 1] = std::sin(kTwoPi * x[i]);
                              }
                              return y;
                            },
                            LinearGenerator(block_diagonal(blocks)), Provenance::Exact};
}

inline int cmd_certify(const CertifyArgs& a, const Common& c, std::ostream& out) {
  Stopwatch sw;
  const auto& entry = catalog::get(a.system);
  const Vector omega = parse_omega(a.omega);
  const std::size_t n = as_count(a.samples, "--samples", kMinCertificateSamples);
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> time(-10.0, 10.0);
  std::vector<FactorSample> samples;
  for (std::size_t i = 0; i < n; ++i) {
    Vector x = entry.sample_state(rng);
    samples.push_back({std::move(x), time(rng)});
  }
  const StateMap fmap = entry.torus_factor ? *entry.torus_factor : StateMap([](const Vector& x) { return x; });
  Report rep("certify");
  rep.config() = {{"system", a.system}, {"omega", to_json(omega)}, {"Q", a.q}, {"samples", n}, {"tol", a.tol},
                  {"seed", c.seed}};
  const auto v = quasiperiodic_factor_certificate(entry.system, fmap, omega, a.q, samples, a.tol);
  rep.result()["verdict"] = to_json(v);
  rep.flag("certified", v.conclusion == Conclusion::CertifiedLinearizable, v.reason);
  if (v.conclusion == Conclusion::CertifiedLinearizable) {
    std::vector<Vector> states;
    for (std::size_t i = 0; i < 20; ++i) states.push_back(entry.sample_state(rng));
    const auto std_embed = standard_torus_embedding(omega);
    EmbeddingCandidate composed{[fmap, std_embed](const Vector& x) { return std_embed.map(fmap(x)); },
                                std_embed.generator, Provenance::Exact};
    const double res = verify_linearization(composed, entry.system, states, catalog::standard_times()).max;
    rep.result()["standard_embedding_residual"] = res;
    rep.check("standard_embedding_residual", res, "<=", 1e-8);
  }
  const bool ok = rep.pass();
  emit(dump(rep.finish(c.timing ? std::optional<double>(sw.seconds()) : std::nullopt)), c.out, out);
  return ok ? kOk : kCheckFailed;
}

struct PinchedArgs {
  std::string spec;
  bool check = false;
  double samples = 1000;
  std::string trajectory;
  double tmax = 10.0;
  double points = 1000;
};

inline json spec_json(const PinchedTorusSpec& spec) {
  json terms = json::array();
  for (const auto& t : spec.omega_terms) {
    json coeffs = json::array();
    for (const auto& r : t.coefficients) coeffs.push_back(rational_text(r));
    terms.push_back({{"rational", coeffs}, {"prime_scale", t.prime_scale}});
  }
  return {{"n", spec.n}, {"m", spec.m}, {"M", to_json(Matrix(spec.M.cast<double>()))}, {"omega_terms", terms},
          {"omega", to_json(spec.omega)}};
}

inline int cmd_pinched(const PinchedArgs& a, const Common& c, std::ostream& out) {
  Stopwatch sw;
  const auto spec = parse_pinched_spec(read_json_file(a.spec));
  if (!a.trajectory.empty()) {
    const auto x0 = read_json_file(a.trajectory);
    if (!x0.contains("theta")) raise(Errc::ParseError, a.trajectory + ": expected {\"theta\": [...]}");
    const auto theta = x0.at("theta").get<std::vector<double>>();
    const auto p = make_point(spec, Eigen::Map<const Vector>(theta.data(), static_cast<Eigen::Index>(theta.size())));
    const auto traj = embedded_trajectory(spec, p, a.tmax, as_count(a.points, "--points", 0));
    std::ostringstream csv;
    write_trajectory_csv(csv, traj, 2 * (spec.n + spec.m), embedding_columns(spec));
    emit(csv.str(), c.out, out);
    return kOk;
  }
  if (!a.check) raise(Errc::InvalidArgument, "pinched needs --check or --emit-trajectory");
  const std::size_t n = as_count(a.samples, "--samples", 100);
  std::mt19937_64 rng(c.seed);
  const auto r = verify_family(spec, n, rng);
  const auto kernel = kernel_direction(spec.M);
  Report rep("pinched");
  rep.config() = {{"spec", a.spec}, {"samples", n}, {"seed", c.seed}};
  rep.result() = {{"spec", spec_json(spec)},
                  {"kernel_dim", kernel.basis.size()},
                  {"zero_kernel", kernel.zero_kernel},
                  {"samples", r.samples},
                  {"collapsed_samples", r.collapsed_samples},
                  {"linearity_residual", r.linearity_residual},
                  {"quotient_pairs", r.quotient_pairs},
                  {"quotient_mismatches", r.quotient_mismatches},
                  {"separation_pairs", r.separation_pairs},
                  {"separation_margin", finite_or_null(r.separation_margin)},
                  {"max_pinched_modulus", r.max_pinched_modulus},
                  {"max_base_modulus", r.max_base_modulus}};
  rep.check("linearity_residual", r.linearity_residual, "<=", r.linearity_tolerance);
  rep.check("quotient_mismatches", static_cast<double>(r.quotient_mismatches), "==", 0.0);
  rep.check("separation_margin", r.separation_margin, ">", 0.0);
  const bool ok = rep.pass();
  emit(dump(rep.finish(c.timing ? std::optional<double>(sw.seconds()) : std::nullopt)), c.out, out);
  return ok ? kOk : kCheckFailed;
}

struct EdmdArgs {
  std::string system;
  std::string dict = "fourier:1";
  double pairs = 500;
  double step = 0.1;
  double ridge = 1e-10;
};

inline int cmd_edmd(const EdmdArgs& a, const Common& c, std::ostream& out) {
  Stopwatch sw;
  const auto& entry = catalog::get(a.system);
  const auto dict = parse_dictionary(a.dict, entry);
  const std::size_t n = as_count(a.pairs, "--pairs", 1);
  const std::size_t n_holdout = std::max<std::size_t>(n / 4, 50);
  std::mt19937_64 rng(c.seed);
  const auto train = collect_snapshots(entry.system, catalog::sample_states(entry, rng, n), a.step);
  const auto holdout = collect_snapshots(entry.system, catalog::sample_states(entry, rng, n_holdout), a.step);
  const auto model = fit(dict, train, a.ridge);
  const auto d = diagnose(model, dict, entry, holdout);
  Report rep("edmd");
  rep.config() = {{"system", a.system}, {"dict", a.dict}, {"pairs", n}, {"holdout", n_holdout},
                  {"step", a.step},     {"ridge", a.ridge}, {"seed", c.seed}};
  json diag = {{"holdout_residual", d.holdout_residual},
               {"lift_injectivity_margin", finite_or_null(d.lift_injectivity_margin)},
               {"spectrum_on_unit_circle_fraction", d.spectrum_on_unit_circle_fraction},
               {"max_unit_circle_deviation", d.max_unit_circle_deviation},
               {"label", d.label ? json(*d.label) : json(nullptr)},
               {"explanation", d.explanation},
               {"phase_divergence_attachment", d.phase_divergence ? to_json(*d.phase_divergence) : json(nullptr)},
               {"phase_probe_point", d.phase_probe_point ? to_json(*d.phase_probe_point) : json(nullptr)}};
  rep.result() = {{"dictionary", {{"label", dict.label}, {"size", dict.size()}, {"names", dict.names}}},
                  {"training_residual", model.training_residual},
                  {"gram_condition", finite_or_null(model.gram_condition)},
                  {"spectrum", to_json(model.spectrum)},
                  {"K", to_json(model.K)},
                  {"diagnosis", diag}};
  emit(dump(rep.finish(c.timing ? std::optional<double>(sw.seconds()) : std::nullopt)), c.out, out);
  return kOk;
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"flowlin: linearizing embeddings, asymptotic phase, and obstructions for catalogued flows", "flowlin"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  Common common;
  std::function<int()> action;

  auto* cat = app.add_subcommand("catalog", "list or describe catalog entries");
  cat->require_subcommand(1);
  auto* cat_list = cat->add_subcommand("list", "names and expected verdicts (JSON)");
  auto* cat_show = cat->add_subcommand("show", "metadata of one entry (JSON)");
  std::string show_name;
  cat_show->add_option("name", show_name, "catalog entry")->required();
  for (auto* s : {cat_list, cat_show}) s->add_option("--out", common.out, "output path (default stdout)");
  cat_list->callback([&] {
    action = [&] {
      json arr = json::array();
      for (const auto& name : catalog::names()) arr.push_back(entry_summary(catalog::get(name)));
      emit(dump(arr), common.out, out);
      return int(kOk);
    };
  });
  cat_show->callback([&] {
    action = [&] {
      emit(dump(entry_metadata(catalog::get(show_name))), common.out, out);
      return int(kOk);
    };
  });

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "check F(flow(t,x)) = exp(Bt) F(x) and embedding quality");
  verify->add_option("--system", va.system, "catalog entry")->required();
  verify->add_option("--embedding", va.embedding, "exact|built")->check(CLI::IsMember({"exact", "built"}));
  verify->add_option("--mode", va.mode, "builder for --embedding built: topological|smooth")
      ->check(CLI::IsMember({"topological", "smooth"}));
  verify->add_option("--samples", va.samples, "random states (default 200)");
  verify->add_option("--tmax", va.tmax, "largest time checked (default 10)");
  verify->add_option("--tol", va.tol, "residual tolerance (default 1e-8)");
  add_common(verify, common);
  verify->callback([&] { action = [&] { return cmd_verify(va, common, false, out); }; });

  VerifyArgs ba;
  ba.tol = 1e-6;
  auto* build = app.add_subcommand("build", "construct an embedding from attractor data and check it");
  build->add_option("--system", ba.system, "catalog entry")->required();
  build->add_option("--mode", ba.mode, "topological|smooth")->check(CLI::IsMember({"topological", "smooth"}));
  build->add_option("--samples", ba.samples, "basin samples (default 200)");
  build->add_option("--tmax", ba.tmax, "largest time checked (default 10)");
  build->add_option("--tol", ba.tol, "residual tolerance (default 1e-6)");
  add_common(build, common);
  build->callback([&] { action = [&] { return cmd_verify(ba, common, true, out); }; });

  PhaseArgs pa;
  auto* phase = app.add_subcommand("phase", "estimate the asymptotic phase of a basin point");
  phase->add_option("--system", pa.system, "catalog entry")->required();
  phase->add_option("--x", pa.x, "state coordinates, comma separated")->required();
  phase->add_option("--schedule", pa.schedule, "geometric:T0,ratio,count (default geometric:1,2,8)");
  phase->add_option("--expect", pa.expect, "converged|diverged|inconclusive; exit 1 on mismatch");
  add_common(phase, common);
  phase->callback([&] { action = [&] { return cmd_phase(pa, common, out); }; });

  IndexArgs ia;
  auto* index = app.add_subcommand("index", "Hopf index of a catalogued equilibrium");
  index->add_option("--system", ia.system, "catalog entry")->required();
  index->add_option("--equilibrium", ia.equilibrium, "equilibrium coordinates, comma separated")->required();
  index->add_option("--radius", ia.radius, "circle radius in the planar chart (default 0.1)");
  index->add_option("--samples", ia.samples, "initial circle samples, >= 64 (default 256)");
  add_common(index, common);
  index->callback([&] { action = [&] { return cmd_index(ia, common, out); }; });

  std::string verdict_system;
  auto* verdict = app.add_subcommand("verdict", "apply the necessary conditions for smooth linearizability");
  verdict->add_option("--system", verdict_system, "catalog entry")->required();
  add_common(verdict, common);
  verdict->callback([&] { action = [&] { return cmd_verdict(verdict_system, common, out); }; });

  CertifyArgs ca;
  auto* certify = app.add_subcommand("certify", "quasiperiodic torus factor certificate");
  certify->add_option("--system", ca.system, "catalog entry")->required();
  certify->add_option("--omega", ca.omega, "frequencies, e.g. \"1,sqrt(2)\"")->required();
  certify->add_option("--Q", ca.q, "integer relation bound (default 50)");
  certify->add_option("--samples", ca.samples, "random (x, t) pairs, >= 100 (default 200)");
  certify->add_option("--tol", ca.tol, "tolerance (default 1e-9)");
  add_common(certify, common);
  certify->callback([&] { action = [&] { return cmd_certify(ca, common, out); }; });

  PinchedArgs pi;
  auto* pinched = app.add_subcommand("pinched", "check a pinched torus family or emit an embedded orbit");
  pinched->add_option("--spec", pi.spec, "family spec (JSON)")->required();
  pinched->add_flag("--check", pi.check, "run the family checks");
  pinched->add_option("--samples", pi.samples, "family samples, >= 100 (default 1000)");
  pinched->add_option("--emit-trajectory", pi.trajectory, "initial point {\"theta\": [...]} (JSON); writes CSV");
  pinched->add_option("--tmax", pi.tmax, "trajectory end time (default 10)");
  pinched->add_option("--points", pi.points, "trajectory rows (default 1000)");
  add_common(pinched, common);
  pinched->callback([&] { action = [&] { return cmd_pinched(pi, common, out); }; });

  EdmdArgs ea;
  auto* edmd = app.add_subcommand("edmd", "fit and diagnose extended dynamic mode decomposition");
  edmd->add_option("--system", ea.system, "catalog entry")->required();
  edmd->add_option("--dict", ea.dict, "fourier:d | monomial:d | custom:<entry> (default fourier:1)");
  edmd->add_option("--pairs", ea.pairs, "training pairs (default 500)");
  edmd->add_option("--step", ea.step, "snapshot step h > 0 (default 0.1)");
  edmd->add_option("--ridge", ea.ridge, "Tikhonov parameter (default 1e-10)");
  add_common(edmd, common);
  edmd->callback([&] { action = [&] { return cmd_edmd(ea, common, out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }
  try {
    return action ? action() : int(kUsage);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
}

}  // namespace flowlin::cli
