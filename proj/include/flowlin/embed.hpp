#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "flowlin/errors.hpp"
#include "flowlin/flows.hpp"
#include "flowlin/linalg.hpp"
#include "flowlin/parallel.hpp"
#include "flowlin/phase.hpp"

namespace flowlin {

/// Lyapunov function V for A = V^{-1}(0), a level c, and an embedding of the
/// level set N = V^{-1}(c) into a unit sphere.
struct LyapunovData {
  ScalarMap value;
  double level = 1.0;
  StateMap level_set_embedding;
};

enum class Provenance { Exact, BuiltTopological, BuiltSmooth, EDMD };

inline std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::Exact: return "exact";
    case Provenance::BuiltTopological: return "built_topological";
    case Provenance::BuiltSmooth: return "built_smooth";
    case Provenance::EDMD: return "edmd";
  }
  return "exact";
}

/// A state map F paired with the generator B it is claimed to linearize against.
struct EmbeddingCandidate {
  StateMap map;
  LinearGenerator generator;
  Provenance provenance = Provenance::Exact;
};

/// Linear-flow equivariant map G with its generator and domain U.
struct TransverseMap {
  StateMap map;
  LinearGenerator generator;
  std::function<bool(const Vector&)> in_domain = [](const Vector&) { return true; };
};

// ---------------------------------------------------------------------------
// Time to impact
// ---------------------------------------------------------------------------

inline constexpr double kImpactWindow = 100.0;

/// Unique tau with V(flow(tau, x)) = c. Bracket grows geometrically from
/// [-1, 1] up to |tau| <= 100, then bisection with a Newton polish. tol bounds
/// the level residual; V(x) <= attractor_tol (default tol) counts as on A.
inline double impact_time(const FlowSystem& sys, const ScalarMap& lyapunov, double level,
                          const Vector& x, double tol = 1e-12,
                          std::optional<double> attractor_tol = std::nullopt) {
  const double v0 = lyapunov(x);
  if (v0 <= attractor_tol.value_or(tol)) raise(Errc::OnAttractor, "V(x) = " + format_number(v0) + " is within tolerance of zero");
  // A state too large to represent lies beyond every finite level set.
  auto g = [&](double tau) {
    try {
      return lyapunov(evolve(sys, x, tau)) - level;
    } catch (const Error& e) {
      if (e.code() != Errc::RangeError) throw;
      return std::numeric_limits<double>::infinity();
    }
  };

  const double floor_t = sys.t_min(x);
  auto clamp_low = [&](double t) {
    if (std::isfinite(floor_t) && t <= floor_t) return floor_t + 1e-9 * std::max(1.0, std::abs(floor_t));
    return t;
  };
  double lo = clamp_low(-1.0), hi = 1.0;
  double g_lo = g(lo), g_hi = g(hi);
  while (g_hi > 0.0) {
    if (hi >= kImpactWindow) raise(Errc::BracketFailure, "no level crossing forward within the window");
    hi = std::min(2.0 * hi, kImpactWindow);
    g_hi = g(hi);
  }
  while (g_lo < 0.0) {
    const double next = clamp_low(std::max(2.0 * lo, -kImpactWindow));
    if (next == lo || lo <= -kImpactWindow) {
      raise(Errc::BracketFailure, "no level crossing backward within the window");
    }
    lo = next;
    g_lo = g(lo);
  }
  if (g_lo == 0.0) return lo;
  if (g_hi == 0.0) return hi;

  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double gm = g(mid);
    if (gm == 0.0) return mid;
    if (gm > 0.0) lo = mid;
    else hi = mid;
    if (hi - lo <= 4 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(mid))) break;
  }
  double tau = 0.5 * (lo + hi);
  double g_tau = g(tau);
  for (int polish = 0; polish < 3 && g_tau != 0.0; ++polish) {
    constexpr double h = 1e-6;
    const double slope = (g(tau + h) - g(tau - h)) / (2 * h);
    if (!(slope < 0.0)) break;
    const double cand = tau - g_tau / slope;
    if (!(cand >= lo - 1e-9 && cand <= hi + 1e-9)) break;
    const double g_cand = g(cand);
    if (std::abs(g_cand) >= std::abs(g_tau)) break;
    tau = cand;
    g_tau = g_cand;
  }
  if (std::abs(g_tau) > tol) {
    raise(Errc::BracketFailure, "level residual " + format_number(std::abs(g_tau)) + " exceeds tolerance");
  }
  return tau;
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

struct LinearizationResidual {
  double max = 0.0;
  std::vector<double> by_time;  // max over states for each time
};

/// max |F(flow(t, x)) - exp(B t) F(x)| over states x times t.
inline LinearizationResidual verify_linearization(const EmbeddingCandidate& cand, const FlowSystem& sys,
                                                  const std::vector<Vector>& states,
                                                  const std::vector<double>& times) {
  std::vector<Matrix> propagators;
  propagators.reserve(times.size());
  for (double t : times) propagators.push_back(matrix_exp(cand.generator, t));
  std::vector<std::vector<double>> table(states.size(), std::vector<double>(times.size(), 0.0));
  parallel_for(states.size(), [&](std::size_t i) {
    const Vector fx = cand.map(states[i]);
    for (std::size_t j = 0; j < times.size(); ++j) {
      const Vector lhs = cand.map(evolve(sys, states[i], times[j]));
      table[i][j] = (lhs - propagators[j] * fx).norm();
    }
  });
  LinearizationResidual out;
  out.by_time.assign(times.size(), 0.0);
  for (const auto& row : table) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      out.by_time[j] = std::max(out.by_time[j], row[j]);
      out.max = std::max(out.max, row[j]);
    }
  }
  return out;
}

using StateDistance = std::function<double(const Vector&, const Vector&)>;
using TangentBasisMap = std::function<Matrix(const Vector&)>;

struct QualityOptions {
  double fd_step = 1e-5;
  double sigma_floor = 1e-6;
  double margin_floor = 1e-6;
  StateDistance distance;        // defaults to the chart distance
  TangentBasisMap tangent_basis; // defaults to chart coordinate axes
  std::vector<Vector> escape_sequence;
  ScalarMap escape_measure;      // V, or any escape proxy
  double min_spearman = 0.9;
  double min_norm_growth = 2.0;
};

struct PropernessProbe {
  bool applicable = false;
  double spearman = std::numeric_limits<double>::quiet_NaN();
  double norm_growth = std::numeric_limits<double>::quiet_NaN();
  bool pass = true;
};

struct QualityReport {
  double injectivity_margin = std::numeric_limits<double>::infinity();
  bool injectivity_flagged = false;
  double min_jacobian_sigma = std::numeric_limits<double>::infinity();
  bool sigma_flagged = false;
  PropernessProbe properness;
  std::size_t samples = 0;
};

namespace detail {

inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j);
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace detail

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const auto ra = detail::ranks(a);
  const auto rb = detail::ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0 || sbb == 0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

/// Central finite-difference Jacobian of F along the columns of a basis.
inline Matrix directional_jacobian(const StateMap& f, const Vector& x, const Matrix& basis, double step) {
  Matrix jac;
  for (Eigen::Index k = 0; k < basis.cols(); ++k) {
    const Vector fp = f(x + step * basis.col(k));
    const Vector fm = f(x - step * basis.col(k));
    if (k == 0) jac.resize(fp.size(), basis.cols());
    jac.col(k) = (fp - fm) / (2 * step);
  }
  return jac;
}

inline double min_singular_value(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  if (m.cols() > m.rows()) return 0.0;
  return s(s.size() - 1);
}

/// Injectivity margin, immersion floor, and properness probe on samples.
inline QualityReport verify_embedding_quality(const EmbeddingCandidate& cand, const FlowSystem& sys,
                                              const std::vector<Vector>& samples,
                                              const QualityOptions& opt = {}) {
  QualityReport rep;
  rep.samples = samples.size();
  const auto& chart = sys.chart();
  const StateDistance dist = opt.distance ? opt.distance : StateDistance([&chart](const Vector& a, const Vector& b) {
    return chart.distance(a, b);
  });
  std::vector<Vector> images(samples.size());
  std::vector<double> sigma(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    images[i] = cand.map(samples[i]);
    const Matrix basis = opt.tangent_basis ? opt.tangent_basis(samples[i])
                                           : Matrix(Matrix::Identity(sys.dim(), sys.dim()));
    sigma[i] = min_singular_value(directional_jacobian(cand.map, samples[i], basis, opt.fd_step));
  });
  for (std::size_t i = 0; i < samples.size(); ++i) {
    rep.min_jacobian_sigma = std::min(rep.min_jacobian_sigma, sigma[i]);
  }
  std::vector<double> row_min(samples.size(), std::numeric_limits<double>::infinity());
  parallel_for(samples.size(), [&](std::size_t i) {
    for (std::size_t j = i + 1; j < samples.size(); ++j) {
      const double ds = dist(samples[i], samples[j]);
      if (!(ds > 1e-12)) continue;
      row_min[i] = std::min(row_min[i], (images[i] - images[j]).norm() / ds);
    }
  });
  for (double r : row_min) rep.injectivity_margin = std::min(rep.injectivity_margin, r);
  rep.injectivity_flagged = rep.injectivity_margin < opt.margin_floor;
  rep.sigma_flagged = rep.min_jacobian_sigma < opt.sigma_floor;

  if (!opt.escape_sequence.empty() && opt.escape_measure) {
    auto& p = rep.properness;
    p.applicable = true;
    std::vector<double> measure, norms;
    for (const auto& x : opt.escape_sequence) {
      measure.push_back(opt.escape_measure(x));
      norms.push_back(cand.map(x).norm());
    }
    p.spearman = spearman(measure, norms);
    p.norm_growth = norms.back() / std::max(norms.front(), 1e-300);
    p.pass = p.spearman >= opt.min_spearman && p.norm_growth >= opt.min_norm_growth;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

struct BuildOptions {
  std::vector<Vector> samples;               // basin points for precondition checks
  std::vector<double> phase_times = {0.0, 0.5, 1.0, 2.0, 4.0};
  std::vector<double> equivariance_times = {0.1, 1.0, kPi};
  double phase_tol = 1e-8;
  double attractor_residual_tol = 1e-8;
  double impact_tol = 1e-13;
  double attractor_level = 1e-80;  // V at or below this is treated as a point of A
  std::size_t kernel_samples = 50;
  double fd_step = 1e-5;
  double kernel_tol = 1e-5;
  double overlap_tol = 1e-7;
  TangentBasisMap state_tangent_basis;  // T_x X in chart coordinates; defaults to all axes
};

struct BuildDiagnostics {
  PhasePropertiesReport phase;
  double attractor_residual = 0.0;     // F0 (or F1A) against the restricted flow
  double level_set_norm_error = 0.0;   // | |F1| - 1 | on level-set points
  double lyapunov_on_attractor = 0.0;  // max V on the attractor cloud
  std::size_t lyapunov_increases = 0;
  // smooth builder only
  double transverse_equivariance = 0.0;
  double max_generator_real_part = 0.0;
  double kernel_tangent_max = 0.0;
  double kernel_transverse_min_sigma = std::numeric_limits<double>::infinity();
  std::size_t kernel_points = 0;  // attractor samples used by the kernel check
  double overlap_max = 0.0;
  std::size_t overlap_points = 0;
};

struct BuildResult {
  EmbeddingCandidate candidate;
  BuildDiagnostics diagnostics;
};

namespace detail {

inline double attractor_residual(const AttractorModel& attractor, const StateMap& f, const LinearGenerator& b,
                                 const std::vector<double>& times) {
  double worst = 0.0;
  for (double t : times) {
    const Matrix e = matrix_exp(b, t);
    for (const auto& a : attractor.cloud()) {
      const Vector lhs = f(evolve(attractor.restricted_flow(), a, t));
      worst = std::max(worst, (lhs - e * f(a)).norm());
    }
  }
  return worst;
}

inline void check_phase(const FlowSystem& sys, const AttractorModel& attractor, const StateMap& phase,
                        const BuildOptions& opt, BuildDiagnostics& diag) {
  diag.phase = verify_phase_properties(sys, phase, opt.samples, attractor.cloud(), opt.phase_times, opt.phase_tol);
  if (!diag.phase.pass) {
    raise(Errc::PhaseMapInvalid,
          "phase map fails: idempotence " + format_number(diag.phase.idempotence_max) + ", retraction " +
              format_number(diag.phase.retraction_max) + ", equivariance " +
              format_number(diag.phase.equivariance_max) + ", in-phase failures " +
              std::to_string(diag.phase.in_phase_failures));
  }
}

inline void check_lyapunov(const FlowSystem& sys, const AttractorModel& attractor, const ScalarMap& v,
                           const BuildOptions& opt, BuildDiagnostics& diag) {
  for (const auto& a : attractor.cloud()) diag.lyapunov_on_attractor = std::max(diag.lyapunov_on_attractor, v(a));
  for (const auto& x : opt.samples) {
    const double vx = v(x);
    if (vx > 0.0 && !(v(evolve(sys, x, 0.5)) < vx)) ++diag.lyapunov_increases;
  }
  if (diag.lyapunov_on_attractor > 1e-12 || diag.lyapunov_increases > 0) {
    raise(Errc::PreconditionFailed, "Lyapunov function is not zero on A or not decreasing off A");
  }
}

// Orthonormal basis of the part of span(state) orthogonal to span(tangent).
inline Matrix normal_complement(const Matrix& tangent, const Matrix& state) {
  Eigen::HouseholderQR<Matrix> qr(tangent);
  const Matrix qt = (qr.householderQ() * Matrix::Identity(tangent.rows(), tangent.cols())).eval();
  const Matrix residual = state - qt * (qt.transpose() * state);
  Eigen::JacobiSVD<Matrix> svd(residual, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  Eigen::Index rank = 0;
  while (rank < s.size() && s[rank] > 1e-8 * std::max(1.0, s[0])) ++rank;
  return svd.matrixU().leftCols(rank);
}

}  // namespace detail

/// F(x) = (F0(P(x)), e^{tau(x)} F1(flow(tau(x), x))) off A and (F0(x), 0) on A,
/// with generator blockdiag(B0, -I).
inline BuildResult build_topological_embedding(const FlowSystem& sys, const AttractorModel& attractor,
                                               const StateMap& phase, const EmbeddingCandidate& attractor_embedding,
                                               const LyapunovData& lyap, const BuildOptions& opt = {}) {
  BuildResult out;
  auto& diag = out.diagnostics;
  detail::check_phase(sys, attractor, phase, opt, diag);
  diag.attractor_residual = detail::attractor_residual(attractor, attractor_embedding.map,
                                                       attractor_embedding.generator, opt.equivariance_times);
  if (diag.attractor_residual > opt.attractor_residual_tol) {
    raise(Errc::PreconditionFailed,
          "attractor embedding residual " + format_number(diag.attractor_residual) + " exceeds tolerance");
  }
  detail::check_lyapunov(sys, attractor, lyap.value, opt, diag);

  int n1 = 0;
  for (const auto& x : opt.samples) {
    if (lyap.value(x) <= opt.attractor_level) continue;
    const double tau = impact_time(sys, lyap.value, lyap.level, x, opt.impact_tol, opt.attractor_level);
    const Vector f1 = lyap.level_set_embedding(evolve(sys, x, tau));
    n1 = static_cast<int>(f1.size());
    diag.level_set_norm_error = std::max(diag.level_set_norm_error, std::abs(f1.norm() - 1.0));
  }
  if (n1 == 0) raise(Errc::PreconditionFailed, "no basin samples off the attractor");
  if (diag.level_set_norm_error > 1e-12) {
    raise(Errc::PreconditionFailed, "level-set embedding does not land on the unit sphere");
  }

  const int n0 = static_cast<int>(attractor_embedding.generator.dim());
  Matrix b = block_diagonal({attractor_embedding.generator.matrix(), -Matrix::Identity(n1, n1)});
  StateMap f0 = attractor_embedding.map;
  FlowSystem flow = sys;
  LyapunovData ly = lyap;
  const double impact_tol = opt.impact_tol;
  const double on_a = opt.attractor_level;
  out.candidate.map = [=](const Vector& x) -> Vector {
    Vector y = Vector::Zero(n0 + n1);
    if (ly.value(x) <= on_a) {
      y.head(n0) = f0(phase(x));
      return y;
    }
    const double tau = impact_time(flow, ly.value, ly.level, x, impact_tol, on_a);
    y.head(n0) = f0(phase(x));
    y.tail(n1) = std::exp(tau) * ly.level_set_embedding(evolve(flow, x, tau));
    return y;
  };
  out.candidate.generator = LinearGenerator(std::move(b));
  out.candidate.provenance = Provenance::BuiltTopological;
  return out;
}

/// F(x) = (F1A(P(x)), F0(x)) with F0 = G on U and exp(-B tau) G(flow(tau, x))
/// outside U; generator blockdiag(B1, B).
inline BuildResult build_smooth_embedding(const FlowSystem& sys, const AttractorModel& attractor,
                                          const StateMap& phase, const EmbeddingCandidate& attractor_embedding,
                                          const TransverseMap& transverse, const ScalarMap& lyapunov, double level,
                                          const BuildOptions& opt = {}) {
  BuildResult out;
  auto& diag = out.diagnostics;
  detail::check_phase(sys, attractor, phase, opt, diag);
  diag.attractor_residual = detail::attractor_residual(attractor, attractor_embedding.map,
                                                       attractor_embedding.generator, opt.equivariance_times);
  if (diag.attractor_residual > opt.attractor_residual_tol) {
    raise(Errc::PreconditionFailed,
          "attractor embedding residual " + format_number(diag.attractor_residual) + " exceeds tolerance");
  }
  const auto& g = transverse.map;
  const LinearGenerator& bg = transverse.generator;

  // Stable generator.
  Eigen::EigenSolver<Matrix> eig(bg.matrix());
  diag.max_generator_real_part = eig.eigenvalues().real().maxCoeff();
  if (!(diag.max_generator_real_part < -1e-9)) {
    raise(Errc::ConditionThreeViolated,
          "transverse generator has an eigenvalue with real part " + format_number(diag.max_generator_real_part));
  }

  // Equivariance on U.
  for (double t : opt.equivariance_times) {
    const Matrix e = matrix_exp(bg, t);
    for (const auto& x : opt.samples) {
      if (!transverse.in_domain(x)) continue;
      const Vector xt = evolve(sys, x, t);
      if (!transverse.in_domain(xt)) continue;
      diag.transverse_equivariance = std::max(diag.transverse_equivariance, (g(xt) - e * g(x)).norm());
    }
  }
  if (diag.transverse_equivariance > opt.attractor_residual_tol) {
    raise(Errc::ConditionThreeViolated,
          "G(flow(t,x)) != exp(Bt) G(x): residual " + format_number(diag.transverse_equivariance));
  }

  // ker(T_A G) = T A at attractor samples.
  const auto& cloud = attractor.cloud();
  const std::size_t n_kernel = std::min(opt.kernel_samples, cloud.size());
  const std::size_t stride = n_kernel ? std::max<std::size_t>(1, cloud.size() / n_kernel) : 1;
  for (std::size_t k = 0; k < n_kernel; ++k) {
    const Vector& a = cloud[k * stride];
    const Matrix tangent = attractor.tangent_basis(a);
    const Matrix normal = detail::normal_complement(
        tangent, opt.state_tangent_basis ? opt.state_tangent_basis(a) : Matrix(Matrix::Identity(sys.dim(), sys.dim())));
    const Matrix jt = directional_jacobian(g, a, tangent, opt.fd_step);
    for (Eigen::Index c = 0; c < jt.cols(); ++c) {
      diag.kernel_tangent_max = std::max(diag.kernel_tangent_max, jt.col(c).norm());
    }
    const Matrix jn = directional_jacobian(g, a, normal, opt.fd_step);
    diag.kernel_transverse_min_sigma = std::min(diag.kernel_transverse_min_sigma, min_singular_value(jn));
    ++diag.kernel_points;
  }
  if (diag.kernel_tangent_max > opt.kernel_tol || !(diag.kernel_transverse_min_sigma > opt.kernel_tol)) {
    raise(Errc::ConditionThreeViolated,
          "ker(T_A G) != T A: tangent response " + format_number(diag.kernel_tangent_max) +
              ", transverse min singular value " + format_number(diag.kernel_transverse_min_sigma));
  }

  FlowSystem flow = sys;
  const double impact_tol = opt.impact_tol;
  const double on_a = opt.attractor_level;
  auto far_formula = [=](const Vector& x) -> Vector {
    const double tau = impact_time(flow, lyapunov, level, x, impact_tol, on_a);
    return matrix_exp(bg, -tau) * g(evolve(flow, x, tau));
  };

  // Well-definedness on U intersect {V > c}.
  for (const auto& x : opt.samples) {
    if (!transverse.in_domain(x) || !(lyapunov(x) > level)) continue;
    diag.overlap_max = std::max(diag.overlap_max, (g(x) - far_formula(x)).norm());
    ++diag.overlap_points;
  }
  if (diag.overlap_max > opt.overlap_tol) {
    raise(Errc::ConditionThreeViolated, "overlap identity fails: " + format_number(diag.overlap_max));
  }

  const int k1 = static_cast<int>(attractor_embedding.generator.dim());
  const int k = static_cast<int>(bg.dim());
  StateMap f1a = attractor_embedding.map;
  auto in_u = transverse.in_domain;
  out.candidate.map = [=](const Vector& x) -> Vector {
    Vector y(k1 + k);
    y.head(k1) = f1a(phase(x));
    y.tail(k) = in_u(x) ? g(x) : far_formula(x);
    return y;
  };
  out.candidate.generator = LinearGenerator(block_diagonal({attractor_embedding.generator.matrix(), bg.matrix()}));
  out.candidate.provenance = Provenance::BuiltSmooth;
  return out;
}

}  // namespace flowlin
