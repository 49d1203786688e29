#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "flowlin/errors.hpp"
#include "flowlin/flows.hpp"
#include "flowlin/parallel.hpp"

namespace flowlin {

/// Sampled compact attractor A with its restricted flow.
class AttractorModel {
 public:
  using TangentBasis = std::function<Matrix(const Vector& a)>;

  AttractorModel(std::vector<Vector> cloud, FlowSystem restricted_flow,
                 std::optional<StateMap> exact_projector = std::nullopt,
                 TangentBasis tangent_basis = {})
      : cloud_(std::move(cloud)),
        flow_(std::move(restricted_flow)),
        projector_(std::move(exact_projector)),
        tangent_(std::move(tangent_basis)) {
    for (auto& c : cloud_) c = flow_.chart().canonicalize(c);
    resolution_ = 0.0;
    for (std::size_t i = 0; i < cloud_.size(); ++i) {
      double nearest = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < cloud_.size(); ++j) {
        if (i != j) nearest = std::min(nearest, flow_.chart().distance(cloud_[i], cloud_[j]));
      }
      if (std::isfinite(nearest)) resolution_ = std::max(resolution_, nearest);
    }
  }

  const std::vector<Vector>& cloud() const { return cloud_; }
  const FlowSystem& restricted_flow() const { return flow_; }
  bool has_exact_projector() const { return projector_.has_value(); }
  /// Largest nearest-neighbour gap inside the cloud.
  double resolution() const { return resolution_; }

  /// Nearest point of A: the exact projector when supplied, otherwise the
  /// nearest cloud point refined along the restricted flow.
  Vector nearest_point(const Vector& y) const {
    if (projector_) return (*projector_)(y);
    if (cloud_.empty()) raise(Errc::EmptyAttractor, "attractor cloud is empty");
    const auto& chart = flow_.chart();
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cloud_.size(); ++i) {
      const double d = chart.distance(y, cloud_[i]);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    const Vector& c = cloud_[best];
    if (best_d == 0.0) return c;
    constexpr double probe = 1e-4;
    const double speed = chart.distance(evolve(flow_, c, probe), c) / probe;
    if (!(speed > 1e-12)) return c;
    const double window = 2.0 * std::max(resolution_, best_d) / speed;
    auto objective = [&](double s) { return chart.distance(y, evolve(flow_, c, s)); };
    const auto [s_opt, d_opt] =
        boost::math::tools::brent_find_minima(objective, -window, window, 40);
    if (d_opt >= best_d) return c;
    return evolve(flow_, c, s_opt);
  }

  /// Chart-coordinate tangent vectors of A at a (columns). Defaults to the
  /// restricted-flow direction, which spans T A for a single closed orbit.
  Matrix tangent_basis(const Vector& a) const {
    if (tangent_) return tangent_(a);
    constexpr double h = 1e-6;
    const Vector fwd = evolve(flow_, a, h, Lift::Lifted);
    const Vector bwd = evolve(flow_, a, -h, Lift::Lifted);
    Vector dir = (fwd - bwd) / (2 * h);
    const double n = dir.norm();
    if (n > 0) dir /= n;
    return dir;
  }

 private:
  std::vector<Vector> cloud_;
  FlowSystem flow_;
  std::optional<StateMap> projector_;
  TangentBasis tangent_;
  double resolution_ = 0.0;
};

struct GeometricSchedule {
  double t0 = 1.0;
  double ratio = 2.0;
  int count = 8;

  std::vector<double> horizons() const {
    if (!(t0 > 0.0) || !(ratio > 1.0) || count < 1) {
      raise(Errc::InvalidArgument, "geometric schedule needs T0 > 0, ratio > 1, count >= 1");
    }
    std::vector<double> out;
    double t = t0;
    for (int i = 0; i < count; ++i, t *= ratio) out.push_back(t);
    return out;
  }
};

enum class PhaseClass { Converged, Diverged, Inconclusive };

inline std::string to_string(PhaseClass c) {
  switch (c) {
    case PhaseClass::Converged: return "Converged";
    case PhaseClass::Diverged: return "Diverged";
    case PhaseClass::Inconclusive: return "Inconclusive";
  }
  return "Inconclusive";
}

struct DriftStatistics {
  std::vector<double> gaps;   // lifted distance between consecutive estimates
  double first_gap = 0.0;
  double last_gap = 0.0;
  double total_drift = 0.0;   // lifted distance from first to last estimate
  bool monotone_growth = false;
};

struct PhaseEstimate {
  std::vector<double> horizons;
  std::vector<Vector> estimates;          // canonical chart points on A
  std::vector<Vector> lifted_estimates;   // angles not reduced
  PhaseClass classification = PhaseClass::Inconclusive;
  Vector limit;                            // last estimate when Converged
  double rate = std::numeric_limits<double>::quiet_NaN();
  DriftStatistics drift;
};

/// Thresholds for classifying a horizon sequence.
struct PhaseThresholds {
  double converged_gap = 1e-6;
  double converged_ratio = 0.7;
  double noise_floor = 1e-12;   // gaps below this are treated as exact agreement
  double diverged_factor = 10.0;
  int window = 3;
  int monotone_points = 4;
};

namespace detail {

// Lift a canonical point a so that each angle sits nearest to the lifted
// reference y.
inline Vector lift_near(const ChartDescriptor& chart, const Vector& a, const Vector& y_lifted) {
  Vector out = a;
  const Vector y = chart.canonicalize(y_lifted);
  for (int i = 0; i < chart.dim(); ++i) {
    const Wrap w = chart.wraps()[i];
    if (w == Wrap::None) continue;
    const double p = wrap_period(w);
    double d = std::fmod(a[i] - y[i], p);
    if (d > p / 2) d -= p;
    if (d < -p / 2) d += p;
    out[i] = y_lifted[i] + d;
  }
  return out;
}

inline PhaseClass classify(const std::vector<double>& gaps, const PhaseThresholds& th,
                           double& rate, bool& monotone) {
  monotone = false;
  rate = std::numeric_limits<double>::quiet_NaN();
  const int n = static_cast<int>(gaps.size());
  if (n >= th.window) {
    bool small = true;
    bool contracting = true;
    double worst_ratio = 0.0;
    for (int k = n - th.window; k < n; ++k) {
      if (!(gaps[k] < th.converged_gap)) small = false;
      if (k > 0 && gaps[k - 1] > th.noise_floor) {
        const double r = gaps[k] / gaps[k - 1];
        worst_ratio = std::max(worst_ratio, r);
        if (!(r < th.converged_ratio)) contracting = false;
      }
    }
    rate = worst_ratio;
    if (small && contracting) return PhaseClass::Converged;
  }
  if (n >= th.monotone_points) {
    monotone = gaps.back() > th.noise_floor;
    for (int k = n - th.monotone_points + 1; k < n; ++k) {
      if (!(gaps[k] > gaps[k - 1])) monotone = false;
    }
  }
  if (n >= th.window + 1 && gaps.front() > th.noise_floor) {
    bool far = true;
    for (int k = n - th.window; k < n; ++k) {
      if (!(gaps[k] > th.diverged_factor * gaps.front())) far = false;
    }
    if (far) return PhaseClass::Diverged;
  }
  if (monotone) return PhaseClass::Diverged;
  return PhaseClass::Inconclusive;
}

}  // namespace detail

/// P_T(x) = flow_A(-T, nearest_A(flow(T, x))) over a geometric horizon schedule.
/// Forward endpoints are reused between horizons.
inline PhaseEstimate estimate_phase(const FlowSystem& sys, const AttractorModel& attractor,
                                    const Vector& x, const GeometricSchedule& schedule,
                                    const PhaseThresholds& thresholds = {}) {
  if (!attractor.has_exact_projector() && attractor.cloud().empty()) {
    raise(Errc::EmptyAttractor, "attractor has neither a cloud nor a projector");
  }
  PhaseEstimate out;
  out.horizons = schedule.horizons();
  const auto& chart = sys.chart();
  const auto& inner = attractor.restricted_flow();
  Vector y = x;
  double t_prev = 0.0;
  for (double horizon : out.horizons) {
    y = evolve(sys, y, horizon - t_prev, Lift::Lifted);
    t_prev = horizon;
    const Vector a = attractor.nearest_point(chart.canonicalize(y));
    const Vector a_lifted = detail::lift_near(chart, a, y);
    const Vector est = evolve(inner, a_lifted, -horizon, Lift::Lifted);
    out.lifted_estimates.push_back(est);
    out.estimates.push_back(chart.canonicalize(est));
  }
  auto& drift = out.drift;
  for (std::size_t k = 1; k < out.lifted_estimates.size(); ++k) {
    drift.gaps.push_back((out.lifted_estimates[k] - out.lifted_estimates[k - 1]).norm());
  }
  if (!drift.gaps.empty()) {
    drift.first_gap = drift.gaps.front();
    drift.last_gap = drift.gaps.back();
    drift.total_drift = (out.lifted_estimates.back() - out.lifted_estimates.front()).norm();
  }
  out.classification = detail::classify(drift.gaps, thresholds, out.rate, drift.monotone_growth);
  if (out.classification == PhaseClass::Converged) out.limit = out.estimates.back();
  return out;
}

struct PhasePropertiesReport {
  double idempotence_max = 0.0;   // chart-distance(P(P(x)), P(x))
  double retraction_max = 0.0;    // chart-distance(P(a), a) on A-samples
  double equivariance_max = 0.0;  // chart-distance(P(flow(t,x)), flow(t,P(x)))
  std::size_t in_phase_failures = 0;
  double tolerance = 0.0;
  bool pass = true;
};

/// Retraction, equivariance, and eventual decrease of dist(flow(t,x), flow(t,P(x))).
inline PhasePropertiesReport verify_phase_properties(const FlowSystem& sys, const StateMap& phase,
                                                     const std::vector<Vector>& samples,
                                                     const std::vector<Vector>& attractor_samples,
                                                     const std::vector<double>& t_grid, double tol) {
  const auto& chart = sys.chart();
  PhasePropertiesReport rep;
  rep.tolerance = tol;
  std::vector<double> idem(samples.size()), equi(samples.size());
  std::vector<char> in_phase_ok(samples.size(), 1);
  parallel_for(samples.size(), [&](std::size_t i) {
    const Vector& x = samples[i];
    const Vector p = phase(x);
    idem[i] = chart.distance(phase(p), p);
    double worst = 0.0;
    std::vector<double> sep;
    for (double t : t_grid) {
      const Vector xt = evolve(sys, x, t);
      const Vector pt = evolve(sys, p, t);
      worst = std::max(worst, chart.distance(phase(xt), pt));
      sep.push_back(chart.distance(xt, pt));
    }
    equi[i] = worst;
    if (!sep.empty()) {
      const std::size_t start = sep.size() / 2;
      bool ok = sep.back() <= sep.front() + tol;
      for (std::size_t k = start + 1; k < sep.size(); ++k) {
        if (sep[k] > sep[k - 1] + tol) ok = false;
      }
      in_phase_ok[i] = ok ? 1 : 0;
    }
  });
  for (std::size_t i = 0; i < samples.size(); ++i) {
    rep.idempotence_max = std::max(rep.idempotence_max, idem[i]);
    rep.equivariance_max = std::max(rep.equivariance_max, equi[i]);
    if (!in_phase_ok[i]) ++rep.in_phase_failures;
  }
  for (const auto& a : attractor_samples) {
    rep.retraction_max = std::max(rep.retraction_max, chart.distance(phase(a), a));
  }
  rep.pass = rep.idempotence_max <= tol && rep.retraction_max <= tol &&
             rep.equivariance_max <= tol && rep.in_phase_failures == 0;
  return rep;
}

}  // namespace flowlin
