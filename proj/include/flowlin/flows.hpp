#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "flowlin/errors.hpp"
#include "flowlin/linalg.hpp"
#include "flowlin/parallel.hpp"

namespace flowlin {

// ---------------------------------------------------------------------------
// Charts
// ---------------------------------------------------------------------------

enum class Wrap { None, Unit, TwoPi };

inline double wrap_period(Wrap w) {
  switch (w) {
    case Wrap::Unit: return 1.0;
    case Wrap::TwoPi: return kTwoPi;
    case Wrap::None: break;
  }
  return 0.0;
}

/// Reduce a value into [0, period).
inline double reduce_angle(double value, double period) {
  double r = std::fmod(value, period);
  if (r < 0.0) r += period;
  if (r >= period) r -= period;
  return r;
}

/// Shortest distance between two angles on a circle of the given period.
inline double angle_distance(double a, double b, double period) {
  const double d = std::fmod(std::abs(a - b), period);
  return std::min(d, period - d);
}

enum class ChartKind { Euclidean, TorusAngles, PolarAnnulus, Product };

/// Coordinates for a state space: each coordinate carries one wrap rule.
class ChartDescriptor {
 public:
  static ChartDescriptor euclidean(int n) {
    return ChartDescriptor(ChartKind::Euclidean, std::vector<Wrap>(checked(n), Wrap::None), {});
  }
  static ChartDescriptor torus_angles(int n, Wrap period = Wrap::Unit) {
    if (period == Wrap::None) raise(Errc::InvalidArgument, "torus angles need a period");
    return ChartDescriptor(ChartKind::TorusAngles, std::vector<Wrap>(checked(n), period), {});
  }
  /// (r, theta) with theta reduced mod 2 pi.
  static ChartDescriptor polar_annulus() {
    return ChartDescriptor(ChartKind::PolarAnnulus, {Wrap::None, Wrap::TwoPi}, {});
  }
  static ChartDescriptor product(std::vector<ChartDescriptor> parts) {
    if (parts.empty()) raise(Errc::InvalidArgument, "empty product chart");
    std::vector<Wrap> wraps;
    for (const auto& p : parts) wraps.insert(wraps.end(), p.wraps_.begin(), p.wraps_.end());
    return ChartDescriptor(ChartKind::Product, std::move(wraps), std::move(parts));
  }

  ChartKind kind() const { return kind_; }
  int dim() const { return static_cast<int>(wraps_.size()); }
  const std::vector<Wrap>& wraps() const { return wraps_; }
  const std::vector<ChartDescriptor>& parts() const { return parts_; }

  bool has_angles() const {
    return std::any_of(wraps_.begin(), wraps_.end(), [](Wrap w) { return w != Wrap::None; });
  }

  Vector canonicalize(Vector x) const {
    check_dim(x);
    for (int i = 0; i < dim(); ++i) {
      if (wraps_[i] != Wrap::None) x[i] = reduce_angle(x[i], wrap_period(wraps_[i]));
    }
    return x;
  }

  bool is_canonical(const Vector& x) const {
    if (x.size() != dim() || !x.allFinite()) return false;
    for (int i = 0; i < dim(); ++i) {
      if (wraps_[i] == Wrap::None) continue;
      if (x[i] < 0.0 || x[i] >= wrap_period(wraps_[i])) return false;
    }
    return true;
  }

  /// Min-over-wraps per angle, plain difference elsewhere, root-sum-square overall.
  double distance(const Vector& a, const Vector& b) const {
    check_dim(a);
    check_dim(b);
    double sum = 0.0;
    for (int i = 0; i < dim(); ++i) {
      const double d = wraps_[i] == Wrap::None ? a[i] - b[i]
                                               : angle_distance(a[i], b[i], wrap_period(wraps_[i]));
      sum += d * d;
    }
    return std::sqrt(sum);
  }

  std::string describe() const {
    switch (kind_) {
      case ChartKind::Euclidean: return "euclidean(" + std::to_string(dim()) + ")";
      case ChartKind::TorusAngles:
        return "torus_angles(" + std::to_string(dim()) +
               (wraps_.front() == Wrap::Unit ? ", mod 1)" : ", mod 2pi)");
      case ChartKind::PolarAnnulus: return "polar_annulus";
      case ChartKind::Product: {
        std::string s = "product(";
        for (std::size_t i = 0; i < parts_.size(); ++i) {
          if (i) s += ", ";
          s += parts_[i].describe();
        }
        return s + ")";
      }
    }
    return "unknown";
  }

 private:
  ChartDescriptor(ChartKind kind, std::vector<Wrap> wraps, std::vector<ChartDescriptor> parts)
      : kind_(kind), wraps_(std::move(wraps)), parts_(std::move(parts)) {}

  static std::size_t checked(int n) {
    if (n < 1) raise(Errc::InvalidArgument, "chart dimension must be >= 1");
    return static_cast<std::size_t>(n);
  }

  void check_dim(const Vector& x) const {
    if (x.size() != dim()) {
      raise(Errc::DimensionMismatch, "state has " + std::to_string(x.size()) +
                                         " coordinates, chart " + describe() + " expects " +
                                         std::to_string(dim()));
    }
  }

  ChartKind kind_;
  std::vector<Wrap> wraps_;
  std::vector<ChartDescriptor> parts_;
};

// ---------------------------------------------------------------------------
// Flow systems
// ---------------------------------------------------------------------------

struct IntegratorSettings {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  double max_step = std::numeric_limits<double>::infinity();
  std::size_t max_steps = 2'000'000;
};

/// Closed-form maps return lifted coordinates; the system reduces angles.
using ClosedFormMap = std::function<Vector(double t, const Vector& x)>;
using VectorFieldMap = std::function<Vector(const Vector& x)>;
/// Infimum of admissible times for a state (-inf for complete flows).
using TimeBound = std::function<double(const Vector& x)>;

using StateMap = std::function<Vector(const Vector& x)>;
using ScalarMap = std::function<double(const Vector& x)>;

enum class Lift { Canonical, Lifted };

class FlowSystem {
 public:
  static FlowSystem closed_form(ChartDescriptor chart, ClosedFormMap map, TimeBound t_min = {}) {
    FlowSystem s(std::move(chart), std::move(t_min));
    s.closed_form_ = std::move(map);
    return s;
  }

  static FlowSystem vector_field(ChartDescriptor chart, VectorFieldMap field,
                                 IntegratorSettings settings = {}, TimeBound t_min = {}) {
    FlowSystem s(std::move(chart), std::move(t_min));
    s.field_ = std::move(field);
    s.settings_ = settings;
    return s;
  }

  const ChartDescriptor& chart() const { return chart_; }
  int dim() const { return chart_.dim(); }
  bool is_closed_form() const { return static_cast<bool>(closed_form_); }
  const ClosedFormMap& closed_form_map() const { return closed_form_; }
  const VectorFieldMap& field() const { return field_; }
  const IntegratorSettings& settings() const { return settings_; }

  FlowSystem with_settings(IntegratorSettings settings) const {
    FlowSystem copy = *this;
    copy.settings_ = settings;
    return copy;
  }

  double t_min(const Vector& x) const {
    return t_min_ ? t_min_(x) : -std::numeric_limits<double>::infinity();
  }

 private:
  FlowSystem(ChartDescriptor chart, TimeBound t_min)
      : chart_(std::move(chart)), t_min_(std::move(t_min)) {}

  ChartDescriptor chart_;
  TimeBound t_min_;
  ClosedFormMap closed_form_;
  VectorFieldMap field_;
  IntegratorSettings settings_;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
};

namespace detail {

// Dormand-Prince 5(4) tableau.
struct DormandPrince {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
};

inline void check_finite_state(const Vector& x) {
  if (!x.allFinite()) raise(Errc::InvalidArgument, "state has non-finite coordinates");
}

// Integrates from 0 to t_end. on_step(t0, y0, f0, t1, y1_lifted, f1) is called
// for every accepted step, before y1 is reduced into the chart.
template <typename OnStep>
Vector integrate(const FlowSystem& sys, const Vector& x0, double t_end, Lift lift, OnStep&& on_step) {
  using DP = DormandPrince;
  const auto& f = sys.field();
  const auto& cfg = sys.settings();
  const double dir = t_end >= 0.0 ? 1.0 : -1.0;
  const double span = std::abs(t_end);
  Vector y = x0;
  Vector k1 = f(y);
  if (!k1.allFinite()) raise(Errc::IntegrationFailure, "vector field is not finite at start");

  double h;
  {
    const double d0 = y.norm();
    const double d1 = k1.norm();
    h = (d0 > 1e-5 && d1 > 1e-5) ? 0.01 * d0 / d1 : 1e-4;
    h = std::min({h, span, cfg.max_step});
  }
  double t = 0.0;
  std::size_t steps = 0;
  while (t < span) {
    if (++steps > cfg.max_steps) raise(Errc::IntegrationFailure, "step budget exhausted");
    bool last = false;
    if (t + h >= span) {
      h = span - t;
      last = true;
    }
    const double min_step = 1e-14 * std::max(1.0, span);
    if (h < min_step && !last) raise(Errc::IntegrationFailure, "step size underflow");
    const double sh = dir * h;
    const Vector k2 = f(y + sh * (DP::a21 * k1));
    const Vector k3 = f(y + sh * (DP::a31 * k1 + DP::a32 * k2));
    const Vector k4 = f(y + sh * (DP::a41 * k1 + DP::a42 * k2 + DP::a43 * k3));
    const Vector k5 = f(y + sh * (DP::a51 * k1 + DP::a52 * k2 + DP::a53 * k3 + DP::a54 * k4));
    const Vector k6 =
        f(y + sh * (DP::a61 * k1 + DP::a62 * k2 + DP::a63 * k3 + DP::a64 * k4 + DP::a65 * k5));
    const Vector y_new =
        y + sh * (DP::b1 * k1 + DP::b3 * k3 + DP::b4 * k4 + DP::b5 * k5 + DP::b6 * k6);
    const Vector k7 = f(y_new);
    const Vector err_vec =
        sh * (DP::e1 * k1 + DP::e3 * k3 + DP::e4 * k4 + DP::e5 * k5 + DP::e6 * k6 + DP::e7 * k7);

    double err = 0.0;
    bool finite = y_new.allFinite() && k7.allFinite();
    if (finite) {
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double scale =
            cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y[i]), std::abs(y_new[i]));
        err = std::max(err, std::abs(err_vec[i]) / scale);
      }
    }
    if (finite && err <= 1.0) {
      const double t_new = last ? span : t + h;
      on_step(dir * t, y, k1, dir * t_new, y_new, k7);
      t = t_new;
      y = lift == Lift::Canonical ? sys.chart().canonicalize(y_new) : y_new;
      k1 = k7;
      if (last) break;
      const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
      h = std::min(h * factor, cfg.max_step);
    } else {
      h *= finite ? std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.5) : 0.25;
      if (h < min_step) raise(Errc::IntegrationFailure, "step size underflow");
    }
  }
  return y;
}

}  // namespace detail

/// State at time t. Closed forms are evaluated directly; vector fields are
/// integrated with an adaptive Dormand-Prince 5(4) pair.
inline Vector evolve(const FlowSystem& sys, const Vector& x, double t, Lift lift = Lift::Canonical) {
  detail::check_finite_state(x);
  if (!std::isfinite(t)) raise(Errc::InvalidArgument, "time must be finite");
  if (x.size() != sys.dim()) raise(Errc::DimensionMismatch, "state dimension does not match chart");
  const double lower = sys.t_min(x);
  if (t < lower) {
    raise(Errc::TimeOutOfDomain,
          "t = " + std::to_string(t) + " is below the admissible bound " + std::to_string(lower));
  }
  if (t == 0.0) return x;
  if (sys.is_closed_form()) {
    Vector y = sys.closed_form_map()(t, x);
    if (!y.allFinite()) raise(Errc::RangeError, "state at t = " + std::to_string(t) + " is not representable");
    return lift == Lift::Canonical ? sys.chart().canonicalize(std::move(y)) : y;
  }
  return detail::integrate(sys, x, t, lift, [](auto&&...) {});
}

/// Evaluates the flow on an increasing time grid. Vector-field systems use one
/// adaptive pass per time direction with cubic Hermite dense output.
inline Trajectory sample_trajectory(const FlowSystem& sys, const Vector& x,
                                    const std::vector<double>& grid) {
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) raise(Errc::InvalidArgument, "time grid must be strictly increasing");
  }
  Trajectory traj;
  traj.times = grid;
  traj.states.resize(grid.size());
  if (grid.empty()) return traj;
  const double lower = sys.t_min(x);
  if (grid.front() < lower) raise(Errc::TimeOutOfDomain, "time grid starts below the admissible bound");

  if (sys.is_closed_form()) {
    for (std::size_t i = 0; i < grid.size(); ++i) traj.states[i] = evolve(sys, x, grid[i]);
    return traj;
  }
  detail::check_finite_state(x);
  const auto& chart = sys.chart();
  auto fill = [&](double t_end, std::vector<std::size_t> idx) {
    // idx holds grid indices ordered by increasing |t|.
    std::size_t next = 0;
    detail::integrate(sys, x, t_end, Lift::Canonical,
                      [&](double t0, const Vector& y0, const Vector& f0, double t1,
                          const Vector& y1, const Vector& f1) {
                        const double h = t1 - t0;
                        while (next < idx.size()) {
                          const double tq = grid[idx[next]];
                          if (std::abs(tq) > std::abs(t1)) break;
                          const double s = (tq - t0) / h;
                          const double s2 = s * s, s3 = s2 * s;
                          const Vector y = (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * f0 +
                                           (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * h * f1;
                          traj.states[idx[next]] = tq == t1 ? chart.canonicalize(y1) : chart.canonicalize(y);
                          ++next;
                        }
                      });
  };
  std::vector<std::size_t> forward, backward;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] == 0.0) traj.states[i] = x;
    else if (grid[i] > 0.0) forward.push_back(i);
    else backward.insert(backward.begin(), i);
  }
  if (!forward.empty()) fill(grid[forward.back()], forward);
  if (!backward.empty()) fill(grid[backward.back()], backward);
  return traj;
}

struct GroupLawSample {
  Vector x;
  double s = 0.0;
  double t = 0.0;
};

struct GroupLawReport {
  std::vector<double> violation;   // NaN where the sample raised
  std::vector<std::string> error;  // empty where the sample succeeded
  double max_violation = 0.0;
  std::size_t errors = 0;
  double tolerance = 0.0;
  bool pass = true;
};

/// chart-distance(evolve(evolve(x,s),t), evolve(x,s+t)) per sample.
inline GroupLawReport check_group_law(const FlowSystem& sys, const std::vector<GroupLawSample>& samples,
                                      double tol) {
  GroupLawReport report;
  report.tolerance = tol;
  report.violation.assign(samples.size(), std::numeric_limits<double>::quiet_NaN());
  report.error.assign(samples.size(), {});
  parallel_for(samples.size(), [&](std::size_t i) {
    const auto& smp = samples[i];
    try {
      const Vector two_step = evolve(sys, evolve(sys, smp.x, smp.s), smp.t);
      const Vector one_step = evolve(sys, smp.x, smp.s + smp.t);
      report.violation[i] = sys.chart().distance(two_step, one_step);
    } catch (const Error& e) {
      report.error[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!report.error[i].empty()) {
      ++report.errors;
      continue;
    }
    report.max_violation = std::max(report.max_violation, report.violation[i]);
  }
  report.pass = report.errors == 0 && report.max_violation <= tol;
  return report;
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// "t,x1,...,xn" followed by one row per sample, 17 significant digits.
inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj, int dim,
                                 const std::vector<std::string>& columns = {}) {
  out << "t";
  if (!columns.empty()) {
    for (const auto& c : columns) out << ',' << c;
  } else {
    for (int i = 1; i <= dim; ++i) out << ",x" << i;
  }
  out << '\n';
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    out << format_number(traj.times[i]);
    for (Eigen::Index j = 0; j < traj.states[i].size(); ++j) out << ',' << format_number(traj.states[i][j]);
    out << '\n';
  }
}

}  // namespace flowlin
