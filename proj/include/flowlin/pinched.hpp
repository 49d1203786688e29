#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <boost/rational.hpp>

#include "flowlin/errors.hpp"
#include "flowlin/flows.hpp"
#include "flowlin/linalg.hpp"
#include "flowlin/parallel.hpp"

namespace flowlin {

using Rational = boost::rational<std::int64_t>;
using RationalVector = std::vector<Rational>;
using IntegerMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

inline double to_double(const Rational& r) { return boost::rational_cast<double>(r); }

inline Rational frac(const Rational& r) {
  const std::int64_t fl = r.numerator() >= 0 ? r.numerator() / r.denominator()
                                              : -((-r.numerator() + r.denominator() - 1) / r.denominator());
  return r - Rational(fl);
}

// ---------------------------------------------------------------------------
// Arc descriptors
// ---------------------------------------------------------------------------

/// Closed arc of R/Z running counter-clockwise from lo to hi. lo > hi wraps
/// through 0; hi - lo >= 1 is the whole circle; lo == hi is a point.
struct Arc {
  Rational lo{0};
  Rational hi{1};

  bool full() const { return hi - lo >= Rational(1); }
  /// Length in [0, 1].
  Rational length() const { return full() ? Rational(1) : frac(hi - lo); }

  double distance(double x) const {
    if (full()) return 0.0;
    const double a = to_double(frac(lo));
    const double len = to_double(length());
    const double off = reduce_angle(x - a, 1.0);
    if (off <= len) return 0.0;
    return std::min(off - len, 1.0 - off);
  }

  bool contains(const Arc& other) const {
    if (full()) return true;
    if (other.full()) return false;
    const Rational off = frac(other.lo - lo);
    return off + other.length() <= length();
  }
};

/// Product of m arcs.
using ArcBox = std::vector<Arc>;

/// Finite union of arc boxes in T^m. Empty means the empty set.
struct ArcSet {
  std::vector<ArcBox> boxes;

  bool empty() const { return boxes.empty(); }

  /// Euclidean torus distance; +inf for the empty set.
  double distance(const Vector& x) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& box : boxes) {
      double sq = 0.0;
      for (std::size_t k = 0; k < box.size(); ++k) {
        const double d = box[k].distance(x[static_cast<Eigen::Index>(k)]);
        sq += d * d;
      }
      best = std::min(best, std::sqrt(sq));
    }
    return best;
  }

  /// Sufficient containment: each box of this set lies in a single box of other.
  bool contained_in(const ArcSet& other) const {
    for (const auto& box : boxes) {
      bool inside = false;
      for (const auto& outer : other.boxes) {
        bool all = outer.size() == box.size();
        for (std::size_t k = 0; all && k < box.size(); ++k) all = outer[k].contains(box[k]);
        if (all) {
          inside = true;
          break;
        }
      }
      if (!inside) return false;
    }
    return true;
  }

  static ArcSet whole(int m) { return ArcSet{{ArcBox(static_cast<std::size_t>(m), Arc{})}}; }
};

// ---------------------------------------------------------------------------
// Exact kernels
// ---------------------------------------------------------------------------

/// omega = sum_i sqrt(prime_scale_i) * coefficients_i.
struct OmegaTerm {
  RationalVector coefficients;
  std::int64_t prime_scale = 1;
};

inline Vector omega_values(const std::vector<OmegaTerm>& terms, int n) {
  Vector out = Vector::Zero(n);
  for (const auto& term : terms) {
    const double s = std::sqrt(static_cast<double>(term.prime_scale));
    for (int j = 0; j < n; ++j) out[j] += s * to_double(term.coefficients[static_cast<std::size_t>(j)]);
  }
  return out;
}

struct KernelDirection {
  std::vector<RationalVector> basis;
  std::vector<OmegaTerm> omega;
  Vector omega_values;
  bool zero_kernel = false;  // omega is zero; the flow is stationary
};

inline RationalVector rational_product(const IntegerMatrix& m, const RationalVector& v) {
  RationalVector out(static_cast<std::size_t>(m.rows()), Rational(0));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(r)] += Rational(m(r, c)) * v[static_cast<std::size_t>(c)];
  }
  return out;
}

inline bool is_zero(const RationalVector& v) {
  return std::all_of(v.begin(), v.end(), [](const Rational& r) { return r == Rational(0); });
}

inline std::vector<std::int64_t> first_primes(std::size_t count) {
  std::vector<std::int64_t> out;
  for (std::int64_t p = 2; out.size() < count; ++p) {
    bool prime = true;
    for (auto q : out) {
      if (q * q > p) break;
      if (p % q == 0) {
        prime = false;
        break;
      }
    }
    if (prime) out.push_back(p);
  }
  return out;
}

/// Rational kernel basis of M by exact row reduction, and the default
/// omega = sum_i sqrt(p_i) b_i over distinct primes 2, 3, 5, ...
inline KernelDirection kernel_direction(const IntegerMatrix& m) {
  const Eigen::Index rows = m.rows(), cols = m.cols();
  if (cols < 1) raise(Errc::InvalidArgument, "M needs at least one column");
  std::vector<RationalVector> a(static_cast<std::size_t>(rows), RationalVector(static_cast<std::size_t>(cols)));
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) a[r][c] = Rational(m(r, c));

  std::vector<Eigen::Index> pivot_cols;
  Eigen::Index row = 0;
  for (Eigen::Index c = 0; c < cols && row < rows; ++c) {
    Eigen::Index p = row;
    while (p < rows && a[p][c] == Rational(0)) ++p;
    if (p == rows) continue;
    std::swap(a[p], a[row]);
    const Rational inv = Rational(1) / a[row][c];
    for (auto& v : a[row]) v *= inv;
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (r == row || a[r][c] == Rational(0)) continue;
      const Rational f = a[r][c];
      for (Eigen::Index k = 0; k < cols; ++k) a[r][k] -= f * a[row][k];
    }
    pivot_cols.push_back(c);
    ++row;
  }

  KernelDirection out;
  for (Eigen::Index f = 0; f < cols; ++f) {
    if (std::find(pivot_cols.begin(), pivot_cols.end(), f) != pivot_cols.end()) continue;
    RationalVector b(static_cast<std::size_t>(cols), Rational(0));
    b[f] = 1;
    for (std::size_t i = 0; i < pivot_cols.size(); ++i) b[pivot_cols[i]] = -a[i][f];
    out.basis.push_back(std::move(b));
  }
  const auto primes = first_primes(out.basis.size());
  for (std::size_t i = 0; i < out.basis.size(); ++i) out.omega.push_back({out.basis[i], primes[i]});
  out.zero_kernel = out.basis.empty();
  out.omega_values = omega_values(out.omega, static_cast<int>(cols));
  return out;
}

// ---------------------------------------------------------------------------
// Family
// ---------------------------------------------------------------------------

struct PinchedTorusSpec {
  int n = 0;
  int m = 0;
  IntegerMatrix M;
  ArcSet S;
  std::vector<ArcSet> C;  // one per torus coordinate
  std::vector<OmegaTerm> omega_terms;
  Vector omega;
};

inline constexpr double kPinchMembershipTol = 1e-12;

/// Checks shapes, C_j subset of S, and M omega = 0 exactly per irrational scale.
/// An empty omega_terms list is replaced by the default kernel direction.
inline PinchedTorusSpec validate(PinchedTorusSpec spec) {
  if (spec.n < 1 || spec.m < 1) raise(Errc::InvalidArgument, "n and m must be positive");
  if (spec.M.rows() != spec.m || spec.M.cols() != spec.n) {
    raise(Errc::InvalidArgument, "M must be m x n");
  }
  auto check_set = [&](const ArcSet& set, const std::string& what) {
    for (const auto& box : set.boxes) {
      if (static_cast<int>(box.size()) != spec.m) raise(Errc::InvalidArgument, what + " box must have m arcs");
    }
  };
  check_set(spec.S, "S");
  if (static_cast<int>(spec.C.size()) != spec.n) raise(Errc::InvalidArgument, "C must list one set per coordinate");
  for (int j = 0; j < spec.n; ++j) {
    check_set(spec.C[j], "C_" + std::to_string(j + 1));
    if (!spec.C[j].contained_in(spec.S)) {
      raise(Errc::InvalidArgument, "C_" + std::to_string(j + 1) + " is not contained in a box of S");
    }
  }
  if (spec.omega_terms.empty()) spec.omega_terms = kernel_direction(spec.M).omega;
  std::map<std::int64_t, RationalVector> by_scale;
  for (const auto& term : spec.omega_terms) {
    if (static_cast<int>(term.coefficients.size()) != spec.n) raise(Errc::InvalidArgument, "omega term needs n entries");
    if (term.prime_scale < 1) raise(Errc::InvalidArgument, "prime_scale must be a positive integer");
    auto& acc = by_scale.try_emplace(term.prime_scale, RationalVector(static_cast<std::size_t>(spec.n), Rational(0)))
                    .first->second;
    for (int j = 0; j < spec.n; ++j) acc[j] += term.coefficients[j];
  }
  for (const auto& [scale, v] : by_scale) {
    if (!is_zero(rational_product(spec.M, v))) {
      raise(Errc::InvalidArgument, "M omega != 0 for the sqrt(" + std::to_string(scale) + ") part");
    }
  }
  spec.omega = omega_values(spec.omega_terms, spec.n);
  return spec;
}

/// Point of the quotient. base = M theta mod 1 is stored because collapsed
/// coordinates are reset to 0 and the flow leaves it fixed.
struct PinchedPoint {
  Vector theta;
  Vector base;
  std::vector<bool> collapsed;
};

inline Vector base_of(const PinchedTorusSpec& spec, const Vector& theta) {
  Vector b = spec.M.cast<double>() * theta;
  for (Eigen::Index k = 0; k < b.size(); ++k) b[k] = reduce_angle(b[k], 1.0);
  return b;
}

inline PinchedPoint make_point(const PinchedTorusSpec& spec, const Vector& theta) {
  if (theta.size() != spec.n) raise(Errc::InvalidArgument, "theta must have n entries");
  PinchedPoint p;
  p.theta = theta;
  for (Eigen::Index j = 0; j < theta.size(); ++j) p.theta[j] = reduce_angle(theta[j], 1.0);
  p.base = base_of(spec, p.theta);
  if (!(spec.S.distance(p.base) <= kPinchMembershipTol)) {
    raise(Errc::NotInFamily, "M theta lies outside S");
  }
  p.collapsed.assign(static_cast<std::size_t>(spec.n), false);
  for (int j = 0; j < spec.n; ++j) {
    if (spec.C[j].distance(p.base) <= kPinchMembershipTol) {
      p.collapsed[j] = true;
      p.theta[j] = 0.0;
    }
  }
  return p;
}

inline PinchedPoint flow(const PinchedTorusSpec& spec, const PinchedPoint& p, double t) {
  if (t == 0.0) return p;
  PinchedPoint q = p;
  for (int j = 0; j < spec.n; ++j) {
    q.theta[j] = q.collapsed[j] ? 0.0 : reduce_angle(p.theta[j] + spec.omega[j] * t, 1.0);
  }
  return q;
}

/// (z_1..z_n, w_1..w_m) as interleaved real pairs: z_j = rho_j e^{2 pi i theta_j}
/// with rho_j the torus distance from the base to C_j (1 when C_j is empty),
/// w_k = e^{2 pi i base_k}.
inline Vector canonical_embedding(const PinchedTorusSpec& spec, const PinchedPoint& p) {
  Vector y(2 * (spec.n + spec.m));
  for (int j = 0; j < spec.n; ++j) {
    if (p.collapsed[j]) {
      y[2 * j] = 0.0;
      y[2 * j + 1] = 0.0;
      continue;
    }
    const double rho = spec.C[j].empty() ? 1.0 : spec.C[j].distance(p.base);
    y[2 * j] = rho * std::cos(kTwoPi * p.theta[j]);
    y[2 * j + 1] = rho * std::sin(kTwoPi * p.theta[j]);
  }
  for (int k = 0; k < spec.m; ++k) {
    y[2 * (spec.n + k)] = std::cos(kTwoPi * p.base[k]);
    y[2 * (spec.n + k) + 1] = std::sin(kTwoPi * p.base[k]);
  }
  return y;
}

inline LinearGenerator embedding_generator(const PinchedTorusSpec& spec) {
  std::vector<Matrix> blocks;
  for (int j = 0; j < spec.n; ++j) blocks.push_back(rotation_block(kTwoPi * spec.omega[j]));
  blocks.push_back(Matrix::Zero(2 * spec.m, 2 * spec.m));
  return LinearGenerator(block_diagonal(blocks));
}

/// Quotient distance: torus distance of the bases plus the angle distance of
/// every coordinate that is not collapsed at both points.
inline double quotient_distance(const PinchedPoint& a, const PinchedPoint& b) {
  double sq = 0.0;
  for (Eigen::Index k = 0; k < a.base.size(); ++k) {
    const double d = angle_distance(a.base[k], b.base[k], 1.0);
    sq += d * d;
  }
  for (Eigen::Index j = 0; j < a.theta.size(); ++j) {
    if (a.collapsed[j] && b.collapsed[j]) continue;
    const double d = angle_distance(a.theta[j], b.theta[j], 1.0);
    sq += d * d;
  }
  return std::sqrt(sq);
}

/// Random family member. A quarter of the draws target a nonempty pinch locus
/// so collapsed points are represented.
inline PinchedPoint sample_point(const PinchedTorusSpec& spec, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Matrix md = spec.M.cast<double>();
  const Matrix pinv = md.completeOrthogonalDecomposition().pseudoInverse();
  const auto kernel = kernel_direction(spec.M);
  std::vector<int> pinched;
  for (int j = 0; j < spec.n; ++j) {
    if (!spec.C[j].empty()) pinched.push_back(j);
  }
  auto point_in_box = [&](const ArcBox& box) {
    Vector b(spec.m);
    for (int k = 0; k < spec.m; ++k) {
      b[k] = reduce_angle(to_double(box[k].lo) + unit(rng) * to_double(box[k].length()), 1.0);
    }
    return b;
  };
  for (int attempt = 0; attempt < 10000; ++attempt) {
    Vector theta(spec.n);
    const double draw = unit(rng);
    if (!pinched.empty() && draw < 0.25) {
      const int j = pinched[static_cast<std::size_t>(unit(rng) * pinched.size()) % pinched.size()];
      const auto& boxes = spec.C[j].boxes;
      const Vector b = point_in_box(boxes[static_cast<std::size_t>(unit(rng) * boxes.size()) % boxes.size()]);
      theta = pinv * b;
      for (const auto& v : kernel.basis) {
        const double s = unit(rng);
        for (int i = 0; i < spec.n; ++i) theta[i] += s * to_double(v[i]);
      }
    } else {
      for (int i = 0; i < spec.n; ++i) theta[i] = unit(rng);
    }
    for (int i = 0; i < spec.n; ++i) theta[i] = reduce_angle(theta[i], 1.0);
    if (spec.S.distance(base_of(spec, theta)) <= kPinchMembershipTol) return make_point(spec, theta);
  }
  raise(Errc::NotInFamily, "could not sample a member of the family");
}

struct FamilyReport {
  std::size_t samples = 0;
  std::size_t collapsed_samples = 0;
  double linearity_residual = 0.0;
  double linearity_tolerance = 1e-10;
  std::size_t quotient_pairs = 0;
  std::size_t quotient_mismatches = 0;
  std::size_t separation_pairs = 0;
  double separation_margin = std::numeric_limits<double>::infinity();  // min |F(p)-F(q)| / d(p,q)
  double max_pinched_modulus = 0.0;
  double max_base_modulus = 0.0;
  bool pass = false;
};

/// Linearity of the canonical embedding, bitwise agreement on identified
/// pairs, and positive separation of non-identified pairs.
inline FamilyReport verify_family(const PinchedTorusSpec& spec, std::size_t n_samples, std::mt19937_64& rng,
                                  double linearity_tol = 1e-10) {
  if (n_samples < 100) raise(Errc::InvalidArgument, "verify_family needs at least 100 samples");
  FamilyReport rep;
  rep.samples = n_samples;
  rep.linearity_tolerance = linearity_tol;
  std::uniform_real_distribution<double> unit(0.0, 1.0), time(-10.0, 10.0);
  std::vector<PinchedPoint> pts;
  std::vector<double> times;
  std::vector<Vector> redraw;
  for (std::size_t i = 0; i < n_samples; ++i) {
    pts.push_back(sample_point(spec, rng));
    times.push_back(time(rng));
    Vector r(spec.n);
    for (int j = 0; j < spec.n; ++j) r[j] = unit(rng);
    redraw.push_back(r);
  }
  const LinearGenerator gen = embedding_generator(spec);
  std::vector<Vector> images(n_samples);
  std::vector<double> lin(n_samples, 0.0);
  std::vector<std::size_t> q_pairs(n_samples, 0), q_bad(n_samples, 0);
  parallel_for(n_samples, [&](std::size_t i) {
    const auto& p = pts[i];
    images[i] = canonical_embedding(spec, p);
    const Vector lhs = canonical_embedding(spec, flow(spec, p, times[i]));
    lin[i] = (lhs - matrix_exp(gen, times[i]) * images[i]).norm();
    for (int j = 0; j < spec.n; ++j) {
      if (!p.collapsed[j] || spec.M.col(j).any()) continue;
      Vector alt = p.theta;
      alt[j] = redraw[i][j];
      const Vector other = canonical_embedding(spec, make_point(spec, alt));
      ++q_pairs[i];
      if (!(other.array() == images[i].array()).all()) ++q_bad[i];
    }
  });
  std::vector<double> margin(n_samples, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> sep_pairs(n_samples, 0);
  parallel_for(n_samples, [&](std::size_t i) {
    for (std::size_t k = i + 1; k < n_samples; ++k) {
      const double d = quotient_distance(pts[i], pts[k]);
      if (d == 0.0) continue;
      ++sep_pairs[i];
      margin[i] = std::min(margin[i], (images[i] - images[k]).norm() / d);
    }
  });
  for (std::size_t i = 0; i < n_samples; ++i) {
    rep.linearity_residual = std::max(rep.linearity_residual, lin[i]);
    rep.quotient_pairs += q_pairs[i];
    rep.quotient_mismatches += q_bad[i];
    rep.separation_pairs += sep_pairs[i];
    rep.separation_margin = std::min(rep.separation_margin, margin[i]);
    if (std::any_of(pts[i].collapsed.begin(), pts[i].collapsed.end(), [](bool b) { return b; })) {
      ++rep.collapsed_samples;
    }
    for (int j = 0; j < spec.n; ++j) {
      rep.max_pinched_modulus = std::max(rep.max_pinched_modulus, images[i].segment(2 * j, 2).norm());
    }
    for (int k = 0; k < spec.m; ++k) {
      rep.max_base_modulus = std::max(rep.max_base_modulus, images[i].segment(2 * (spec.n + k), 2).norm());
    }
  }
  rep.pass = rep.linearity_residual <= linearity_tol && rep.quotient_mismatches == 0 && rep.separation_margin > 0.0;
  return rep;
}

/// Embedded orbit of p at count equally spaced times in [0, tmax].
inline Trajectory embedded_trajectory(const PinchedTorusSpec& spec, const PinchedPoint& p, double tmax,
                                      std::size_t count) {
  Trajectory traj;
  for (std::size_t k = 0; k < count; ++k) {
    const double t = count == 1 ? 0.0 : tmax * static_cast<double>(k) / static_cast<double>(count - 1);
    traj.times.push_back(t);
    traj.states.push_back(canonical_embedding(spec, flow(spec, p, t)));
  }
  return traj;
}

inline std::vector<std::string> embedding_columns(const PinchedTorusSpec& spec) {
  std::vector<std::string> cols;
  for (int j = 1; j <= spec.n; ++j) {
    cols.push_back("re_z" + std::to_string(j));
    cols.push_back("im_z" + std::to_string(j));
  }
  for (int k = 1; k <= spec.m; ++k) {
    cols.push_back("re_w" + std::to_string(k));
    cols.push_back("im_w" + std::to_string(k));
  }
  return cols;
}

}  // namespace flowlin
