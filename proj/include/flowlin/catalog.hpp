#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "flowlin/embed.hpp"
#include "flowlin/errors.hpp"
#include "flowlin/flows.hpp"
#include "flowlin/linalg.hpp"
#include "flowlin/phase.hpp"

namespace flowlin {

enum class VerdictKind { LinearizableSmooth, LinearizableTopological, NotLinearizable };

inline std::string to_string(VerdictKind v) {
  switch (v) {
    case VerdictKind::LinearizableSmooth: return "LinearizableSmooth";
    case VerdictKind::LinearizableTopological: return "LinearizableTopological";
    case VerdictKind::NotLinearizable: return "NotLinearizable";
  }
  return "NotLinearizable";
}

struct ExpectedVerdict {
  VerdictKind kind = VerdictKind::LinearizableSmooth;
  std::string reason;
};

/// Torus action h -> action(h, .) with h in [0,1)^n, and the direction omega
/// with flow(t, x) = action(omega t mod 1, x).
struct TorusActionSpec {
  int torus_dim = 1;
  std::function<Vector(const Vector& h, const Vector& x)> action;
  Vector omega;
};

using PlanarField = std::function<Eigen::Vector2d(const Eigen::Vector2d&)>;

/// An equilibrium with the generating field written in a planar chart around it.
struct CatalogEquilibrium {
  Vector location;
  int expected_index = 1;
  PlanarField planar_field;
  Eigen::Vector2d planar_center = Eigen::Vector2d::Zero();
  std::string chart;
};

using StateSampler = std::function<Vector(std::mt19937_64&)>;

struct CatalogEntry {
  std::string name;
  std::string description;
  FlowSystem system;
  std::optional<FlowSystem> vector_field_system;
  std::optional<TorusActionSpec> action;
  std::optional<EmbeddingCandidate> exact_embedding;
  std::optional<StateMap> exact_phase;
  std::optional<LyapunovData> lyapunov;
  std::optional<AttractorModel> attractor;
  std::optional<EmbeddingCandidate> attractor_embedding;  // linearizes the flow on A
  std::optional<TransverseMap> transverse;
  ExpectedVerdict expected_verdict;
  std::vector<CatalogEquilibrium> equilibria;
  int manifold_dim = 0;
  bool compact = true;
  std::optional<std::string> surface_type;
  std::optional<int> euler_characteristic;
  StateSampler sample_state;
  std::optional<StateDistance> quotient_distance;
  std::optional<TangentBasisMap> tangent_basis;
  std::optional<StateMap> torus_factor;  // X -> T^n for the factor certificate
  std::vector<Vector> escape_sequence;

  double distance(const Vector& a, const Vector& b) const {
    return quotient_distance ? (*quotient_distance)(a, b) : system.chart().distance(a, b);
  }
};

namespace catalog_detail {

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

inline Eigen::Vector2d rotate(double x, double y, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * x - s * y, s * x + c * y};
}

// Unit vector uniform on S^2.
inline Vector sphere_point(std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Vector v(3);
  do {
    v << normal(rng), normal(rng), normal(rng);
  } while (v.norm() < 1e-8);
  return v / v.norm();
}

// Orthonormal tangent basis of S^2 at unit vector a, as columns in R^3.
inline Matrix sphere_tangent(const Vector& a) {
  Eigen::Vector3d n = a.head<3>().normalized();
  Eigen::Vector3d helper = std::abs(n.z()) < 0.9 ? Eigen::Vector3d::UnitZ() : Eigen::Vector3d::UnitX();
  Eigen::Vector3d e1 = n.cross(helper).normalized();
  Eigen::Vector3d e2 = n.cross(e1);
  Matrix basis(3, 2);
  basis.col(0) = e1;
  basis.col(1) = e2;
  return basis;
}

inline std::vector<Vector> fibonacci_sphere(int count) {
  std::vector<Vector> pts;
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double s = 1.0 - 2.0 * (i + 0.5) / count;
    const double rho = std::sqrt(1.0 - s * s);
    pts.push_back(vec({rho * std::cos(golden * i), rho * std::sin(golden * i), s}));
  }
  return pts;
}

inline std::vector<Vector> unit_circle_polar(int count) {
  std::vector<Vector> pts;
  for (int i = 0; i < count; ++i) pts.push_back(vec({1.0, kTwoPi * i / count}));
  return pts;
}

inline Vector planar_rotation_flow(double t, const Vector& x) {
  Vector y = x;
  const auto r = rotate(x[0], x[1], kTwoPi * t);
  y[0] = r[0];
  y[1] = r[1];
  return y;
}

inline CatalogEquilibrium pole(double s) {
  CatalogEquilibrium eq;
  eq.location = vec({0.0, 0.0, s});
  eq.expected_index = 1;
  eq.planar_field = [](const Eigen::Vector2d& p) { return Eigen::Vector2d(-kTwoPi * p.y(), kTwoPi * p.x()); };
  eq.chart = s > 0 ? "graph chart (x, y) over the northern hemisphere" : "graph chart (x, y) over the southern hemisphere";
  return eq;
}

inline CatalogEntry quasiperiodic_torus(int n) {
  static const double base[3] = {1.0, std::sqrt(2.0), std::sqrt(3.0)};
  Vector omega(n);
  for (int i = 0; i < n; ++i) omega[i] = base[i];
  const auto chart = ChartDescriptor::torus_angles(n);
  CatalogEntry e{.name = "quasiperiodic_torus_" + std::to_string(n),
                 .description = "constant-speed rotations on the " + std::to_string(n) +
                                "-torus with frequencies (1, sqrt2, sqrt3)[:n]",
                 .system = FlowSystem::closed_form(chart, [omega](double t, const Vector& x) -> Vector {
                   return x + t * omega;
                 })};
  e.vector_field_system = FlowSystem::vector_field(chart, [omega](const Vector&) -> Vector { return omega; });
  e.action = TorusActionSpec{n, [](const Vector& h, const Vector& x) -> Vector { return x + h; }, omega};
  std::vector<Matrix> blocks;
  for (int i = 0; i < n; ++i) blocks.push_back(rotation_block(kTwoPi * omega[i]));
  e.exact_embedding = EmbeddingCandidate{
      [n](const Vector& x) -> Vector {
        Vector y(2 * n);
        for (int i = 0; i < n; ++i) {
          y[2 * i] = std::cos(kTwoPi * x[i]);
          y[2 * i + 1] = std::sin(kTwoPi * x[i]);
        }
        return y;
      },
      LinearGenerator(block_diagonal(blocks)), Provenance::Exact};
  e.expected_verdict = {VerdictKind::LinearizableSmooth, "torus action by translations"};
  e.manifold_dim = n;
  e.compact = true;
  if (n == 2) e.surface_type = "torus";
  e.euler_characteristic = 0;
  e.sample_state = [n](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vector x(n);
    for (int i = 0; i < n; ++i) x[i] = u(rng);
    return x;
  };
  e.torus_factor = [](const Vector& x) -> Vector { return x; };
  return e;
}

inline CatalogEntry sphere_rotation() {
  const auto chart = ChartDescriptor::euclidean(3);
  CatalogEntry e{.name = "sphere_rotation",
                 .description = "unit sphere in C x R rotating its latitude circles once per unit time",
                 .system = FlowSystem::closed_form(chart, planar_rotation_flow)};
  e.vector_field_system = FlowSystem::vector_field(
      chart, [](const Vector& x) -> Vector { return vec({-kTwoPi * x[1], kTwoPi * x[0], 0.0}); });
  e.action = TorusActionSpec{1, [](const Vector& h, const Vector& x) { return planar_rotation_flow(h[0], x); },
                             vec({1.0})};
  e.exact_embedding = EmbeddingCandidate{[](const Vector& x) -> Vector { return x; },
                                         LinearGenerator(block_diagonal({rotation_block(kTwoPi), Matrix::Zero(1, 1)})),
                                         Provenance::Exact};
  e.expected_verdict = {VerdictKind::LinearizableSmooth, "restriction of a linear rotation of C x R"};
  e.equilibria = {pole(1.0), pole(-1.0)};
  e.manifold_dim = 2;
  e.surface_type = "sphere";
  e.euler_characteristic = 2;
  e.sample_state = sphere_point;
  e.tangent_basis = sphere_tangent;
  return e;
}

inline CatalogEntry klein_bottle() {
  const auto chart = ChartDescriptor::torus_angles(2);
  CatalogEntry e{.name = "klein_bottle",
                 .description = "T^2 modulo (x, y) ~ (x + 1/2, -y), flowing by translation in x",
                 .system = FlowSystem::closed_form(chart, [](double t, const Vector& x) -> Vector {
                   return vec({x[0] + t, x[1]});
                 })};
  e.vector_field_system = FlowSystem::vector_field(chart, [](const Vector&) -> Vector { return vec({1.0, 0.0}); });
  e.action = TorusActionSpec{1, [](const Vector& h, const Vector& x) -> Vector { return vec({x[0] + h[0], x[1]}); },
                             vec({1.0})};
  // (e^{4 pi i x}, e^{2 pi i x} sin 2 pi y, cos 2 pi y) in C x C x R.
  e.exact_embedding = EmbeddingCandidate{
      [](const Vector& x) -> Vector {
        const double s = std::sin(kTwoPi * x[1]);
        return vec({std::cos(2 * kTwoPi * x[0]), std::sin(2 * kTwoPi * x[0]), std::cos(kTwoPi * x[0]) * s,
                    std::sin(kTwoPi * x[0]) * s, std::cos(kTwoPi * x[1])});
      },
      LinearGenerator(block_diagonal({rotation_block(2 * kTwoPi), rotation_block(kTwoPi), Matrix::Zero(1, 1)})),
      Provenance::Exact};
  e.expected_verdict = {VerdictKind::LinearizableSmooth, "circle action descending from T^2"};
  e.manifold_dim = 2;
  e.surface_type = "klein_bottle";
  e.euler_characteristic = 0;
  e.sample_state = [](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double a = u(rng);
    return vec({a, u(rng)});
  };
  e.quotient_distance = [chart](const Vector& a, const Vector& b) {
    const Vector b_alt = chart.canonicalize(vec({b[0] + 0.5, -b[1]}));
    return std::min(chart.distance(a, b), chart.distance(a, b_alt));
  };
  return e;
}

inline CatalogEntry projective_plane() {
  const auto chart = ChartDescriptor::euclidean(3);
  CatalogEntry e{.name = "projective_plane",
                 .description = "S^2 modulo the antipodal map, with the induced latitude rotation",
                 .system = FlowSystem::closed_form(chart, planar_rotation_flow)};
  e.vector_field_system = FlowSystem::vector_field(
      chart, [](const Vector& x) -> Vector { return vec({-kTwoPi * x[1], kTwoPi * x[0], 0.0}); });
  e.action = TorusActionSpec{1, [](const Vector& h, const Vector& x) { return planar_rotation_flow(h[0], x); },
                             vec({1.0})};
  // [z, s] -> (z^2, s conj(z), s^2).
  e.exact_embedding = EmbeddingCandidate{
      [](const Vector& p) -> Vector {
        const double x = p[0], y = p[1], s = p[2];
        return vec({x * x - y * y, 2 * x * y, s * x, -s * y, s * s});
      },
      LinearGenerator(block_diagonal({rotation_block(2 * kTwoPi), rotation_block(-kTwoPi), Matrix::Zero(1, 1)})),
      Provenance::Exact};
  e.expected_verdict = {VerdictKind::LinearizableSmooth, "circle action descending from S^2"};
  e.equilibria = {pole(1.0)};
  e.equilibria.front().chart = "graph chart (x, y) around the class of the poles";
  e.manifold_dim = 2;
  e.surface_type = "projective_plane";
  e.euler_characteristic = 1;
  e.sample_state = sphere_point;
  e.tangent_basis = sphere_tangent;
  e.quotient_distance = [](const Vector& a, const Vector& b) { return std::min((a - b).norm(), (a + b).norm()); };
  return e;
}

inline CatalogEntry product_attractor() {
  const auto chart = ChartDescriptor::product({ChartDescriptor::euclidean(3), ChartDescriptor::euclidean(1)});
  auto closed = [](double t, const Vector& x) -> Vector {
    Vector y = planar_rotation_flow(t, x);
    y[3] = x[3] * std::exp(-t);
    return y;
  };
  CatalogEntry e{.name = "product_attractor",
                 .description = "sphere_rotation times (dy/dt = -y on R); A = S^2 x {0}",
                 .system = FlowSystem::closed_form(chart, closed)};
  e.vector_field_system = FlowSystem::vector_field(
      chart, [](const Vector& x) -> Vector { return vec({-kTwoPi * x[1], kTwoPi * x[0], 0.0, -x[3]}); });
  e.exact_embedding = EmbeddingCandidate{
      [](const Vector& x) -> Vector { return x; },
      LinearGenerator(block_diagonal({rotation_block(kTwoPi), Matrix::Zero(1, 1), -Matrix::Identity(1, 1)})),
      Provenance::Exact};
  e.exact_phase = [](const Vector& x) -> Vector { return vec({x[0], x[1], x[2], 0.0}); };

  std::vector<Vector> cloud;
  for (const auto& p : fibonacci_sphere(400)) cloud.push_back(vec({p[0], p[1], p[2], 0.0}));
  e.attractor = AttractorModel(
      cloud, FlowSystem::closed_form(chart, closed),
      StateMap([](const Vector& y) -> Vector {
        const Vector a = y.head(3).normalized();
        return vec({a[0], a[1], a[2], 0.0});
      }),
      [](const Vector& a) -> Matrix {
        Matrix b = Matrix::Zero(4, 2);
        b.topRows(3) = sphere_tangent(a.head(3));
        return b;
      });
  e.attractor_embedding = EmbeddingCandidate{[](const Vector& x) -> Vector { return x.head(3); },
                                             LinearGenerator(block_diagonal({rotation_block(kTwoPi), Matrix::Zero(1, 1)})),
                                             Provenance::Exact};
  // N = {y = +1} u {y = -1}: two spheres sent to orthogonal unit spheres in R^6.
  e.lyapunov = LyapunovData{[](const Vector& x) { return x[3] * x[3]; }, 1.0, [](const Vector& x) -> Vector {
                              Vector out = Vector::Zero(6);
                              const Vector a = x.head(3).normalized();
                              if (x[3] > 0) out.head(3) = a;
                              else out.tail(3) = a;
                              return out;
                            }};
  e.transverse = TransverseMap{[](const Vector& x) -> Vector { return x.tail(1); },
                               LinearGenerator(-Matrix::Identity(1, 1))};
  e.expected_verdict = {VerdictKind::LinearizableSmooth, "product of a linearizable compact flow and a linear sink"};
  e.manifold_dim = 3;
  e.compact = false;
  e.sample_state = [](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    const Vector a = sphere_point(rng);
    return vec({a[0], a[1], a[2], u(rng)});
  };
  e.tangent_basis = [](const Vector& x) -> Matrix {
    Matrix b = Matrix::Zero(4, 3);
    b.topLeftCorner(3, 2) = sphere_tangent(x.head(3));
    b(3, 2) = 1.0;
    return b;
  };
  for (int k = 1; k <= 20; ++k) e.escape_sequence.push_back(vec({1.0, 0.0, 0.0, 0.5 * k}));
  return e;
}

// dr/dt = -(r-1)^3, dtheta/dt = r. With u = r - 1:
//   u(t) = u0 / sqrt(1 + 2 t u0^2),
//   theta(t) = theta0 + t + 2 t u0 / (sqrt(1 + 2 t u0^2) + 1),
// which is the textbook closed form rewritten without cancellation; the sign
// of u0 selects the branch above or below the circle.
inline Vector annulus_cubic_flow(double t, const Vector& x) {
  const double u0 = x[0] - 1.0;
  const double q = std::sqrt(1.0 + 2.0 * t * u0 * u0);
  return vec({1.0 + u0 / q, x[1] + t + 2.0 * t * u0 / (q + 1.0)});
}

inline double annulus_cubic_t_min(const Vector& x) {
  const double u0 = x[0] - 1.0;
  if (u0 == 0.0) return -std::numeric_limits<double>::infinity();
  if (u0 > 0.0) return -1.0 / (2.0 * u0 * u0);   // radius escapes to infinity
  return (1.0 - 1.0 / (u0 * u0)) / 2.0;           // trajectory reaches the puncture
}

inline AttractorModel unit_circle_attractor() {
  const auto chart = ChartDescriptor::polar_annulus();
  return AttractorModel(unit_circle_polar(400),
                        FlowSystem::closed_form(chart, [](double t, const Vector& x) -> Vector {
                          return vec({x[0], x[1] + t});
                        }),
                        StateMap([](const Vector& y) -> Vector { return vec({1.0, y[1]}); }),
                        [](const Vector&) -> Matrix { return vec({0.0, 1.0}); });
}

inline CatalogEntry annulus_cubic() {
  const auto chart = ChartDescriptor::polar_annulus();
  CatalogEntry e{.name = "annulus_cubic",
                 .description = "dr/dt = -(r-1)^3, dtheta/dt = r on the punctured plane; A = unit circle",
                 .system = FlowSystem::closed_form(chart, annulus_cubic_flow, annulus_cubic_t_min)};
  e.vector_field_system = FlowSystem::vector_field(
      chart,
      [](const Vector& x) -> Vector {
        const double u = x[0] - 1.0;
        return vec({-u * u * u, x[0]});
      },
      {}, annulus_cubic_t_min);
  e.attractor = unit_circle_attractor();
  e.expected_verdict = {VerdictKind::NotLinearizable,
                        "no continuous asymptotic phase: basin points are not asymptotically in phase with any "
                        "point of the limit cycle"};
  e.manifold_dim = 2;
  e.compact = false;
  e.sample_state = [](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> r(0.25, 2.5), th(0.0, kTwoPi);
    double radius;
    do {
      radius = r(rng);
    } while (std::abs(radius - 1.0) < 1e-3);
    return vec({radius, th(rng)});
  };
  return e;
}

// v = ln r obeys dv/dt = -v, so v(t) = v0 e^{-t} and
// theta(t) = theta0 + t + v0 (1 - e^{-t}).
inline Vector log_radial_flow(double t, const Vector& x) {
  const double v0 = std::log(x[0]);
  const double decay = std::exp(-t);
  return vec({std::exp(v0 * decay), x[1] + t - v0 * std::expm1(-t)});
}

inline CatalogEntry log_radial() {
  const auto chart = ChartDescriptor::polar_annulus();
  CatalogEntry e{.name = "log_radial",
                 .description = "dr/dt = -r ln r, dtheta/dt = 1 + ln r on r > 0; complete flow, A = unit circle",
                 .system = FlowSystem::closed_form(chart, log_radial_flow)};
  e.vector_field_system = FlowSystem::vector_field(chart, [](const Vector& x) -> Vector {
    const double v = std::log(x[0]);
    return vec({-x[0] * v, 1.0 + v});
  });
  const Matrix b_transverse = -Matrix::Identity(2, 2) + rotation_block(1.0);
  e.exact_embedding = EmbeddingCandidate{
      [](const Vector& x) -> Vector {
        const double v = std::log(x[0]);
        const double phi = x[1] + v;
        return vec({std::cos(phi), std::sin(phi), v * std::cos(phi), v * std::sin(phi)});
      },
      LinearGenerator(block_diagonal({rotation_block(1.0), b_transverse})), Provenance::Exact};
  e.exact_phase = [](const Vector& x) -> Vector {
    return vec({1.0, reduce_angle(x[1] + std::log(x[0]), kTwoPi)});
  };
  e.attractor = unit_circle_attractor();
  e.attractor_embedding = EmbeddingCandidate{
      [](const Vector& x) -> Vector { return vec({std::cos(x[1]), std::sin(x[1])}); },
      LinearGenerator(rotation_block(1.0)), Provenance::Exact};
  // N = {r = e} u {r = 1/e}: two circles sent to orthogonal unit circles in R^4.
  e.lyapunov = LyapunovData{[](const Vector& x) {
                              const double v = std::log(x[0]);
                              return v * v;
                            },
                            1.0, [](const Vector& x) -> Vector {
                              Vector out = Vector::Zero(4);
                              const Vector c = vec({std::cos(x[1]), std::sin(x[1])});
                              if (x[0] > 1.0) out.head(2) = c;
                              else out.tail(2) = c;
                              return out;
                            }};
  e.transverse = TransverseMap{[](const Vector& x) -> Vector {
                                 const double v = std::log(x[0]);
                                 const double phi = x[1] + v;
                                 return vec({v * std::cos(phi), v * std::sin(phi)});
                               },
                               LinearGenerator(b_transverse)};
  e.expected_verdict = {VerdictKind::LinearizableSmooth, "smooth asymptotic phase and an equivariant transverse map"};
  e.manifold_dim = 2;
  e.compact = false;
  e.sample_state = [](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> v(-2.0, 2.0), th(0.0, kTwoPi);
    const double lr = v(rng);
    return vec({std::exp(lr), th(rng)});
  };
  for (int k = 1; k <= 20; ++k) e.escape_sequence.push_back(vec({std::exp(0.5 * k), 0.0}));
  return e;
}

inline CatalogEntry saddle_plane() {
  const auto chart = ChartDescriptor::euclidean(2);
  CatalogEntry e{.name = "saddle_plane",
                 .description = "linear saddle (dx/dt, dy/dt) = (x, -y) on the plane",
                 .system = FlowSystem::closed_form(chart, [](double t, const Vector& x) -> Vector {
                   return vec({x[0] * std::exp(t), x[1] * std::exp(-t)});
                 })};
  e.vector_field_system =
      FlowSystem::vector_field(chart, [](const Vector& x) -> Vector { return vec({x[0], -x[1]}); });
  e.exact_embedding = EmbeddingCandidate{[](const Vector& x) -> Vector { return x; },
                                         LinearGenerator(vec({1.0, -1.0}).asDiagonal().toDenseMatrix()),
                                         Provenance::Exact};
  CatalogEquilibrium eq;
  eq.location = vec({0.0, 0.0});
  eq.expected_index = -1;
  eq.planar_field = [](const Eigen::Vector2d& p) { return Eigen::Vector2d(p.x(), -p.y()); };
  eq.chart = "identity";
  e.equilibria = {eq};
  e.expected_verdict = {VerdictKind::LinearizableSmooth,
                        "already linear; the plane is not compact, so the compact-case obstructions do not apply"};
  e.manifold_dim = 2;
  e.compact = false;
  e.sample_state = [](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double a = u(rng);
    return vec({a, u(rng)});
  };
  return e;
}

inline std::map<std::string, CatalogEntry> build_catalog() {
  std::map<std::string, CatalogEntry> out;
  auto add = [&](CatalogEntry e) {
    auto name = e.name;
    out.emplace(std::move(name), std::move(e));
  };
  for (int n = 1; n <= 3; ++n) add(quasiperiodic_torus(n));
  add(sphere_rotation());
  add(klein_bottle());
  add(projective_plane());
  add(product_attractor());
  add(annulus_cubic());
  add(log_radial());
  add(saddle_plane());
  return out;
}

inline const std::map<std::string, CatalogEntry>& registry() {
  static const std::map<std::string, CatalogEntry> entries = build_catalog();
  return entries;
}

}  // namespace catalog_detail

namespace catalog {

inline std::vector<std::string> names() {
  std::vector<std::string> out;
  for (const auto& [name, entry] : catalog_detail::registry()) out.push_back(name);
  return out;
}

inline const CatalogEntry& get(const std::string& name) {
  const auto& reg = catalog_detail::registry();
  const auto it = reg.find(name);
  if (it == reg.end()) raise(Errc::UnknownEntry, "no catalog entry named '" + name + "'");
  return it->second;
}

inline const std::vector<double>& standard_times() {
  static const std::vector<double> times = {0.0, 0.1, 1.0, kPi, 10.0};
  return times;
}

inline std::vector<Vector> sample_states(const CatalogEntry& entry, std::mt19937_64& rng, std::size_t count) {
  std::vector<Vector> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(entry.sample_state(rng));
  return out;
}

struct ActionReport {
  double identity_max = 0.0;
  double composition_max = 0.0;
  double flow_max = 0.0;
  double tolerance = 0.0;
  bool pass = true;
};

/// action(0,x) = x, action(h+h') = action(h) o action(h'), flow(t) = action(omega t mod 1).
inline ActionReport verify_action(const CatalogEntry& entry, std::size_t n_samples, double tol, std::mt19937_64& rng) {
  if (!entry.action) raise(Errc::MissingAction, entry.name + " has no torus action");
  const auto& spec = *entry.action;
  std::uniform_real_distribution<double> unit(0.0, 1.0), time(-10.0, 10.0);
  ActionReport rep;
  rep.tolerance = tol;
  const Vector zero = Vector::Zero(spec.torus_dim);
  auto mod1 = [](Vector h) {
    for (Eigen::Index i = 0; i < h.size(); ++i) h[i] = reduce_angle(h[i], 1.0);
    return h;
  };
  auto act = [&](const Vector& h, const Vector& x) { return entry.system.chart().canonicalize(spec.action(h, x)); };
  for (std::size_t k = 0; k < n_samples; ++k) {
    const Vector x = entry.sample_state(rng);
    Vector h(spec.torus_dim), h2(spec.torus_dim);
    for (int i = 0; i < spec.torus_dim; ++i) {
      h[i] = unit(rng);
      h2[i] = unit(rng);
    }
    const double t = time(rng);
    rep.identity_max = std::max(rep.identity_max, entry.distance(act(zero, x), x));
    rep.composition_max =
        std::max(rep.composition_max, entry.distance(act(mod1(h + h2), x), act(h, act(h2, x))));
    rep.flow_max = std::max(rep.flow_max, entry.distance(evolve(entry.system, x, t), act(mod1(t * spec.omega), x)));
  }
  rep.pass = rep.identity_max <= tol && rep.composition_max <= tol && rep.flow_max <= tol;
  return rep;
}

/// max |F(flow(t,x)) - exp(Bt) F(x)| of the entry's exact embedding.
inline double exact_embedding_residual(const CatalogEntry& entry, const std::vector<Vector>& states,
                                       const std::vector<double>& times) {
  if (!entry.exact_embedding) raise(Errc::MissingEmbedding, entry.name + " has no exact embedding");
  return verify_linearization(*entry.exact_embedding, entry.system, states, times).max;
}

}  // namespace catalog
}  // namespace flowlin
