#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "flowlin/catalog.hpp"
#include "flowlin/errors.hpp"
#include "flowlin/flows.hpp"
#include "flowlin/linalg.hpp"
#include "flowlin/parallel.hpp"
#include "flowlin/phase.hpp"

namespace flowlin {

enum class DictionaryKind { Fourier, Monomial, Custom };

/// Observable map x -> R^D with one name per component.
struct Dictionary {
  DictionaryKind kind = DictionaryKind::Monomial;
  int degree = 1;
  std::string label;
  std::vector<std::string> names;
  StateMap eval;

  int size() const { return static_cast<int>(names.size()); }
};

namespace detail {

// Exponent vectors of total degree lo..hi over k variables, graded then lexicographic.
inline std::vector<std::vector<int>> exponents(int k, int lo, int hi) {
  std::vector<std::vector<int>> out;
  for (int total = lo; total <= hi; ++total) {
    std::vector<int> e(static_cast<std::size_t>(k), 0);
    std::function<void(int, int)> rec = [&](int var, int left) {
      if (var == k - 1) {
        e[var] = left;
        out.push_back(e);
        return;
      }
      for (int p = left; p >= 0; --p) {
        e[var] = p;
        rec(var + 1, left - p);
      }
    };
    if (k == 0) {
      if (total == 0) out.push_back({});
      continue;
    }
    rec(0, total);
  }
  return out;
}

inline double monomial(const Vector& x, const std::vector<int>& idx, const std::vector<int>& e) {
  double v = 1.0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    for (int p = 0; p < e[i]; ++p) v *= x[idx[i]];
  }
  return v;
}

inline std::string monomial_name(const std::vector<int>& idx, const std::vector<int>& e) {
  std::string s;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (e[i] == 0) continue;
    if (!s.empty()) s += "*";
    s += "x" + std::to_string(idx[i] + 1);
    if (e[i] > 1) s += "^" + std::to_string(e[i]);
  }
  return s.empty() ? "1" : s;
}

}  // namespace detail

/// Monomials of total degree 1..d in the chart coordinates.
inline Dictionary monomial_dictionary(int dim, int degree) {
  if (degree < 1) raise(Errc::InvalidArgument, "monomial degree must be >= 1");
  std::vector<int> idx(static_cast<std::size_t>(dim));
  for (int i = 0; i < dim; ++i) idx[i] = i;
  const auto exps = detail::exponents(dim, 1, degree);
  Dictionary d{DictionaryKind::Monomial, degree, "monomial:" + std::to_string(degree), {}, {}};
  for (const auto& e : exps) d.names.push_back(detail::monomial_name(idx, e));
  d.eval = [idx, exps](const Vector& x) -> Vector {
    Vector out(static_cast<Eigen::Index>(exps.size()));
    for (std::size_t k = 0; k < exps.size(); ++k) out[k] = detail::monomial(x, idx, exps[k]);
    return out;
  };
  return d;
}

/// Harmonics k = 1..d of each angle coordinate, each multiplied by the
/// monomials of degree 0..d in the remaining coordinates, then the pure
/// monomials of degree 1..d in the remaining coordinates.
inline Dictionary fourier_dictionary(const ChartDescriptor& chart, int degree) {
  if (degree < 1) raise(Errc::InvalidArgument, "fourier degree must be >= 1");
  if (!chart.has_angles()) raise(Errc::InvalidArgument, "fourier dictionary needs an angle coordinate");
  std::vector<int> angles, plain;
  std::vector<double> scale;
  for (int i = 0; i < chart.dim(); ++i) {
    const Wrap w = chart.wraps()[i];
    if (w == Wrap::None) {
      plain.push_back(i);
    } else {
      angles.push_back(i);
      scale.push_back(kTwoPi / wrap_period(w));
    }
  }
  const auto radial = detail::exponents(static_cast<int>(plain.size()), 0, degree);
  const auto pure = detail::exponents(static_cast<int>(plain.size()), 1, degree);
  Dictionary d{DictionaryKind::Fourier, degree, "fourier:" + std::to_string(degree), {}, {}};
  for (std::size_t a = 0; a < angles.size(); ++a) {
    for (int k = 1; k <= degree; ++k) {
      for (const auto& e : radial) {
        const std::string m = detail::monomial_name(plain, e);
        const std::string arg = std::to_string(k) + "*x" + std::to_string(angles[a] + 1);
        d.names.push_back((m == "1" ? "" : m + "*") + "cos(" + arg + ")");
        d.names.push_back((m == "1" ? "" : m + "*") + "sin(" + arg + ")");
      }
    }
  }
  for (const auto& e : pure) d.names.push_back(detail::monomial_name(plain, e));
  d.eval = [angles, plain, scale, radial, pure, degree](const Vector& x) -> Vector {
    Vector out(static_cast<Eigen::Index>(2 * angles.size() * degree * radial.size() + pure.size()));
    Eigen::Index c = 0;
    for (std::size_t a = 0; a < angles.size(); ++a) {
      for (int k = 1; k <= degree; ++k) {
        const double arg = k * scale[a] * x[angles[a]];
        const double co = std::cos(arg), si = std::sin(arg);
        for (const auto& e : radial) {
          const double m = detail::monomial(x, plain, e);
          out[c++] = m * co;
          out[c++] = m * si;
        }
      }
    }
    for (const auto& e : pure) out[c++] = detail::monomial(x, plain, e);
    return out;
  };
  return d;
}

/// The components of a catalog entry's exact embedding.
inline Dictionary custom_dictionary(const CatalogEntry& entry) {
  if (!entry.exact_embedding) raise(Errc::MissingEmbedding, entry.name + " has no exact embedding to use as a dictionary");
  Dictionary d{DictionaryKind::Custom, 0, "custom:" + entry.name, {}, entry.exact_embedding->map};
  const int k = static_cast<int>(entry.exact_embedding->generator.dim());
  for (int i = 1; i <= k; ++i) d.names.push_back("F" + std::to_string(i));
  return d;
}

/// "fourier:d", "monomial:d" or "custom:<catalog name>".
inline Dictionary parse_dictionary(const std::string& text, const CatalogEntry& entry) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) raise(Errc::InvalidArgument, "dictionary must be kind:argument, got '" + text + "'");
  const std::string kind = text.substr(0, colon), arg = text.substr(colon + 1);
  if (kind == "custom") return custom_dictionary(catalog::get(arg));
  int degree = 0;
  try {
    std::size_t used = 0;
    degree = std::stoi(arg, &used);
    if (used != arg.size()) throw std::invalid_argument(arg);
  } catch (const std::exception&) {
    raise(Errc::InvalidArgument, "dictionary degree must be an integer, got '" + arg + "'");
  }
  if (kind == "fourier") return fourier_dictionary(entry.system.chart(), degree);
  if (kind == "monomial") return monomial_dictionary(entry.system.dim(), degree);
  raise(Errc::InvalidArgument, "unknown dictionary kind '" + kind + "'");
}

struct SnapshotPairs {
  std::vector<Vector> x;
  std::vector<Vector> y;  // flow(h, x)
  double step = 0.0;

  std::size_t size() const { return x.size(); }
};

inline SnapshotPairs collect_snapshots(const FlowSystem& sys, const std::vector<Vector>& states, double step) {
  if (!(step > 0.0) || !std::isfinite(step)) raise(Errc::InvalidArgument, "snapshot step must be positive");
  SnapshotPairs out;
  out.step = step;
  out.x.resize(states.size());
  out.y.resize(states.size());
  parallel_for(states.size(), [&](std::size_t i) {
    out.x[i] = sys.chart().canonicalize(states[i]);
    out.y[i] = evolve(sys, out.x[i], step);
  });
  return out;
}

using Spectrum = std::vector<std::complex<double>>;

/// Eigenvalues sorted by argument, then modulus.
inline Spectrum sorted_spectrum(const Matrix& k) {
  Eigen::EigenSolver<Matrix> es(k, false);
  Spectrum out(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    const double aa = std::arg(a), ab = std::arg(b);
    if (aa != ab) return aa < ab;
    return std::abs(a) < std::abs(b);
  });
  return out;
}

struct EDMDModel {
  Matrix K;  // Psi(flow(h, x)) ~ K Psi(x)
  double step = 0.0;
  double ridge = 0.0;
  double training_residual = 0.0;
  double gram_condition = 0.0;
  std::size_t pairs = 0;
  Spectrum spectrum;
};

inline constexpr double kMaxGramCondition = 1e14;

inline void lift(const Dictionary& dict, const std::vector<Vector>& xs, Matrix& out) {
  out.resize(static_cast<Eigen::Index>(xs.size()), dict.size());
  std::vector<Vector> rows(xs.size());
  parallel_for(xs.size(), [&](std::size_t i) { rows[i] = dict.eval(xs[i]); });
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (rows[i].size() != dict.size()) raise(Errc::InvalidArgument, "dictionary size mismatch");
    if (!rows[i].allFinite()) raise(Errc::RangeError, "dictionary evaluation is not finite");
    out.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
}

inline double relative_residual(const Matrix& psi_x, const Matrix& psi_y, const Matrix& k) {
  const double denom = psi_y.norm();
  const double num = (psi_y - psi_x * k.transpose()).norm();
  return denom > 0.0 ? num / denom : num;
}

/// K = argmin sum |Psi(y) - K Psi(x)|^2 + ridge |K|^2 via K^T = (G + ridge I)^{-1} A.
inline EDMDModel fit(const Dictionary& dict, const SnapshotPairs& pairs, double ridge = 1e-10) {
  if (!(ridge >= 0.0)) raise(Errc::InvalidArgument, "ridge must be >= 0");
  if (static_cast<int>(pairs.size()) < dict.size()) {
    raise(Errc::InvalidArgument, "need at least D = " + std::to_string(dict.size()) + " pairs");
  }
  Matrix psi_x, psi_y;
  lift(dict, pairs.x, psi_x);
  lift(dict, pairs.y, psi_y);
  const Matrix g = psi_x.transpose() * psi_x;
  const Matrix a = psi_x.transpose() * psi_y;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(g, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
  EDMDModel m;
  m.gram_condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (ridge == 0.0 && !(m.gram_condition <= kMaxGramCondition)) {
    raise(Errc::RankDeficient, "Gram condition " + format_number(m.gram_condition) + " exceeds 1e14; use ridge > 0");
  }
  const Matrix reg = g + ridge * Matrix::Identity(g.rows(), g.cols());
  m.K = reg.ldlt().solve(a).transpose();
  m.step = pairs.step;
  m.ridge = ridge;
  m.pairs = pairs.size();
  m.training_residual = relative_residual(psi_x, psi_y, m.K);
  m.spectrum = sorted_spectrum(m.K);
  return m;
}

struct EDMDDiagnosis {
  double holdout_residual = 0.0;
  double lift_injectivity_margin = std::numeric_limits<double>::infinity();
  double spectrum_on_unit_circle_fraction = 0.0;
  double max_unit_circle_deviation = 0.0;
  std::optional<PhaseEstimate> phase_divergence;  // attached when the catalog verdict is NotLinearizable
  std::optional<Vector> phase_probe_point;
  std::optional<std::string> label;               // "EXPECTED" with a phase certificate
  std::string explanation;
};

inline constexpr double kUnitCircleTol = 1e-6;

/// Holdout residual, lift injectivity, spectrum location, and for systems
/// known not to be linearizable the phase divergence certificate.
inline EDMDDiagnosis diagnose(const EDMDModel& model, const Dictionary& dict, const CatalogEntry& entry,
                              const SnapshotPairs& holdout,
                              const GeometricSchedule& schedule = GeometricSchedule{1.0, 2.0, 12}) {
  EDMDDiagnosis d;
  Matrix psi_x, psi_y;
  lift(dict, holdout.x, psi_x);
  lift(dict, holdout.y, psi_y);
  d.holdout_residual = relative_residual(psi_x, psi_y, model.K);

  const std::size_t n = holdout.size();
  std::vector<double> row_min(n, std::numeric_limits<double>::infinity());
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double ds = entry.distance(holdout.x[i], holdout.x[j]);
      if (!(ds > 1e-12)) continue;
      row_min[i] = std::min(row_min[i], (psi_x.row(static_cast<Eigen::Index>(i)) -
                                         psi_x.row(static_cast<Eigen::Index>(j))).norm() / ds);
    }
  });
  for (double r : row_min) d.lift_injectivity_margin = std::min(d.lift_injectivity_margin, r);

  std::size_t on_circle = 0;
  for (const auto& lam : model.spectrum) {
    const double dev = std::abs(std::abs(lam) - 1.0);
    d.max_unit_circle_deviation = std::max(d.max_unit_circle_deviation, dev);
    if (dev <= kUnitCircleTol) ++on_circle;
  }
  d.spectrum_on_unit_circle_fraction =
      model.spectrum.empty() ? 0.0 : static_cast<double>(on_circle) / static_cast<double>(model.spectrum.size());

  if (entry.expected_verdict.kind == VerdictKind::NotLinearizable) {
    d.label = "EXPECTED";
    d.explanation = "no finite-dimensional linearizing embedding exists: " + entry.expected_verdict.reason;
    if (entry.attractor) {
      const std::size_t probes = std::min<std::size_t>(n, 5);
      for (std::size_t i = 0; i < probes; ++i) {
        auto est = estimate_phase(entry.system, *entry.attractor, holdout.x[i], schedule);
        const bool diverged = est.classification == PhaseClass::Diverged;
        d.phase_divergence = std::move(est);
        d.phase_probe_point = holdout.x[i];
        if (diverged) break;
      }
    }
  }
  return d;
}

}  // namespace flowlin
