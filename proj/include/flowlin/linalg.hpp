#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "flowlin/errors.hpp"

namespace flowlin {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Real square matrix B generating the linear flow t -> exp(B t).
class LinearGenerator {
 public:
  LinearGenerator() : entries_(Matrix::Zero(1, 1)) {}

  explicit LinearGenerator(Matrix entries) : entries_(std::move(entries)) {
    if (entries_.rows() < 1 || entries_.rows() != entries_.cols()) {
      raise(Errc::InvalidArgument, "generator must be a non-empty square matrix");
    }
    if (!entries_.allFinite()) raise(Errc::InvalidArgument, "generator has non-finite entries");
  }

  Eigen::Index dim() const { return entries_.rows(); }
  const Matrix& matrix() const { return entries_; }

 private:
  Matrix entries_;
};

/// 2x2 infinitesimal rotation [[0,-rate],[rate,0]].
inline Matrix rotation_block(double rate) {
  Matrix r(2, 2);
  r << 0.0, -rate, rate, 0.0;
  return r;
}

inline Matrix block_diagonal(const std::vector<Matrix>& blocks) {
  Eigen::Index n = 0;
  for (const auto& b : blocks) n += b.rows();
  Matrix out = Matrix::Zero(n, n);
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    out.block(at, at, b.rows(), b.cols()) = b;
    at += b.rows();
  }
  return out;
}

namespace detail {

inline double one_norm(const Matrix& a) { return a.cwiseAbs().colwise().sum().maxCoeff(); }

// Pade coefficients for degrees 3, 5, 7, 9, 13 and the matching 1-norm
// thresholds below which no scaling is required (double precision).
inline constexpr std::array<double, 4> kPade3 = {120.0, 60.0, 12.0, 1.0};
inline constexpr std::array<double, 6> kPade5 = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
inline constexpr std::array<double, 8> kPade7 = {17297280.0, 8648640.0, 1995840.0, 277200.0,
                                                 25200.0,    1512.0,    56.0,      1.0};
inline constexpr std::array<double, 10> kPade9 = {17643225600.0, 8821612800.0, 2075673600.0,
                                                  302702400.0,   30270240.0,   2162160.0,
                                                  110880.0,      3960.0,       90.0,
                                                  1.0};
inline constexpr std::array<double, 14> kPade13 = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
    129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
    1323241920.0,        40840800.0,          960960.0,           16380.0,
    182.0,               1.0};
inline constexpr std::array<double, 4> kTheta = {1.495585217958292e-2, 2.539398330063230e-1,
                                                 9.504178996162932e-1, 2.097847961257068e0};
inline constexpr double kTheta13 = 5.371920351148152;

template <std::size_t N>
Matrix pade_low(const Matrix& a, const std::array<double, N>& b) {
  const auto n = a.rows();
  const Matrix id = Matrix::Identity(n, n);
  const Matrix a2 = a * a;
  Matrix even_power = id;
  Matrix u_inner = b[1] * id;
  Matrix v = b[0] * id;
  for (std::size_t k = 2; k < N; k += 2) {
    even_power = even_power * a2;
    u_inner += b[k + 1] * even_power;
    v += b[k] * even_power;
  }
  const Matrix u = a * u_inner;
  return (v - u).partialPivLu().solve(v + u);
}

inline Matrix pade13(const Matrix& a) {
  const auto& b = kPade13;
  const auto n = a.rows();
  const Matrix id = Matrix::Identity(n, n);
  const Matrix a2 = a * a;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a4 * a2;
  const Matrix u_inner = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 +
                         b[3] * a2 + b[1] * id;
  const Matrix u = a * u_inner;
  const Matrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 +
                   b[2] * a2 + b[0] * id;
  return (v - u).partialPivLu().solve(v + u);
}

}  // namespace detail

/// exp(B t) by scaling and squaring with a degree-13 (or lower) Pade approximant.
inline Matrix matrix_exp(const LinearGenerator& gen, double t) {
  if (!std::isfinite(t)) raise(Errc::InvalidArgument, "time must be finite");
  const auto n = gen.dim();
  if (t == 0.0) return Matrix::Identity(n, n);
  const Matrix a = gen.matrix() * t;
  const double norm = detail::one_norm(a);
  if (!std::isfinite(norm)) raise(Errc::RangeError, "norm(B t) is not representable");
  if (norm <= detail::kTheta[0]) return detail::pade_low(a, detail::kPade3);
  if (norm <= detail::kTheta[1]) return detail::pade_low(a, detail::kPade5);
  if (norm <= detail::kTheta[2]) return detail::pade_low(a, detail::kPade7);
  if (norm <= detail::kTheta[3]) return detail::pade_low(a, detail::kPade9);

  int squarings = 0;
  if (norm > detail::kTheta13) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / detail::kTheta13)));
  }
  if (squarings > 1000) raise(Errc::RangeError, "norm(B t) too large for matrix_exp");
  Matrix result = detail::pade13(std::ldexp(1.0, -squarings) * a);
  for (int k = 0; k < squarings; ++k) result = result * result;
  if (!result.allFinite()) raise(Errc::RangeError, "exp(B t) overflows double precision");
  return result;
}

/// Complementary spectral projectors onto the center (|Re| <= tol) and
/// stable (Re < -tol) invariant subspaces of a generator.
struct SpectralSplit {
  Matrix center_projection;
  Matrix stable_projection;
  int center_dim = 0;
  int stable_dim = 0;
  double eigen_tolerance = 1e-9;
};

namespace detail {

// Swap diagonal entries k and k+1 of an upper-triangular complex Schur form.
inline void swap_schur_pair(ComplexMatrix& t, ComplexMatrix& u, Eigen::Index k) {
  using C = std::complex<double>;
  const C a = t(k, k);
  const C c = t(k + 1, k + 1);
  const C b = t(k, k + 1);
  C v0 = b;
  C v1 = c - a;
  const double len = std::hypot(std::abs(v0), std::abs(v1));
  if (len == 0.0) return;
  v0 /= len;
  v1 /= len;
  Eigen::Matrix2cd g;
  g << v0, -std::conj(v1), v1, std::conj(v0);
  t.middleRows(k, 2) = g.adjoint() * t.middleRows(k, 2);
  t.middleCols(k, 2) = t.middleCols(k, 2) * g;
  u.middleCols(k, 2) = u.middleCols(k, 2) * g;
  t(k + 1, k) = 0.0;
}

}  // namespace detail

/// Split B into center and stable parts via an ordered complex Schur form.
inline SpectralSplit spectral_split(const LinearGenerator& gen, double eigen_tolerance = 1e-9) {
  const auto n = gen.dim();
  Eigen::ComplexSchur<ComplexMatrix> schur(gen.matrix().cast<std::complex<double>>());
  ComplexMatrix t = schur.matrixT();
  ComplexMatrix u = schur.matrixU();

  for (Eigen::Index i = 0; i < n; ++i) {
    if (t(i, i).real() > eigen_tolerance) {
      raise(Errc::PositiveSpectrum, "eigenvalue with real part " + std::to_string(t(i, i).real()));
    }
  }
  auto is_center = [&](Eigen::Index i) { return std::abs(t(i, i).real()) <= eigen_tolerance; };

  // Bubble center eigenvalues to the leading block.
  for (Eigen::Index pass = 0; pass < n; ++pass) {
    bool moved = false;
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
      if (!is_center(k) && is_center(k + 1)) {
        detail::swap_schur_pair(t, u, k);
        moved = true;
      }
    }
    if (!moved) break;
  }
  Eigen::Index nc = 0;
  while (nc < n && is_center(nc)) ++nc;
  const Eigen::Index ns = n - nc;

  // Semisimplicity: each center eigenvalue cluster must have a full eigenspace.
  constexpr double kClusterTol = 1e-6;
  constexpr double kRankTol = 1e-8;
  if (nc > 0) {
    const ComplexMatrix t11 = t.topLeftCorner(nc, nc);
    std::vector<bool> seen(static_cast<std::size_t>(nc), false);
    for (Eigen::Index i = 0; i < nc; ++i) {
      if (seen[static_cast<std::size_t>(i)]) continue;
      std::complex<double> lambda = t11(i, i);
      int multiplicity = 0;
      for (Eigen::Index j = i; j < nc; ++j) {
        if (std::abs(t11(j, j) - lambda) <= kClusterTol) {
          seen[static_cast<std::size_t>(j)] = true;
          ++multiplicity;
        }
      }
      const ComplexMatrix shifted = t11 - lambda * ComplexMatrix::Identity(nc, nc);
      Eigen::JacobiSVD<ComplexMatrix> svd(shifted);
      const auto& sv = svd.singularValues();
      int nullity = 0;
      for (Eigen::Index j = 0; j < sv.size(); ++j) {
        if (sv(j) <= kRankTol) ++nullity;
      }
      if (nullity < multiplicity) {
        raise(Errc::NonSemisimpleCenter,
              "center eigenvalue has algebraic multiplicity " + std::to_string(multiplicity) +
                  " but geometric multiplicity " + std::to_string(nullity));
      }
    }
  }

  // Solve T11 Y - Y T22 = -T12 column by column; then P0 = U [I -Y; 0 0] U^*.
  ComplexMatrix proj = ComplexMatrix::Zero(n, n);
  proj.topLeftCorner(nc, nc).setIdentity();
  if (nc > 0 && ns > 0) {
    const ComplexMatrix t11 = t.topLeftCorner(nc, nc);
    const ComplexMatrix t12 = t.topRightCorner(nc, ns);
    const ComplexMatrix t22 = t.bottomRightCorner(ns, ns);
    ComplexMatrix y(nc, ns);
    for (Eigen::Index j = 0; j < ns; ++j) {
      Eigen::VectorXcd rhs = -t12.col(j);
      for (Eigen::Index l = 0; l < j; ++l) rhs += y.col(l) * t22(l, j);
      const ComplexMatrix shifted = t11 - t22(j, j) * ComplexMatrix::Identity(nc, nc);
      y.col(j) = shifted.triangularView<Eigen::Upper>().solve(rhs);
    }
    proj.topRightCorner(nc, ns) = -y;
  }
  SpectralSplit split;
  split.center_projection = (u * proj * u.adjoint()).real();
  split.stable_projection = Matrix::Identity(n, n) - split.center_projection;
  split.center_dim = static_cast<int>(nc);
  split.stable_dim = static_cast<int>(ns);
  split.eigen_tolerance = eigen_tolerance;
  return split;
}

/// Outcome of a bounded integer-relation search over a frequency vector.
struct RationalIndependence {
  bool independent = true;
  int bound = 0;
  std::vector<std::int64_t> relation;  // populated when dependent
  double residual = 0.0;               // |k . omega| for the reported relation
};

inline constexpr std::size_t kMaxRelationDim = 4;

/// Exhaustive search for k in [-Q,Q]^n \ {0} with |k . omega| < tol.
/// Reports the relation of smallest max-norm (first nonzero entry positive).
inline RationalIndependence rational_independence(const Vector& omega, int max_coeff, double tol) {
  const auto n = static_cast<std::size_t>(omega.size());
  if (n == 0) raise(Errc::InvalidArgument, "empty frequency vector");
  if (n > kMaxRelationDim) {
    raise(Errc::DimensionTooLarge, "exhaustive relation search supports at most 4 frequencies");
  }
  if (max_coeff < 1) raise(Errc::InvalidArgument, "coefficient bound must be >= 1");
  if (!omega.allFinite()) raise(Errc::InvalidArgument, "frequency vector has non-finite entries");

  RationalIndependence out;
  out.bound = max_coeff;
  std::vector<std::int64_t> k(n, -max_coeff);
  std::int64_t best_norm = std::numeric_limits<std::int64_t>::max();
  for (;;) {
    std::int64_t norm = 0;
    std::int64_t first = 0;
    for (auto c : k) {
      norm = std::max<std::int64_t>(norm, c < 0 ? -c : c);
      if (first == 0) first = c;
    }
    if (first > 0 && norm < best_norm) {
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += static_cast<double>(k[i]) * omega[static_cast<Eigen::Index>(i)];
      if (std::abs(dot) < tol) {
        best_norm = norm;
        out.independent = false;
        out.relation = k;
        out.residual = std::abs(dot);
      }
    }
    std::size_t pos = n;
    while (pos > 0) {
      --pos;
      if (k[pos] < max_coeff) {
        ++k[pos];
        break;
      }
      k[pos] = -max_coeff;
      if (pos == 0) return out;
    }
  }
}

}  // namespace flowlin
