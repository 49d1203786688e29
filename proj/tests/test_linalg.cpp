#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "flowlin/linalg.hpp"
#include "oracles.hpp"

using namespace flowlin;

namespace {

Matrix random_matrix(std::mt19937_64& rng, int n, double norm) {
  std::normal_distribution<double> g;
  Matrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = g(rng);
  return m * (norm / m.norm());
}

double rel_err(const Matrix& a, const Matrix& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

}  // namespace

TEST(MatrixExp, ZeroGeneratorIsIdentity) {
  const LinearGenerator b(Matrix::Zero(2, 2));
  EXPECT_EQ(matrix_exp(b, 7.0), Matrix::Identity(2, 2));
}

TEST(MatrixExp, QuarterTurn) {
  const LinearGenerator b(rotation_block(1.0));
  Matrix want(2, 2);
  want << 0, -1, 1, 0;
  EXPECT_LT((matrix_exp(b, kPi / 2) - want).norm(), 1e-15);
}

TEST(MatrixExp, ScalarDecay) {
  const LinearGenerator b(-Matrix::Identity(2, 2));
  EXPECT_LT((matrix_exp(b, std::log(2.0)) - 0.5 * Matrix::Identity(2, 2)).norm(), 1e-15);
}

TEST(MatrixExp, TimeZeroIsExactIdentity) {
  std::mt19937_64 rng(3);
  const LinearGenerator b(random_matrix(rng, 4, 3.0));
  EXPECT_EQ(matrix_exp(b, 0.0), Matrix::Identity(4, 4));
}

TEST(MatrixExp, AgreesWithTaylorOracleAcrossNorms) {
  std::mt19937_64 rng(11);
  for (double norm : {1e-4, 1e-2, 0.2, 1.0, 3.0, 10.0, 25.0, 50.0}) {
    for (int n : {1, 2, 3, 5}) {
      // Skew-symmetric plus a small symmetric part keeps exp(Bt) well conditioned.
      Matrix m = random_matrix(rng, n, norm);
      m = 0.5 * (m - m.transpose()) + 0.01 * (m + m.transpose());
      const LinearGenerator b(m);
      const Matrix want = oracle::taylor_expm(m, 1.0);
      EXPECT_LT(rel_err(matrix_exp(b, 1.0), want), 1e-12) << "norm " << norm << " n " << n;
    }
  }
}

TEST(MatrixExp, NonNormalAgreesWithOracle) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix m = random_matrix(rng, 4, 2.0);
    EXPECT_LT(rel_err(matrix_exp(LinearGenerator(m), 1.3), oracle::taylor_expm(m, 1.3)), 1e-12);
  }
}

TEST(MatrixExp, GroupLaw) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> time(-10.0, 10.0);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix m = random_matrix(rng, 3, 5.0);
    m = 0.5 * (m - m.transpose());  // bounded propagators
    const LinearGenerator b(m);
    const double s = time(rng), t = time(rng);
    EXPECT_LT(rel_err(matrix_exp(b, s + t), matrix_exp(b, s) * matrix_exp(b, t)), 1e-10);
  }
}

TEST(MatrixExp, OverflowIsRangeError) {
  const LinearGenerator b(Matrix::Identity(2, 2));
  try {
    matrix_exp(b, 1e6);
    FAIL() << "expected RangeError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::RangeError);
  }
}

TEST(LinearGenerator, RejectsInvalidEntries) {
  EXPECT_THROW(LinearGenerator(Matrix(2, 3)), Error);
  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 0) = std::nan("");
  EXPECT_THROW(LinearGenerator{bad}, Error);
}

TEST(SpectralSplit, BlockDiagonal) {
  const LinearGenerator b(block_diagonal({rotation_block(1.0), -Matrix::Identity(1, 1)}));
  const auto s = spectral_split(b);
  Matrix p0 = Matrix::Zero(3, 3);
  p0(0, 0) = p0(1, 1) = 1.0;
  EXPECT_LT((s.center_projection - p0).norm(), 1e-12);
  EXPECT_LT((s.stable_projection - (Matrix::Identity(3, 3) - p0)).norm(), 1e-12);
  EXPECT_EQ(s.center_dim, 2);
  EXPECT_EQ(s.stable_dim, 1);
}

TEST(SpectralSplit, NilpotentCenterRejected) {
  Matrix j(2, 2);
  j << 0, 1, 0, 0;
  try {
    spectral_split(LinearGenerator(j));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NonSemisimpleCenter);
  }
  // A 2x2 Jordan block at eigenvalue +-i: the center is defective.
  try {
    spectral_split(LinearGenerator(oracle::jordan_rotation(1.5)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NonSemisimpleCenter);
  }
}

TEST(SpectralSplit, PositiveSpectrumRejected) {
  try {
    spectral_split(LinearGenerator(Matrix::Identity(1, 1)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::PositiveSpectrum);
  }
}

TEST(SpectralSplit, InvariantsUnderRandomSimilarity) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> rate(0.5, 3.0), decay(-3.0, -0.5);
  for (int trial = 0; trial < 25; ++trial) {
    const Matrix d = block_diagonal({rotation_block(rate(rng)), Matrix::Zero(1, 1),
                                     Matrix::Identity(1, 1) * decay(rng),
                                     rotation_block(rate(rng)) + decay(rng) * Matrix::Identity(2, 2)});
    Matrix s = random_matrix(rng, 6, 3.0) + 3.0 * Matrix::Identity(6, 6);
    const Matrix m = s * d * s.inverse();
    const LinearGenerator b(m);
    const auto split = spectral_split(b);
    const Matrix& p0 = split.center_projection;
    const Matrix& pm = split.stable_projection;
    EXPECT_EQ(split.center_dim, 3);
    EXPECT_EQ(split.stable_dim, 3);
    EXPECT_LT((p0 + pm - Matrix::Identity(6, 6)).norm(), 1e-10);
    EXPECT_LT((p0 * p0 - p0).norm(), 1e-10 * std::max(1.0, p0.norm()));
    EXPECT_LT((pm * pm - pm).norm(), 1e-10 * std::max(1.0, pm.norm()));
    EXPECT_LT((p0 * m - m * p0).norm(), 1e-10 * m.norm() * std::max(1.0, p0.norm()));
    const Matrix e = matrix_exp(b, 0.7);
    EXPECT_LT((e * p0 - p0 * e).norm(), 1e-9 * std::max(1.0, p0.norm()));

    // Stable directions decay.
    const Vector x = pm * Vector::Ones(6);
    EXPECT_LT((matrix_exp(b, 30.0) * x).norm(), 1e-4 * x.norm());
  }
}

TEST(RationalIndependence, SqrtTwoIndependent) {
  const auto r = rational_independence(Vector::Map(std::vector<double>{1.0, std::sqrt(2.0)}.data(), 2), 50, 1e-9);
  EXPECT_TRUE(r.independent);
  EXPECT_EQ(r.bound, 50);
}

TEST(RationalIndependence, RationalRatioDependent) {
  Vector w(2);
  w << 7.0, 3.0;
  const auto r = rational_independence(w, 10, 1e-9);
  ASSERT_FALSE(r.independent);
  EXPECT_EQ(r.relation, (std::vector<std::int64_t>{3, -7}));
}

TEST(RationalIndependence, SingleFrequency) {
  Vector w(1);
  w << 2.5;
  EXPECT_TRUE(rational_independence(w, 100, 1e-9).independent);
}

TEST(RationalIndependence, TooManyFrequencies) {
  try {
    rational_independence(Vector::Ones(5), 3, 1e-9);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DimensionTooLarge);
  }
}

TEST(RationalIndependence, AgreesWithShellOracleOnRationals) {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> num(-9, 9), den(1, 6), dim(2, 3);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = dim(rng);
    Vector w(n);
    for (int i = 0; i < n; ++i) w[i] = static_cast<double>(num(rng)) / den(rng);
    if (w.cwiseAbs().maxCoeff() == 0.0) continue;
    const int q = 8;
    const auto got = rational_independence(w, q, 1e-9);
    const auto want = oracle::integer_relation(w, q, 1e-9);
    ASSERT_EQ(got.independent, !want.has_value());
    if (want) {
      std::int64_t got_norm = 0, want_norm = 0;
      for (auto c : got.relation) got_norm = std::max<std::int64_t>(got_norm, std::abs(c));
      for (auto c : *want) want_norm = std::max<std::int64_t>(want_norm, std::abs(c));
      EXPECT_EQ(got_norm, want_norm);
      double dot = 0.0;
      for (int i = 0; i < n; ++i) dot += got.relation[i] * w[i];
      EXPECT_LT(std::abs(dot), 1e-9);
    }
  }
}

TEST(RationalIndependence, ThreeTermRelation) {
  Vector w(3);
  w << 1.0, std::sqrt(2.0), 1.0 + std::sqrt(2.0);
  const auto r = rational_independence(w, 5, 1e-9);
  ASSERT_FALSE(r.independent);
  EXPECT_EQ(r.relation, (std::vector<std::int64_t>{1, 1, -1}));
}
