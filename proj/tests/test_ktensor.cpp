#include <gtest/gtest.h>

#include <random>

#include "spcp/ktensor.hpp"
#include "spcp/oracle.hpp"
#include "test_util.hpp"

using namespace spcp;
using spcp::testutil::close;

namespace {

std::vector<ordinal_t> random_index(std::mt19937_64& rng, std::span<const ordinal_t> dims) {
  std::vector<ordinal_t> idx;
  for (auto n : dims) idx.push_back(rng() % n);
  return idx;
}

}  // namespace

TEST(RandomKtensor, ShapesAndWeights) {
  const std::vector<ordinal_t> dims{2, 3};
  const auto M = random_ktensor(dims, 1, 4);
  ASSERT_EQ(M.factors.size(), 2u);
  EXPECT_EQ(M.factors[0].rows(), 2u);
  EXPECT_EQ(M.factors[1].rows(), 3u);
  EXPECT_EQ(M.factors[0].cols(), 1u);
  EXPECT_EQ(M.weights, std::vector<real_t>{1});
  EXPECT_EQ(M, random_ktensor(dims, 1, 4));
  EXPECT_THROW(random_ktensor(dims, 0, 4), DimensionError);
}

TEST(RandomKtensor, EntriesInUnitInterval) {
  const std::vector<ordinal_t> dims{100, 100};
  const auto M = random_ktensor(dims, 50, 12);
  for (const auto& A : M.factors) {
    for (real_t a : A.data()) {
      ASSERT_GE(a, 0.0);
      ASSERT_LT(a, 1.0);
    }
  }
}

TEST(Entry, ConstantFactors) {
  const std::vector<ordinal_t> dims{3, 4, 5};
  KTensor M = random_ktensor(dims, 2, 1);
  for (auto& A : M.factors) A.fill(1);
  M.weights = {2, 3};
  const std::vector<ordinal_t> idx{2, 1, 4};
  EXPECT_EQ(entry(M, idx), 5.0);
}

TEST(Entry, SingleProduct) {
  KTensor M;
  M.weights = {1};
  M.factors.emplace_back(2, 1);
  M.factors.emplace_back(2, 1);
  M.factors[0](0, 0) = 1;
  M.factors[0](1, 0) = 2;
  M.factors[1](0, 0) = 3;
  M.factors[1](1, 0) = 4;
  const std::vector<ordinal_t> idx{1, 1};
  EXPECT_EQ(entry(M, idx), 8.0);
  const std::vector<ordinal_t> bad{2, 0};
  EXPECT_THROW(entry(M, bad), DimensionError);
}

TEST(Entry, AgainstDenseReconstruction) {
  const std::vector<ordinal_t> dims{7, 8, 9};
  const auto M = testutil::random_weighted_ktensor(dims, 5, 3);
  const auto D = oracle::reconstruct(M);
  std::mt19937_64 rng(1);
  for (int k = 0; k < 100; ++k) {
    const auto idx = random_index(rng, dims);
    EXPECT_TRUE(close(entry(M, idx), D[idx], 1e-12));
  }
}

TEST(Normalize, SimpleColumn) {
  KTensor M;
  M.weights = {1};
  M.factors.emplace_back(2, 1);
  M.factors[0](0, 0) = 3;
  M.factors[0](1, 0) = 4;
  const auto r = normalize_columns(M);
  EXPECT_TRUE(close(r.model.factors[0](0, 0), 0.6, 1e-15));
  EXPECT_TRUE(close(r.model.factors[0](1, 0), 0.8, 1e-15));
  EXPECT_TRUE(close(r.model.weights[0], 5.0, 1e-15));
  EXPECT_TRUE(r.zero_columns.empty());
}

TEST(Normalize, Idempotent) {
  const std::vector<ordinal_t> dims{6, 5, 4};
  const auto once = normalize_columns(testutil::random_weighted_ktensor(dims, 4, 9)).model;
  const auto twice = normalize_columns(once).model;
  for (std::size_t j = 0; j < 4; ++j) EXPECT_TRUE(close(once.weights[j], twice.weights[j], 1e-15));
  for (std::size_t n = 0; n < 3; ++n) {
    for (std::size_t k = 0; k < once.factors[n].data().size(); ++k) {
      EXPECT_TRUE(close(once.factors[n].data()[k], twice.factors[n].data()[k], 1e-15, 1e-15));
    }
  }
}

TEST(Normalize, PreservesEntriesAndYieldsUnitColumns) {
  const std::vector<ordinal_t> dims{9, 10, 11, 3};
  const auto M = testutil::random_weighted_ktensor(dims, 6, 17);
  const auto N = normalize_columns(M).model;
  std::mt19937_64 rng(2);
  for (int k = 0; k < 20; ++k) {
    const auto idx = random_index(rng, dims);
    EXPECT_TRUE(close(entry(M, idx), entry(N, idx), 1e-12));
  }
  for (const auto& A : N.factors) {
    for (std::size_t j = 0; j < A.cols(); ++j) {
      double s = 0;
      for (std::size_t i = 0; i < A.rows(); ++i) s += A(i, j) * A(i, j);
      EXPECT_NEAR(std::sqrt(s), 1.0, 1e-14);
    }
  }
}

TEST(Normalize, ZeroColumnFlagged) {
  const std::vector<ordinal_t> dims{3, 4};
  KTensor M = random_ktensor(dims, 2, 5);
  for (std::size_t i = 0; i < 4; ++i) M.factors[1](i, 1) = 0;
  const auto r = normalize_columns(M);
  ASSERT_EQ(r.zero_columns.size(), 1u);
  EXPECT_EQ(r.zero_columns[0].mode, 1u);
  EXPECT_EQ(r.zero_columns[0].column, 1u);
  EXPECT_EQ(r.model.weights[1], 0.0);
  EXPECT_EQ(r.model.factors[1](0, 1), 1.0);
  EXPECT_EQ(r.model.factors[1](3, 1), 0.0);
}

TEST(Gram, IdentityAndSingleColumn) {
  FactorMatrix I(2, 2);
  I(0, 0) = I(1, 1) = 1;
  EXPECT_EQ(gram(I), I);

  FactorMatrix c(3, 1);
  c(0, 0) = 1;
  c(1, 0) = 2;
  c(2, 0) = 2;
  const auto G = gram(c);
  ASSERT_EQ(G.rows(), 1u);
  EXPECT_EQ(G(0, 0), 9.0);
}

TEST(Gram, SymmetricAndMatchesTripleLoop) {
  const std::vector<ordinal_t> dims{50};
  const auto A = random_ktensor(dims, 8, 6).factors[0];
  const auto G = gram(A);
  for (std::size_t p = 0; p < 8; ++p) {
    for (std::size_t q = 0; q < 8; ++q) {
      EXPECT_EQ(G(p, q), G(q, p));
      double s = 0;
      for (std::size_t i = 0; i < 50; ++i) s += A(i, p) * A(i, q);
      EXPECT_TRUE(close(G(p, q), s, 1e-13));
    }
  }
}

TEST(NormSquared, RankOneAndZeroWeights) {
  const std::vector<ordinal_t> dims{4, 5, 6};
  KTensor M = random_ktensor(dims, 1, 8);
  M.weights = {3};
  double expect = 9;
  for (const auto& A : M.factors) expect *= gram(A)(0, 0);
  EXPECT_TRUE(close(norm_squared(M), expect, 1e-14));
  M.weights = {0};
  EXPECT_EQ(norm_squared(M), 0.0);
}

TEST(NormSquared, AgainstDenseReconstruction) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const std::vector<ordinal_t> dims{1 + rng() % 10, 1 + rng() % 10, 1 + rng() % 10, 1 + rng() % 10};
    const auto M = testutil::random_weighted_ktensor(dims, 1 + rng() % 6, rng());
    EXPECT_TRUE(close(norm_squared(M), oracle::reconstruct(M).frobenius_norm_squared(), 1e-10));
  }
}

TEST(InnerProduct, SmallCases) {
  const std::vector<ordinal_t> dims{3, 4};
  KTensor M = random_ktensor(dims, 1, 1);
  EXPECT_EQ(inner_product(from_coo({3, 4}, {}, {}), M), 0.0);

  M.weights = {5};
  M.factors[0].fill(1);
  M.factors[1].fill(1);
  EXPECT_EQ(inner_product(from_coo({3, 4}, {2, 3}, {2.0}), M), 10.0);
  EXPECT_THROW(inner_product(from_coo({3, 5}, {}, {}), M), DimensionError);
}

TEST(InnerProduct, AgainstDenseAndThreadIndependent) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto X = testutil::random_small_tensor(rng, 3, 15, 1500);
    const auto M = testutil::random_weighted_ktensor(X.dims(), 4, rng());
    const auto DX = oracle::densify(X);
    const auto DM = oracle::reconstruct(M);
    double expect = 0;
    for (std::size_t k = 0; k < DX.numel(); ++k) expect += DX.data()[k] * DM.data()[k];
    const real_t one = inner_product(X, M, 1);
    EXPECT_TRUE(close(one, expect, 1e-10));
    EXPECT_EQ(one, inner_product(X, M, 4));
  }
}

TEST(Fit, PerfectAndZeroModels) {
  const std::vector<ordinal_t> dims{4, 5, 3};
  const auto M = testutil::random_weighted_ktensor(dims, 3, 2);
  const auto X = oracle::to_sparse_all(oracle::reconstruct(M));
  EXPECT_NEAR(fit(X, M), 1.0, 1e-7);

  KTensor Z = M;
  std::fill(Z.weights.begin(), Z.weights.end(), 0);
  EXPECT_NEAR(fit(X, Z), 0.0, 1e-15);

  EXPECT_THROW(fit(from_coo({4, 5, 3}, {}, {}), M), NumericError);
}

TEST(Fit, AgainstDenseResidual) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const auto X = testutil::random_small_tensor(rng, 3, 10, 300);
    const auto M = testutil::random_weighted_ktensor(X.dims(), 3, rng());
    const auto DX = oracle::densify(X);
    const auto DM = oracle::reconstruct(M);
    double r2 = 0;
    for (std::size_t k = 0; k < DX.numel(); ++k) r2 += (DX.data()[k] - DM.data()[k]) * (DX.data()[k] - DM.data()[k]);
    const double expect = 1 - std::sqrt(r2) / std::sqrt(DX.frobenius_norm_squared());
    EXPECT_NEAR(fit(X, M), expect, 1e-8);
    EXPECT_LE(fit(X, M), 1.0);
  }
}
