#include <gtest/gtest.h>

#include <random>

#include <Eigen/QR>

#include "spcp/cp_als.hpp"
#include "spcp/oracle.hpp"
#include "test_util.hpp"

using namespace spcp;
using spcp::testutil::close;

namespace {

FactorMatrix identity(std::size_t n, real_t scale = 1) {
  FactorMatrix I(n, n);
  for (std::size_t i = 0; i < n; ++i) I(i, i) = scale;
  return I;
}

SparseTensor dense_low_rank(std::vector<ordinal_t> dims, std::size_t rank, std::uint64_t seed) {
  return oracle::to_sparse_all(oracle::reconstruct(random_ktensor(dims, rank, seed)));
}

void expect_unit_columns(const KTensor& M) {
  for (const auto& A : M.factors) {
    for (std::size_t j = 0; j < A.cols(); ++j) {
      double s = 0;
      for (std::size_t i = 0; i < A.rows(); ++i) s += A(i, j) * A(i, j);
      EXPECT_NEAR(std::sqrt(s), 1.0, 1e-12);
    }
  }
}

}  // namespace

TEST(SolveSpd, IdentityAndScaledIdentity) {
  FactorMatrix B(3, 4);
  for (std::size_t k = 0; k < 12; ++k) B.data()[k] = static_cast<real_t>(k) - 5;
  EXPECT_EQ(solve_spd(identity(3), B), B);

  FactorMatrix ones(3, 4, 1.0);
  const auto Z = solve_spd(identity(3, 2), ones);
  for (real_t z : Z.data()) EXPECT_DOUBLE_EQ(z, 0.5);
}

TEST(SolveSpd, ConstructedSolution) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (std::size_t R : {2, 5, 16, 40}) {
    Eigen::MatrixXd A(R, R);
    for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = u(rng);
    const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(A).householderQ();
    Eigen::VectorXd D(R);
    for (std::size_t i = 0; i < R; ++i) D[i] = 1.0 + 9.0 * static_cast<double>(i) / static_cast<double>(R);
    const Eigen::MatrixXd G = Q.transpose() * D.asDiagonal() * Q;

    FactorMatrix Gm(R, R), Zt(R, 7), B(R, 7);
    for (std::size_t i = 0; i < R; ++i) {
      for (std::size_t j = 0; j < R; ++j) Gm(i, j) = G(i, j);
      for (std::size_t c = 0; c < 7; ++c) Zt(i, c) = u(rng);
    }
    for (std::size_t i = 0; i < R; ++i) {
      for (std::size_t c = 0; c < 7; ++c) {
        double s = 0;
        for (std::size_t k = 0; k < R; ++k) s += Gm(i, k) * Zt(k, c);
        B(i, c) = s;
      }
    }
    const auto Z = solve_spd(Gm, B);
    double err = 0, ref = 0;
    for (std::size_t k = 0; k < Z.data().size(); ++k) {
      err += (Z.data()[k] - Zt.data()[k]) * (Z.data()[k] - Zt.data()[k]);
      ref += Zt.data()[k] * Zt.data()[k];
    }
    EXPECT_LT(std::sqrt(err / ref), 1e-9) << "R=" << R;
  }
}

TEST(SolveSpd, IndefiniteFallsBackToLu) {
  FactorMatrix G(2, 2);
  G(0, 1) = G(1, 0) = 1;  // eigenvalues +1, -1
  FactorMatrix B(2, 1);
  B(0, 0) = 3;
  B(1, 0) = 4;
  const auto Z = solve_spd(G, B);
  EXPECT_NEAR(Z(0, 0), 4.0, 1e-14);
  EXPECT_NEAR(Z(1, 0), 3.0, 1e-14);
}

TEST(SolveSpd, SingularAndRegularized) {
  FactorMatrix zero(3, 3);
  FactorMatrix B(3, 2, 1.0);
  EXPECT_THROW(solve_spd(zero, B), NumericError);
  const auto Z = solve_spd(zero, B, 4.0);
  for (real_t z : Z.data()) EXPECT_EQ(z, 0.25);
  EXPECT_THROW(solve_spd(zero, FactorMatrix(2, 2)), DimensionError);
}

TEST(CpAls, RankOneRecovery) {
  const auto X = dense_low_rank({5, 6, 7}, 1, 11);
  AlsOptions opts;
  opts.rank = 1;
  opts.max_iters = 50;
  opts.fit_tolerance = 0;
  const auto r = cp_als(X, opts);
  EXPECT_GE(r.trace.fits.back(), 0.999);
  // Dense oracle agrees with the reported fit.
  const auto DX = oracle::densify(X);
  const auto DM = oracle::reconstruct(r.model);
  double r2 = 0;
  for (std::size_t k = 0; k < DX.numel(); ++k) r2 += std::pow(DX.data()[k] - DM.data()[k], 2);
  EXPECT_NEAR(1 - std::sqrt(r2 / DX.frobenius_norm_squared()), r.trace.fits.back(), 1e-6);
}

TEST(CpAls, SingleIterationTrace) {
  const auto X = random_sparse({10, 10, 10}, 200, 1);
  AlsOptions opts;
  opts.rank = 3;
  opts.max_iters = 1;
  const auto r = cp_als(X, opts);
  EXPECT_EQ(r.trace.fits.size(), 1u);
  EXPECT_EQ(r.trace.mttkrp_seconds.size(), 1u);
  EXPECT_EQ(r.trace.mttkrp_seconds[0].size(), 3u);
  EXPECT_EQ(r.trace.solve_seconds.size(), 1u);
  EXPECT_EQ(r.trace.seed, opts.seed);
}

TEST(CpAls, RankFourRecoveryMonotone) {
  const auto X = dense_low_rank({10, 11, 12}, 4, 5);
  AlsOptions opts;
  opts.rank = 4;
  opts.max_iters = 100;
  opts.fit_tolerance = 0;
  opts.seed = 2;
  const auto r = cp_als(X, opts);
  EXPECT_GE(r.trace.fits.back(), 0.99);
  const double xn = frobenius_norm(X);
  for (std::size_t k = 1; k < r.trace.fits.size(); ++k) {
    const double prev = (1 - r.trace.fits[k - 1]) * xn;
    const double cur = (1 - r.trace.fits[k]) * xn;
    EXPECT_LE(cur, prev * (1 + 1e-8) + 1e-12) << "iteration " << k;
  }
  expect_unit_columns(r.model);
}

TEST(CpAls, VariantIndependence) {
  const auto X = random_sparse({30, 20, 25}, 2000, 7);
  AlsOptions opts;
  opts.rank = 6;
  opts.max_iters = 8;
  opts.fit_tolerance = 0;
  std::vector<real_t> fits;
  for (auto v : {Variant::atomic, Variant::blocked, Variant::permuted}) {
    opts.variant = v;
    const auto r = cp_als(X, opts);
    fits.push_back(r.trace.fits.back());
    expect_unit_columns(r.model);
    if (v == Variant::permuted) {
      EXPECT_GT(r.trace.sort_seconds, 0.0);
    }
  }
  EXPECT_NEAR(fits[0], fits[1], 1e-6);
  EXPECT_NEAR(fits[0], fits[2], 1e-6);
}

TEST(CpAls, TraceAccounting) {
  const auto X = random_sparse({40, 40, 40}, 5000, 3);
  AlsOptions opts;
  opts.rank = 8;
  opts.max_iters = 5;
  opts.fit_tolerance = 0;
  opts.threads = 2;
  const auto r = cp_als(X, opts);
  EXPECT_EQ(r.trace.iterations(), 5u);
  EXPECT_LE(r.trace.total_mttkrp_seconds(), r.trace.total_seconds);
}

TEST(CpAls, StopsOnFitTolerance) {
  const auto X = dense_low_rank({6, 6, 6}, 1, 4);
  AlsOptions opts;
  opts.rank = 1;
  opts.max_iters = 200;
  opts.fit_tolerance = 1e-6;
  const auto r = cp_als(X, opts);
  EXPECT_LT(r.trace.iterations(), 200u);
}

TEST(CpAls, SingularNormalEquationsNameModeAndIteration) {
  // A single nonzero makes every factor rank one, so with R=2 the Gram
  // Hadamard product is singular once the first mode has been updated.
  const auto X = from_coo({3, 3, 3}, {0, 0, 0}, {1.0});
  AlsOptions opts;
  opts.rank = 2;
  opts.max_iters = 3;
  try {
    cp_als(X, opts);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("mode"), std::string::npos);
    EXPECT_NE(msg.find("iteration"), std::string::npos);
  }
  opts.regularization = 1e-9;
  EXPECT_NO_THROW(cp_als(X, opts));
}

TEST(CpAls, InvalidInputs) {
  const auto X = random_sparse({5, 5}, 5, 1);
  AlsOptions opts;
  opts.rank = 0;
  EXPECT_THROW(cp_als(X, opts), Error);
  opts.rank = 2;
  opts.max_iters = 0;
  EXPECT_THROW(cp_als(X, opts), Error);
  opts.max_iters = 1;
  EXPECT_THROW(cp_als(from_coo({5, 5}, {}, {}), opts), NumericError);
}
