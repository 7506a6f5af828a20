#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/LU>

#include "spcp/blocking.hpp"
#include "spcp/ktensor.hpp"
#include "spcp/mttkrp.hpp"
#include "spcp/sptensor.hpp"

namespace spcp {

namespace detail {

using RowMajorMatrix = Eigen::Matrix<real_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<const RowMajorMatrix> as_eigen(const FactorMatrix& A) {
  return {A.data().data(), static_cast<Eigen::Index>(A.rows()), static_cast<Eigen::Index>(A.cols())};
}

inline Eigen::Map<RowMajorMatrix> as_eigen(FactorMatrix& A) {
  return {A.data().data(), static_cast<Eigen::Index>(A.rows()), static_cast<Eigen::Index>(A.cols())};
}

// Solves (G + shift*I) Z = B for Z. Returns false if G is numerically singular.
inline bool solve_shifted(const FactorMatrix& G, const RowMajorMatrix& B, real_t shift, RowMajorMatrix& Z) {
  RowMajorMatrix S = as_eigen(G);
  S.diagonal().array() += shift;
  Eigen::LLT<RowMajorMatrix> llt(S);
  if (llt.info() == Eigen::Success) {
    Z = llt.solve(B);
    if (Z.allFinite()) return true;
  }
  Eigen::FullPivLU<RowMajorMatrix> lu(S);
  if (!lu.isInvertible()) return false;
  Z = lu.solve(B);
  return Z.allFinite();
}

}  // namespace detail

/// Solves (G + regularization*I) Z = B where G is R x R symmetric and B holds
/// right-hand sides as columns (R x I). Cholesky first, full-pivot LU if that
/// breaks down.
inline FactorMatrix solve_spd(const FactorMatrix& G, const FactorMatrix& B, real_t regularization = 0) {
  if (G.rows() != G.cols() || B.rows() != G.rows()) throw DimensionError("solve_spd: shape mismatch");
  detail::RowMajorMatrix Z;
  if (!detail::solve_shifted(G, detail::as_eigen(B), regularization, Z)) {
    throw NumericError("solve_spd: matrix is singular");
  }
  FactorMatrix out(B.rows(), B.cols());
  detail::as_eigen(out) = Z;
  return out;
}

struct AlsOptions {
  std::size_t rank = 16;
  std::size_t max_iters = 10;
  real_t fit_tolerance = 1e-4;  // stop once |fit - previous fit| falls below this
  Variant variant = Variant::blocked;
  std::size_t threads = 1;
  std::uint64_t seed = 1;
  real_t regularization = 0;  // diagonal shift added to every normal-equation matrix
  Profile profile = Profile::cpu_like;
  std::optional<std::size_t> nzptm;  // overrides the policy default when set

  void validate() const {
    if (rank < 1) throw Error("cp_als: rank must be at least 1");
    if (max_iters < 1) throw Error("cp_als: max_iters must be at least 1");
    if (!(fit_tolerance >= 0)) throw Error("cp_als: fit_tolerance must be non-negative");
    if (!(regularization >= 0)) throw Error("cp_als: regularization must be non-negative");
    if (nzptm && *nzptm == 0) throw Error("cp_als: nzptm must be positive");
  }
};

struct AlsTrace {
  std::vector<real_t> fits;                         // one per iteration
  std::vector<std::vector<double>> mttkrp_seconds;  // [iteration][mode]
  std::vector<double> solve_seconds;                // per iteration, all modes
  std::vector<double> iteration_seconds;
  double total_seconds = 0;
  double sort_seconds = 0;  // permutation build, permuted variant only
  std::uint64_t seed = 0;

  std::size_t iterations() const noexcept { return fits.size(); }

  double total_mttkrp_seconds() const {
    double s = 0;
    for (const auto& it : mttkrp_seconds) {
      for (double t : it) s += t;
    }
    return s;
  }
};

struct AlsResult {
  KTensor model;
  AlsTrace trace;
};

/// CP decomposition by alternating least squares.
///
/// Each mode update computes V = MTTKRP(X, M, n) with the weights set to one,
/// solves (Hadamard product of the other Gram matrices) A_n^T = V^T and folds
/// the new column norms of A_n into the weights. The fit is recorded after
/// every sweep over all modes. When the permuted variant is selected and no
/// permutation set is passed, one is built and its cost lands in sort_seconds.
inline AlsResult cp_als(const SparseTensor& X, const AlsOptions& opts, const PermutationSet* perms = nullptr) {
  using clock = std::chrono::steady_clock;
  auto seconds_since = [](clock::time_point t0) { return std::chrono::duration<double>(clock::now() - t0).count(); };

  opts.validate();
  const auto t_start = clock::now();
  const real_t x_norm = frobenius_norm(X);
  if (x_norm == 0) throw NumericError("cp_als: data tensor has zero norm");

  AlsResult out;
  AlsTrace& trace = out.trace;
  trace.seed = opts.seed;

  PermutationSet owned_perms;
  if (opts.variant == Variant::permuted && perms == nullptr) {
    const auto t0 = clock::now();
    owned_perms = build_perm(X, opts.threads);
    trace.sort_seconds = seconds_since(t0);
    perms = &owned_perms;
  }

  const std::size_t d = X.ndims();
  const std::size_t R = opts.rank;
  BlockingPolicy policy = blocking_policy(R, opts.profile, X.nnz());
  if (opts.nzptm) {
    policy.nzptm = *opts.nzptm;
    policy = policy.for_nnz(X.nnz());
  }

  KTensor& M = out.model;
  M = normalize_columns(random_ktensor(X.dims(), R, opts.seed)).model;

  std::vector<FactorMatrix> grams;
  for (const auto& A : M.factors) grams.push_back(gram(A));

  FactorMatrix V;
  real_t fit_prev = 0;
  for (std::size_t iter = 0; iter < opts.max_iters; ++iter) {
    const auto t_iter = clock::now();
    std::vector<double> mode_times(d, 0);
    double solve_time = 0;

    for (std::size_t n = 0; n < d; ++n) {
      std::fill(M.weights.begin(), M.weights.end(), real_t(1));

      const auto t_mttkrp = clock::now();
      mttkrp(X, M, n, opts.variant, policy, perms, opts.threads, V);
      mode_times[n] = seconds_since(t_mttkrp);

      const auto t_solve = clock::now();
      FactorMatrix H(R, R, real_t(1));
      for (std::size_t m = 0; m < d; ++m) {
        if (m == n) continue;
        for (std::size_t k = 0; k < R * R; ++k) H.data()[k] *= grams[m].data()[k];
      }
      detail::RowMajorMatrix Z;
      if (!detail::solve_shifted(H, detail::as_eigen(V).transpose(), opts.regularization, Z)) {
        throw NumericError("cp_als: singular normal equations in mode " + std::to_string(n) + " at iteration " +
                           std::to_string(iter + 1));
      }
      detail::as_eigen(M.factors[n]) = Z.transpose();
      normalize_mode(M, n);
      grams[n] = gram(M.factors[n]);
      solve_time += seconds_since(t_solve);
    }

    const real_t f = fit(X, M, opts.threads);
    trace.fits.push_back(f);
    trace.mttkrp_seconds.push_back(std::move(mode_times));
    trace.solve_seconds.push_back(solve_time);
    trace.iteration_seconds.push_back(seconds_since(t_iter));

    if (std::abs(f - fit_prev) < opts.fit_tolerance) break;
    fit_prev = f;
  }

  trace.total_seconds = seconds_since(t_start);
  return out;
}

}  // namespace spcp
