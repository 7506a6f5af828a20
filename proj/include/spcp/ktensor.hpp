#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "spcp/config.hpp"
#include "spcp/sptensor.hpp"
#include "spcp/thread_pool.hpp"

namespace spcp {

/// Dense row-major matrix. Used for the factor matrices and MTTKRP output.
class FactorMatrix {
 public:
  FactorMatrix() = default;
  FactorMatrix(std::size_t rows, std::size_t cols, real_t fill = 0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  real_t& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  real_t operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  real_t* row(std::size_t i) noexcept { return data_.data() + i * cols_; }
  const real_t* row(std::size_t i) const noexcept { return data_.data() + i * cols_; }

  std::span<real_t> data() noexcept { return data_; }
  std::span<const real_t> data() const noexcept { return data_; }

  void fill(real_t v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const FactorMatrix&, const FactorMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<real_t> data_;
};

/// Kruskal tensor: sum over j of weights[j] times the outer product of
/// column j of every factor matrix.
struct KTensor {
  std::vector<real_t> weights;
  std::vector<FactorMatrix> factors;

  std::size_t ndims() const noexcept { return factors.size(); }
  std::size_t ncomponents() const noexcept { return weights.size(); }

  std::vector<ordinal_t> dims() const {
    std::vector<ordinal_t> out;
    for (const auto& A : factors) out.push_back(static_cast<ordinal_t>(A.rows()));
    return out;
  }

  /// Throws DimensionError unless every factor has ncomponents() columns.
  void check_consistent() const {
    for (std::size_t n = 0; n < factors.size(); ++n) {
      if (factors[n].cols() != weights.size()) {
        throw DimensionError("ktensor: factor " + std::to_string(n) + " has " + std::to_string(factors[n].cols()) +
                             " columns, expected " + std::to_string(weights.size()));
      }
    }
  }

  friend bool operator==(const KTensor&, const KTensor&) = default;
};

inline KTensor random_ktensor(std::span<const ordinal_t> dims, std::size_t rank, std::uint64_t seed) {
  if (rank == 0) throw DimensionError("random_ktensor: rank must be at least 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  KTensor M;
  M.weights.assign(rank, real_t(1));
  for (auto n : dims) {
    FactorMatrix A(n, rank);
    for (auto& a : A.data()) a = static_cast<real_t>(unit(rng));
    M.factors.push_back(std::move(A));
  }
  return M;
}

/// Model value at one multi-index.
inline real_t entry(const KTensor& M, std::span<const ordinal_t> index) {
  if (index.size() != M.ndims()) throw DimensionError("entry: index has wrong number of modes");
  for (std::size_t m = 0; m < index.size(); ++m) {
    if (index[m] >= M.factors[m].rows()) {
      throw DimensionError("entry: index " + std::to_string(index[m]) + " out of range in mode " + std::to_string(m));
    }
  }
  real_t sum = 0;
  for (std::size_t j = 0; j < M.ncomponents(); ++j) {
    real_t prod = M.weights[j];
    for (std::size_t m = 0; m < index.size(); ++m) prod *= M.factors[m](index[m], j);
    sum += prod;
  }
  return sum;
}

struct ZeroColumn {
  std::size_t mode;
  std::size_t column;
};

struct NormalizeResult {
  KTensor model;
  std::vector<ZeroColumn> zero_columns;
};

/// Scales one factor's columns to unit 2-norm, folding the norms into the
/// weights. An all-zero column zeroes its weight and is replaced by e_1.
inline std::vector<ZeroColumn> normalize_mode(KTensor& M, std::size_t mode) {
  FactorMatrix& A = M.factors.at(mode);
  const std::size_t R = A.cols();
  std::vector<real_t> norms(R, 0);
  for (std::size_t i = 0; i < A.rows(); ++i) {
    const real_t* a = A.row(i);
    for (std::size_t j = 0; j < R; ++j) norms[j] += a[j] * a[j];
  }
  std::vector<ZeroColumn> zeroed;
  for (std::size_t j = 0; j < R; ++j) {
    norms[j] = std::sqrt(norms[j]);
    if (norms[j] == 0) {
      M.weights[j] = 0;
      for (std::size_t i = 0; i < A.rows(); ++i) A(i, j) = (i == 0) ? real_t(1) : real_t(0);
      zeroed.push_back({mode, j});
      continue;
    }
    M.weights[j] *= norms[j];
  }
  for (std::size_t i = 0; i < A.rows(); ++i) {
    real_t* a = A.row(i);
    for (std::size_t j = 0; j < R; ++j) {
      if (norms[j] != 0) a[j] /= norms[j];
    }
  }
  return zeroed;
}

inline NormalizeResult normalize_columns(KTensor M) {
  M.check_consistent();
  NormalizeResult out;
  for (std::size_t n = 0; n < M.ndims(); ++n) {
    auto z = normalize_mode(M, n);
    out.zero_columns.insert(out.zero_columns.end(), z.begin(), z.end());
  }
  out.model = std::move(M);
  return out;
}

/// A^T A as an R x R row-major matrix. Only the upper triangle is computed;
/// the lower triangle is mirrored, so the result is exactly symmetric.
inline FactorMatrix gram(const FactorMatrix& A) {
  const std::size_t R = A.cols();
  FactorMatrix G(R, R);
  for (std::size_t i = 0; i < A.rows(); ++i) {
    const real_t* a = A.row(i);
    for (std::size_t p = 0; p < R; ++p) {
      real_t* g = G.row(p);
      const real_t ap = a[p];
      for (std::size_t q = p; q < R; ++q) g[q] += ap * a[q];
    }
  }
  for (std::size_t p = 0; p < R; ++p) {
    for (std::size_t q = 0; q < p; ++q) G(p, q) = G(q, p);
  }
  return G;
}

/// ||M||^2 = w^T (Hadamard product of all Gram matrices) w.
inline real_t norm_squared(const KTensor& M) {
  M.check_consistent();
  const std::size_t R = M.ncomponents();
  FactorMatrix H(R, R, real_t(1));
  for (const auto& A : M.factors) {
    const FactorMatrix G = gram(A);
    for (std::size_t k = 0; k < R * R; ++k) H.data()[k] *= G.data()[k];
  }
  real_t sum = 0;
  for (std::size_t p = 0; p < R; ++p) {
    for (std::size_t q = 0; q < R; ++q) sum += M.weights[p] * H(p, q) * M.weights[q];
  }
  return sum;
}

/// <X, M> summed over the nonzeros of X. Partial sums are taken over fixed
/// blocks of nonzeros and combined in block order, so the result does not
/// depend on the thread count.
inline real_t inner_product(const SparseTensor& X, const KTensor& M, std::size_t threads = 1) {
  M.check_consistent();
  if (X.ndims() != M.ndims()) throw DimensionError("inner_product: tensor and model have different orders");
  for (std::size_t m = 0; m < X.ndims(); ++m) {
    if (X.size(m) != M.factors[m].rows()) {
      throw DimensionError("inner_product: mode " + std::to_string(m) + " length mismatch");
    }
  }
  constexpr std::size_t block = 4096;
  const std::size_t P = X.nnz();
  const std::size_t d = X.ndims();
  const std::size_t R = M.ncomponents();
  const std::size_t n_blocks = (P + block - 1) / block;
  std::vector<real_t> partial(n_blocks, 0);

  shared_pool(threads).parallel_for(n_blocks, [&](std::size_t b, std::size_t) {
    real_t sum = 0;
    const std::size_t end = std::min(P, (b + 1) * block);
    for (std::size_t i = b * block; i < end; ++i) {
      real_t model = 0;
      for (std::size_t j = 0; j < R; ++j) {
        real_t prod = M.weights[j];
        for (std::size_t m = 0; m < d; ++m) prod *= M.factors[m](X.subscript(i, m), j);
        model += prod;
      }
      sum += X.value(i) * model;
    }
    partial[b] = sum;
  });

  real_t total = 0;
  for (real_t p : partial) total += p;
  return total;
}

/// 1 - ||X - M|| / ||X||, with the squared residual clamped at zero.
inline real_t fit(const SparseTensor& X, const KTensor& M, std::size_t threads = 1) {
  const real_t x_norm = frobenius_norm(X);
  if (x_norm == 0) throw NumericError("fit: data tensor has zero norm");
  const real_t resid_sq = x_norm * x_norm + norm_squared(M) - 2 * inner_product(X, M, threads);
  return 1 - std::sqrt(std::max(real_t(0), resid_sq)) / x_norm;
}

}  // namespace spcp
