#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spcp/ktensor.hpp"
#include "spcp/sptensor.hpp"

// Brute-force dense references. Nothing here shares code with the kernels;
// everything is sequential and evaluated in a fixed order.

namespace spcp::oracle {

inline constexpr std::uint64_t default_dense_cap = 1'000'000;

/// Dense tensor stored in row-major multi-index order (last mode fastest).
class DenseTensor {
 public:
  explicit DenseTensor(std::vector<ordinal_t> dims, std::uint64_t cap = default_dense_cap) : dims_(std::move(dims)) {
    const std::uint64_t n = spcp::detail::capacity(dims_);
    if (n > cap) {
      throw DimensionError("DenseTensor: " + std::to_string(n) + " entries exceed the cap of " + std::to_string(cap));
    }
    data_.assign(n, real_t(0));
  }

  std::span<const ordinal_t> dims() const noexcept { return dims_; }
  std::size_t numel() const noexcept { return data_.size(); }
  std::span<real_t> data() noexcept { return data_; }
  std::span<const real_t> data() const noexcept { return data_; }

  std::size_t linear(std::span<const ordinal_t> idx) const {
    std::size_t lin = 0;
    for (std::size_t m = 0; m < dims_.size(); ++m) lin = lin * dims_[m] + idx[m];
    return lin;
  }

  std::vector<ordinal_t> multi_index(std::size_t lin) const {
    std::vector<ordinal_t> idx(dims_.size());
    for (std::size_t m = dims_.size(); m-- > 0;) {
      idx[m] = static_cast<ordinal_t>(lin % dims_[m]);
      lin /= dims_[m];
    }
    return idx;
  }

  real_t& operator[](std::span<const ordinal_t> idx) { return data_[linear(idx)]; }
  real_t operator[](std::span<const ordinal_t> idx) const { return data_[linear(idx)]; }

  real_t frobenius_norm_squared() const {
    real_t s = 0;
    for (real_t v : data_) s += v * v;
    return s;
  }

 private:
  std::vector<ordinal_t> dims_;
  std::vector<real_t> data_;
};

inline DenseTensor densify(const SparseTensor& X, std::uint64_t cap = default_dense_cap) {
  DenseTensor D(std::vector<ordinal_t>(X.dims().begin(), X.dims().end()), cap);
  for (std::size_t i = 0; i < X.nnz(); ++i) D[X.subscripts(i)] += X.value(i);
  return D;
}

/// Direct elementwise evaluation of the mode-n MTTKRP, nonzeros in storage order.
inline FactorMatrix mttkrp_oracle(const SparseTensor& X, const KTensor& M, std::size_t n) {
  const std::size_t R = M.weights.size();
  FactorMatrix V(X.size(n), R);
  for (std::size_t i = 0; i < X.nnz(); ++i) {
    const ordinal_t k = X.subscript(i, n);
    for (std::size_t j = 0; j < R; ++j) {
      real_t t = M.weights[j] * X.value(i);
      for (std::size_t m = 0; m < X.ndims(); ++m) {
        if (m != n) t *= M.factors[m](X.subscript(i, m), j);
      }
      V(k, j) += t;
    }
  }
  return V;
}

/// Mode-n MTTKRP from a dense tensor: sums over every cell of each slice.
inline FactorMatrix mttkrp_dense(const DenseTensor& D, const KTensor& M, std::size_t n) {
  const std::size_t R = M.weights.size();
  FactorMatrix V(D.dims()[n], R);
  for (std::size_t lin = 0; lin < D.numel(); ++lin) {
    const real_t x = D.data()[lin];
    if (x == 0) continue;
    const auto idx = D.multi_index(lin);
    for (std::size_t j = 0; j < R; ++j) {
      real_t t = x;
      for (std::size_t m = 0; m < idx.size(); ++m) {
        if (m != n) t *= M.factors[m](idx[m], j);
      }
      V(idx[n], j) += M.weights[j] * t;
    }
  }
  return V;
}

/// Every entry of the model, accumulated one rank-one term at a time.
inline DenseTensor reconstruct(const KTensor& M, std::uint64_t cap = default_dense_cap) {
  DenseTensor D(M.dims(), cap);
  for (std::size_t lin = 0; lin < D.numel(); ++lin) {
    const auto idx = D.multi_index(lin);
    real_t sum = 0;
    for (std::size_t j = 0; j < M.weights.size(); ++j) {
      real_t t = M.weights[j];
      for (std::size_t m = 0; m < idx.size(); ++m) t *= M.factors[m](idx[m], j);
      sum += t;
    }
    D.data()[lin] = sum;
  }
  return D;
}

/// Dense-as-sparse copy of a model: every cell becomes a stored nonzero.
inline SparseTensor to_sparse_all(const DenseTensor& D) {
  const std::size_t d = D.dims().size();
  std::vector<ordinal_t> coords;
  coords.reserve(D.numel() * d);
  std::vector<real_t> values(D.data().begin(), D.data().end());
  for (std::size_t lin = 0; lin < D.numel(); ++lin) {
    const auto idx = D.multi_index(lin);
    coords.insert(coords.end(), idx.begin(), idx.end());
  }
  return from_coo(std::vector<ordinal_t>(D.dims().begin(), D.dims().end()), std::move(coords), std::move(values),
                  DuplicatePolicy::error);
}

}  // namespace spcp::oracle
