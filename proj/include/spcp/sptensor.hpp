#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "spcp/config.hpp"
#include "spcp/thread_pool.hpp"

namespace spcp {

enum class DuplicatePolicy { merge_sum, error };

/// Sparse tensor in coordinate (COO) format.
///
/// Nonzero i has value values()[i] and 0-based coordinates
/// coords()[i*d .. i*d+d), so the d indices of one nonzero are contiguous.
/// Instances are immutable once built; use from_coo() or random_sparse().
class SparseTensor {
 public:
  SparseTensor() = default;

  std::size_t ndims() const noexcept { return dims_.size(); }
  std::size_t nnz() const noexcept { return values_.size(); }

  std::span<const ordinal_t> dims() const noexcept { return dims_; }
  ordinal_t size(std::size_t mode) const { return dims_.at(mode); }

  std::span<const ordinal_t> coords() const noexcept { return coords_; }
  std::span<const real_t> values() const noexcept { return values_; }

  real_t value(std::size_t i) const noexcept { return values_[i]; }
  ordinal_t subscript(std::size_t i, std::size_t mode) const noexcept {
    return coords_[i * dims_.size() + mode];
  }
  std::span<const ordinal_t> subscripts(std::size_t i) const noexcept {
    return {coords_.data() + i * dims_.size(), dims_.size()};
  }

  friend SparseTensor from_coo(std::vector<ordinal_t> dims, std::vector<ordinal_t> coords,
                               std::vector<real_t> values, DuplicatePolicy policy);

 private:
  std::vector<ordinal_t> dims_;
  std::vector<ordinal_t> coords_;
  std::vector<real_t> values_;
};

/// Per-mode traversal orders: perm(n)[i] is the nonzero visited i-th when the
/// nonzeros are walked in increasing mode-n index. Ties keep storage order.
class PermutationSet {
 public:
  PermutationSet() = default;
  explicit PermutationSet(std::vector<std::vector<ordinal_t>> perms) : perms_(std::move(perms)) {}

  std::size_t ndims() const noexcept { return perms_.size(); }
  std::span<const ordinal_t> perm(std::size_t mode) const { return perms_.at(mode); }

 private:
  std::vector<std::vector<ordinal_t>> perms_;
};

namespace detail {

inline bool coords_less(std::span<const ordinal_t> c, std::size_t d, ordinal_t a, ordinal_t b) {
  return std::lexicographical_compare(c.begin() + a * d, c.begin() + a * d + d, c.begin() + b * d,
                                      c.begin() + b * d + d);
}

inline bool coords_equal(std::span<const ordinal_t> c, std::size_t d, ordinal_t a, ordinal_t b) {
  return std::equal(c.begin() + a * d, c.begin() + a * d + d, c.begin() + b * d);
}

// Product of dims, saturating at the maximum of std::uint64_t.
inline std::uint64_t capacity(std::span<const ordinal_t> dims) {
  std::uint64_t cap = 1;
  for (auto n : dims) {
    if (n == 0) return 0;
    if (cap > std::numeric_limits<std::uint64_t>::max() / n) return std::numeric_limits<std::uint64_t>::max();
    cap *= n;
  }
  return cap;
}

}  // namespace detail

/// Builds a validated tensor from a coordinate list (0-based coordinates,
/// row-major P x d table). With merge_sum, repeated coordinates are combined
/// by adding their values and kept at the position of their first occurrence.
inline SparseTensor from_coo(std::vector<ordinal_t> dims, std::vector<ordinal_t> coords,
                             std::vector<real_t> values,
                             DuplicatePolicy policy = DuplicatePolicy::merge_sum) {
  const std::size_t d = dims.size();
  if (d == 0) throw DimensionError("from_coo: tensor needs at least one mode");
  for (std::size_t m = 0; m < d; ++m) {
    if (dims[m] == 0) throw DimensionError("from_coo: mode " + std::to_string(m) + " has length 0");
  }
  const std::size_t P = values.size();
  if (coords.size() != P * d) {
    throw DimensionError("from_coo: coordinate table has " + std::to_string(coords.size()) +
                         " entries, expected " + std::to_string(P) + " x " + std::to_string(d));
  }
  for (std::size_t i = 0; i < P; ++i) {
    for (std::size_t m = 0; m < d; ++m) {
      if (coords[i * d + m] >= dims[m]) {
        throw DimensionError("from_coo: nonzero " + std::to_string(i) + " has index " +
                             std::to_string(coords[i * d + m]) + " in mode " + std::to_string(m) +
                             " of length " + std::to_string(dims[m]));
      }
    }
  }

  // Sort an index array lexicographically; equal runs are duplicates.
  std::vector<ordinal_t> order(P);
  std::iota(order.begin(), order.end(), ordinal_t{0});
  const std::span<const ordinal_t> c(coords);
  std::stable_sort(order.begin(), order.end(),
                   [&](ordinal_t a, ordinal_t b) { return detail::coords_less(c, d, a, b); });

  std::vector<ordinal_t> owner(P);
  bool any_duplicate = false;
  for (std::size_t k = 0; k < P;) {
    std::size_t e = k + 1;
    while (e < P && detail::coords_equal(c, d, order[k], order[e])) ++e;
    // order[k] is the first occurrence because the sort is stable.
    for (std::size_t q = k; q < e; ++q) owner[order[q]] = order[k];
    if (e - k > 1) any_duplicate = true;
    k = e;
  }

  SparseTensor X;
  X.dims_ = std::move(dims);
  if (!any_duplicate) {
    X.coords_ = std::move(coords);
    X.values_ = std::move(values);
    return X;
  }
  if (policy == DuplicatePolicy::error) {
    for (std::size_t i = 0; i < P; ++i) {
      if (owner[i] != i) {
        throw DimensionError("from_coo: nonzero " + std::to_string(i) + " duplicates nonzero " +
                             std::to_string(owner[i]));
      }
    }
  }

  std::vector<real_t> merged(values.size(), real_t(0));
  for (std::size_t i = 0; i < P; ++i) merged[owner[i]] += values[i];
  X.coords_.reserve(coords.size());
  X.values_.reserve(P);
  for (std::size_t i = 0; i < P; ++i) {
    if (owner[i] != i) continue;
    X.coords_.insert(X.coords_.end(), coords.begin() + i * d, coords.begin() + i * d + d);
    X.values_.push_back(merged[i]);
  }
  return X;
}

/// Uniformly random tensor with nnz distinct coordinates and values in [0,1).
/// Deterministic for a given seed.
inline SparseTensor random_sparse(std::vector<ordinal_t> dims, std::size_t nnz, std::uint64_t seed) {
  const std::size_t d = dims.size();
  if (d == 0) throw DimensionError("random_sparse: tensor needs at least one mode");
  const std::uint64_t cap = detail::capacity(dims);
  if (nnz > cap) {
    throw DimensionError("random_sparse: " + std::to_string(nnz) + " nonzeros exceed tensor capacity " +
                         std::to_string(cap));
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ordinal_t> coords(nnz * d);
  std::vector<real_t> values(nnz);

  auto unlinearize = [&](std::uint64_t lin, ordinal_t* out) {
    for (std::size_t m = d; m-- > 0;) {
      out[m] = static_cast<ordinal_t>(lin % dims[m]);
      lin /= dims[m];
    }
  };

  if (cap != std::numeric_limits<std::uint64_t>::max() && nnz > cap / 2) {
    // Dense regime: partial Fisher-Yates over every linear index.
    std::vector<std::uint64_t> all(cap);
    std::iota(all.begin(), all.end(), std::uint64_t{0});
    for (std::size_t i = 0; i < nnz; ++i) {
      std::uniform_int_distribution<std::uint64_t> pick(i, cap - 1);
      std::swap(all[i], all[pick(rng)]);
      unlinearize(all[i], coords.data() + i * d);
    }
  } else {
    // Sparse regime: draw per-mode indices and reject repeats.
    const bool linear_keys = cap != std::numeric_limits<std::uint64_t>::max();
    std::unordered_set<std::uint64_t> seen_linear;
    std::unordered_set<std::string> seen_tuple;
    if (linear_keys) seen_linear.reserve(nnz);
    std::vector<std::uniform_int_distribution<ordinal_t>> draw;
    for (auto n : dims) draw.emplace_back(0, n - 1);
    std::vector<ordinal_t> tuple(d);
    for (std::size_t i = 0; i < nnz;) {
      for (std::size_t m = 0; m < d; ++m) tuple[m] = draw[m](rng);
      bool fresh;
      if (linear_keys) {
        std::uint64_t lin = 0;
        for (std::size_t m = 0; m < d; ++m) lin = lin * dims[m] + tuple[m];
        fresh = seen_linear.insert(lin).second;
      } else {
        fresh = seen_tuple.emplace(reinterpret_cast<const char*>(tuple.data()), d * sizeof(ordinal_t)).second;
      }
      if (!fresh) continue;
      std::copy(tuple.begin(), tuple.end(), coords.begin() + i * d);
      ++i;
    }
  }
  for (auto& v : values) v = static_cast<real_t>(unit(rng));
  return from_coo(std::move(dims), std::move(coords), std::move(values), DuplicatePolicy::error);
}

/// Stable sort of nonzero positions by one mode's index. Counting sort is used
/// when the mode is no longer than the number of nonzeros.
inline std::vector<ordinal_t> sort_by_mode(const SparseTensor& X, std::size_t mode) {
  const std::size_t P = X.nnz();
  const std::size_t d = X.ndims();
  const auto c = X.coords();
  std::vector<ordinal_t> perm(P);
  const ordinal_t len = X.size(mode);

  if (len <= P) {
    std::vector<ordinal_t> offset(static_cast<std::size_t>(len) + 1, 0);
    for (std::size_t i = 0; i < P; ++i) ++offset[c[i * d + mode] + 1];
    std::partial_sum(offset.begin(), offset.end(), offset.begin());
    for (std::size_t i = 0; i < P; ++i) perm[offset[c[i * d + mode]]++] = static_cast<ordinal_t>(i);
  } else {
    std::iota(perm.begin(), perm.end(), ordinal_t{0});
    std::stable_sort(perm.begin(), perm.end(),
                     [&](ordinal_t a, ordinal_t b) { return c[a * d + mode] < c[b * d + mode]; });
  }
  return perm;
}

/// One permutation array per mode. Modes are sorted concurrently when
/// threads > 1; the result does not depend on the thread count.
inline PermutationSet build_perm(const SparseTensor& X, std::size_t threads = 1) {
  std::vector<std::vector<ordinal_t>> perms(X.ndims());
  shared_pool(std::min(threads, X.ndims())).parallel_for(X.ndims(), [&](std::size_t mode, std::size_t) {
    perms[mode] = sort_by_mode(X, mode);
  });
  return PermutationSet(std::move(perms));
}

inline real_t frobenius_norm(const SparseTensor& X) {
  real_t sum = 0;
  for (real_t v : X.values()) sum += v * v;
  return std::sqrt(sum);
}

/// Bytes needed for the tensor: (s_r + d*s_o)*P, or (s_r + 2*d*s_o)*P when the
/// per-mode permutation arrays are kept as well.
inline std::uint64_t storage_bytes(std::uint64_t d, std::uint64_t nnz, bool with_perm,
                                   std::uint64_t real_bytes = sizeof(real_t),
                                   std::uint64_t ordinal_bytes = sizeof(ordinal_t)) {
  if (real_bytes == 0 || ordinal_bytes == 0) throw DimensionError("storage_bytes: type sizes must be positive");
  const std::uint64_t per_nonzero = real_bytes + (with_perm ? 2 : 1) * d * ordinal_bytes;
  return per_nonzero * nnz;
}

inline std::uint64_t storage_bytes(const SparseTensor& X, bool with_perm, std::uint64_t real_bytes = sizeof(real_t),
                                   std::uint64_t ordinal_bytes = sizeof(ordinal_t)) {
  return storage_bytes(X.ndims(), X.nnz(), with_perm, real_bytes, ordinal_bytes);
}

}  // namespace spcp
