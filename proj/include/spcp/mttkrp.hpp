#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spcp/blocking.hpp"
#include "spcp/ktensor.hpp"
#include "spcp/sptensor.hpp"
#include "spcp/thread_pool.hpp"
#include "spcp/tiny_vec.hpp"

// Sparse MTTKRP for mode n:
//
//   V(k, j) = w_j * sum over nonzeros i with index k in mode n of
//             x_i * prod over m != n of A_m(index of i in mode m, j)
//
// All variants parallelize over blocks of nonzeros. The league of blocks is a
// work queue on the thread pool; a team is one worker that walks its team
// members' sub-blocks in turn; the vector level is the inner loop over one
// tile of factor columns.

namespace spcp {

enum class Variant {
  atomic,    // per-worker scratch row, atomic add of every nonzero's row
  blocked,   // fixed-length tile accumulator, atomic add of every nonzero's row
  permuted,  // walk in mode-n order, flush once per row, atomics only at block edges
};

constexpr std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::atomic:
      return "atomic";
    case Variant::blocked:
      return "blocked";
    case Variant::permuted:
      return "perm";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "atomic") return Variant::atomic;
  if (s == "blocked") return Variant::blocked;
  if (s == "perm" || s == "permuted") return Variant::permuted;
  throw Error("unknown MTTKRP variant '" + std::string(s) + "'");
}

/// Default output for the permuted kernel: adds a flushed tile straight into V.
struct DirectRowSink {
  FactorMatrix& V;

  template <typename Vec>
  void flush(std::size_t row, std::size_t jb, const Vec& val, bool atomic, std::size_t /*worker_block*/) {
    real_t* dst = V.row(row) + jb;
    if (atomic) {
      val.atomic_store_plus(dst);
    } else {
      val.store_plus(dst);
    }
  }
};

namespace detail {

inline void check_mttkrp_args(const SparseTensor& X, const KTensor& M, std::size_t n) {
  M.check_consistent();
  if (n >= X.ndims()) {
    throw DimensionError("mttkrp: mode " + std::to_string(n) + " out of range for order-" +
                         std::to_string(X.ndims()) + " tensor");
  }
  if (M.ndims() != X.ndims()) throw DimensionError("mttkrp: tensor and model have different orders");
  for (std::size_t m = 0; m < X.ndims(); ++m) {
    if (M.factors[m].rows() != X.size(m)) {
      throw DimensionError("mttkrp: factor " + std::to_string(m) + " has " + std::to_string(M.factors[m].rows()) +
                           " rows, tensor mode has length " + std::to_string(X.size(m)));
    }
  }
}

inline void check_perms(const SparseTensor& X, const PermutationSet& perms) {
  if (perms.ndims() != X.ndims()) throw DimensionError("mttkrp: permutation set has wrong number of modes");
  for (std::size_t m = 0; m < X.ndims(); ++m) {
    if (perms.perm(m).size() != X.nnz()) throw DimensionError("mttkrp: permutation length does not match nnz");
  }
}

// Nonzero range [begin, end) of team member t in league block b.
struct MemberRange {
  std::size_t begin;
  std::size_t end;
};

inline MemberRange member_range(const BlockingPolicy& p, std::size_t nnz, std::size_t league_rank,
                                std::size_t team_rank) {
  const std::size_t begin = std::min(nnz, league_rank * p.nzpt + team_rank * p.nzptm);
  return {begin, std::min(nnz, begin + p.nzptm)};
}

inline void mttkrp_atomic(const SparseTensor& X, const KTensor& M, std::size_t n, const BlockingPolicy& p,
                          ThreadPool& pool, FactorMatrix& V) {
  const std::size_t R = M.ncomponents();
  const std::size_t d = X.ndims();
  const std::size_t P = X.nnz();
  std::vector<std::vector<real_t>> scratch(pool.width(), std::vector<real_t>(p.fbs));

  pool.parallel_for(p.league_size, [&](std::size_t league_rank, std::size_t worker) {
    real_t* tmp = scratch[worker].data();
    for (std::size_t jb = 0; jb < R; jb += p.fbs) {
      const std::size_t nj = std::min(p.fbs, R - jb);
      for (std::size_t team_rank = 0; team_rank < p.team_size; ++team_rank) {
        const auto [begin, end] = member_range(p, P, league_rank, team_rank);
        for (std::size_t i = begin; i < end; ++i) {
          const real_t x_val = X.value(i);
          const ordinal_t k = X.subscript(i, n);
          const real_t* w = M.weights.data() + jb;
          for (std::size_t j = 0; j < nj; ++j) tmp[j] = x_val * w[j];
          for (std::size_t m = 0; m < d; ++m) {
            if (m == n) continue;
            const real_t* a = M.factors[m].row(X.subscript(i, m)) + jb;
            for (std::size_t j = 0; j < nj; ++j) tmp[j] *= a[j];
          }
          real_t* v = V.row(k) + jb;
          for (std::size_t j = 0; j < nj; ++j) atomic_add(v[j], tmp[j]);
        }
      }
    }
  });
}

template <typename Vec>
void blocked_tile(const SparseTensor& X, const KTensor& M, std::size_t n, std::size_t jb, std::size_t nj,
                  std::size_t begin, std::size_t end, FactorMatrix& V) {
  const std::size_t d = X.ndims();
  for (std::size_t i = begin; i < end; ++i) {
    const ordinal_t k = X.subscript(i, n);
    Vec tmp(nj, X.value(i));
    tmp *= M.weights.data() + jb;
    for (std::size_t m = 0; m < d; ++m) {
      if (m != n) tmp *= M.factors[m].row(X.subscript(i, m)) + jb;
    }
    tmp.atomic_store_plus(V.row(k) + jb);
  }
}

template <std::size_t FBS, bool AlwaysRuntime>
void mttkrp_blocked_fixed(const SparseTensor& X, const KTensor& M, std::size_t n, const BlockingPolicy& p,
                          ThreadPool& pool, FactorMatrix& V) {
  const std::size_t R = M.ncomponents();
  const std::size_t P = X.nnz();
  const std::size_t tile = p.fbs;
  pool.parallel_for(p.league_size, [&](std::size_t league_rank, std::size_t) {
    for (std::size_t jb = 0; jb < R; jb += tile) {
      const std::size_t nj = std::min(tile, R - jb);
      for (std::size_t team_rank = 0; team_rank < p.team_size; ++team_rank) {
        const auto [begin, end] = member_range(p, P, league_rank, team_rank);
        if (!AlwaysRuntime && nj == FBS) {
          blocked_tile<TinyVec<FBS, true>>(X, M, n, jb, nj, begin, end, V);
        } else {
          blocked_tile<TinyVec<FBS, false>>(X, M, n, jb, nj, begin, end, V);
        }
      }
    }
  });
}

template <typename Vec, typename Sink>
void permuted_tile(const SparseTensor& X, const KTensor& M, std::size_t n, std::span<const ordinal_t> perm,
                   std::size_t jb, std::size_t nj, std::size_t begin, std::size_t end, Sink& sink,
                   std::size_t member_block) {
  if (begin == end) return;
  const std::size_t d = X.ndims();
  Vec val(nj, real_t(0));
  const ordinal_t first_row = X.subscript(perm[begin], n);
  ordinal_t row_prev = first_row;

  for (std::size_t i = begin; i < end; ++i) {
    const ordinal_t p = perm[i];
    const ordinal_t row = X.subscript(p, n);

    if (row != row_prev) {
      // Rows strictly inside the block belong to this worker alone.
      sink.flush(row_prev, jb, val, row_prev == first_row, member_block);
      val.fill(0);
      row_prev = row;
    }

    Vec tmp(nj, X.value(p));
    tmp *= M.weights.data() + jb;
    for (std::size_t m = 0; m < d; ++m) {
      if (m != n) tmp *= M.factors[m].row(X.subscript(p, m)) + jb;
    }
    val += tmp;
  }
  // The last row may continue into the next block.
  sink.flush(row_prev, jb, val, true, member_block);
}

template <std::size_t FBS, bool AlwaysRuntime, typename Sink>
void mttkrp_permuted_fixed(const SparseTensor& X, const KTensor& M, std::size_t n, const BlockingPolicy& p,
                           std::span<const ordinal_t> perm, ThreadPool& pool, Sink& sink) {
  const std::size_t R = M.ncomponents();
  const std::size_t P = X.nnz();
  const std::size_t tile = p.fbs;
  pool.parallel_for(p.league_size, [&](std::size_t league_rank, std::size_t) {
    for (std::size_t jb = 0; jb < R; jb += tile) {
      const std::size_t nj = std::min(tile, R - jb);
      for (std::size_t team_rank = 0; team_rank < p.team_size; ++team_rank) {
        const auto [begin, end] = member_range(p, P, league_rank, team_rank);
        const std::size_t member_block = league_rank * p.team_size + team_rank;
        if (!AlwaysRuntime && nj == FBS) {
          permuted_tile<TinyVec<FBS, true>>(X, M, n, perm, jb, nj, begin, end, sink, member_block);
        } else {
          permuted_tile<TinyVec<FBS, false>>(X, M, n, perm, jb, nj, begin, end, sink, member_block);
        }
      }
    }
  });
}

// Largest tile size with a compiled accumulator.
inline constexpr std::size_t max_fixed_fbs = 128;

// Calls f.template operator()<FBS, AlwaysRuntime>() for the compiled tile
// length matching fbs. Tile sizes outside the compiled set run on the
// largest accumulator with runtime length only.
template <typename F>
void dispatch_fbs(std::size_t fbs, F&& f) {
  switch (fbs) {
    case 1: return f.template operator()<1, false>();
    case 2: return f.template operator()<2, false>();
    case 4: return f.template operator()<4, false>();
    case 8: return f.template operator()<8, false>();
    case 16: return f.template operator()<16, false>();
    case 24: return f.template operator()<24, false>();
    case 32: return f.template operator()<32, false>();
    case 48: return f.template operator()<48, false>();
    case 64: return f.template operator()<64, false>();
    case 96: return f.template operator()<96, false>();
    case 128: return f.template operator()<128, false>();
    default:
      if (fbs > max_fixed_fbs) {
        throw DimensionError("mttkrp: tile size " + std::to_string(fbs) + " exceeds " +
                             std::to_string(max_fixed_fbs));
      }
      return f.template operator()<max_fixed_fbs, true>();
  }
}

}  // namespace detail

/// Permuted-traversal MTTKRP writing through a caller-supplied sink. The sink
/// receives flush(row, jb, tile, atomic, member_block) for every row write.
/// V-owning callers normally use mttkrp(); this entry point exists so the
/// write pattern can be observed.
template <typename Sink>
void mttkrp_permuted(const SparseTensor& X, const KTensor& M, std::size_t n, const BlockingPolicy& policy,
                     const PermutationSet& perms, std::size_t threads, Sink& sink) {
  detail::check_mttkrp_args(X, M, n);
  detail::check_perms(X, perms);
  const BlockingPolicy p = policy.for_nnz(X.nnz());
  ThreadPool& pool = shared_pool(threads);
  detail::dispatch_fbs(p.fbs, [&]<std::size_t FBS, bool AlwaysRuntime>() {
    detail::mttkrp_permuted_fixed<FBS, AlwaysRuntime>(X, M, n, p, perms.perm(n), pool, sink);
  });
}

/// Computes the mode-n MTTKRP into V, which is resized and zeroed first.
inline void mttkrp(const SparseTensor& X, const KTensor& M, std::size_t n, Variant variant,
                   const BlockingPolicy& policy, const PermutationSet* perms, std::size_t threads, FactorMatrix& V) {
  detail::check_mttkrp_args(X, M, n);
  if (variant == Variant::permuted && perms == nullptr) {
    throw DimensionError("mttkrp: permuted variant requires a permutation set");
  }
  const BlockingPolicy p = policy.for_nnz(X.nnz());
  if (V.rows() != X.size(n) || V.cols() != M.ncomponents()) {
    V = FactorMatrix(X.size(n), M.ncomponents());
  } else {
    V.fill(0);
  }
  ThreadPool& pool = shared_pool(threads);

  switch (variant) {
    case Variant::atomic:
      detail::mttkrp_atomic(X, M, n, p, pool, V);
      break;
    case Variant::blocked:
      detail::dispatch_fbs(p.fbs, [&]<std::size_t FBS, bool AlwaysRuntime>() {
        detail::mttkrp_blocked_fixed<FBS, AlwaysRuntime>(X, M, n, p, pool, V);
      });
      break;
    case Variant::permuted: {
      DirectRowSink sink{V};
      mttkrp_permuted(X, M, n, p, *perms, threads, sink);
      break;
    }
  }
}

inline FactorMatrix mttkrp(const SparseTensor& X, const KTensor& M, std::size_t n, Variant variant,
                           const BlockingPolicy& policy, const PermutationSet* perms = nullptr,
                           std::size_t threads = 1) {
  FactorMatrix V;
  mttkrp(X, M, n, variant, policy, perms, threads, V);
  return V;
}

/// Convenience overload using the cpu_like policy for M's rank.
inline FactorMatrix mttkrp(const SparseTensor& X, const KTensor& M, std::size_t n, Variant variant,
                           const PermutationSet* perms = nullptr, std::size_t threads = 1) {
  return mttkrp(X, M, n, variant, blocking_policy(std::max<std::size_t>(M.ncomponents(), 1), Profile::cpu_like, X.nnz()),
                perms, threads);
}

}  // namespace spcp
