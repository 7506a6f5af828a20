#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <string>

#include "spcp/config.hpp"

namespace spcp {

/// Which parameter table drives the launch geometry. Execution always maps
/// onto the CPU thread pool; the gpu_table profile only reproduces the policy.
enum class Profile { cpu_like, gpu_table };

/// Launch geometry for one MTTKRP call. A league block holds nzpt = nzptm *
/// team_size nonzeros; each team member walks nzptm of them; factor columns
/// are processed in tiles of fbs.
struct BlockingPolicy {
  std::size_t fbs = 1;
  std::size_t vector_size = 1;
  std::size_t team_size = 1;
  std::size_t nzptm = 128;
  std::size_t nzpt = 128;
  std::size_t league_size = 0;

  /// Same tile and team parameters, league resized to cover nnz nonzeros.
  BlockingPolicy for_nnz(std::size_t nnz) const {
    if (fbs == 0 || nzptm == 0 || team_size == 0) {
      throw DimensionError("blocking policy: fbs, nzptm and team_size must be positive");
    }
    BlockingPolicy p = *this;
    p.nzpt = nzptm * team_size;
    p.league_size = (nnz + p.nzpt - 1) / p.nzpt;
    return p;
  }

  friend bool operator==(const BlockingPolicy&, const BlockingPolicy&) = default;
};

inline constexpr std::size_t default_nzptm = 128;

/// Smallest power of two >= r.
constexpr std::size_t ceil_pow2(std::size_t r) {
  std::size_t p = 1;
  while (p < r) p <<= 1;
  return p;
}

namespace detail {

struct SizeRow {
  std::size_t max_rank;  // inclusive upper end of the rank range
  std::size_t vector_size;
  std::size_t fbs;
};

// Vector and tile sizes for the register-array kernel on GPUs, by rank range.
inline constexpr std::array<SizeRow, 13> gpu_sizes{{
    {1, 1, 1},
    {2, 2, 2},
    {3, 2, 4},
    {4, 4, 4},
    {7, 4, 8},
    {8, 8, 8},
    {16, 8, 16},
    {24, 8, 24},
    {47, 8, 32},
    {48, 16, 48},
    {95, 16, 64},
    {96, 32, 96},
    {static_cast<std::size_t>(-1), 32, 128},
}};

}  // namespace detail

/// Parameter choice for rank R and P nonzeros.
///
/// cpu_like: fbs = min(2^ceil(log2 R), 32), vector_size = 1, team_size = 1.
/// gpu_table: vector_size and fbs from the per-rank-range table,
/// team_size = 128 / vector_size unless team_size_hint is nonzero.
/// nzptm is 128 in both cases.
inline BlockingPolicy blocking_policy(std::size_t rank, Profile profile, std::size_t nnz,
                                      std::size_t team_size_hint = 0) {
  if (rank == 0) throw DimensionError("blocking_policy: rank must be at least 1");
  BlockingPolicy p;
  p.nzptm = default_nzptm;
  if (profile == Profile::cpu_like) {
    p.fbs = std::min<std::size_t>(ceil_pow2(rank), 32);
    p.vector_size = 1;
    p.team_size = 1;
  } else {
    const auto row = *std::find_if(detail::gpu_sizes.begin(), detail::gpu_sizes.end(),
                                   [&](const detail::SizeRow& r) { return rank <= r.max_rank; });
    p.vector_size = row.vector_size;
    p.fbs = row.fbs;
    p.team_size = team_size_hint != 0 ? team_size_hint : 128 / p.vector_size;
  }
  return p.for_nnz(nnz);
}

/// Operation count charged per nonzero in reports: d*R multiplies plus R adds.
constexpr std::size_t flops_per_nonzero(std::size_t d, std::size_t rank) { return d * rank + rank; }

}  // namespace spcp
