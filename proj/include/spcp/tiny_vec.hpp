#pragma once

#include <atomic>
#include <cstddef>

#include "spcp/config.hpp"

namespace spcp {

/// Linearizable floating-point add built on compare-and-swap.
inline void atomic_add(real_t& target, real_t value) noexcept {
  std::atomic_ref<real_t> ref(target);
  real_t expected = ref.load(std::memory_order_relaxed);
  while (!ref.compare_exchange_weak(expected, expected + value, std::memory_order_relaxed,
                                    std::memory_order_relaxed)) {
  }
}

/// Thread-private accumulator for one tile of factor columns.
///
/// With Full = true the active length is the compile-time Length, so every
/// loop below has a constant trip count and can be vectorized. With
/// Full = false the active length is set at runtime (at most Length) and
/// covers the remainder tile when R is not a multiple of the tile size.
template <std::size_t Length, bool Full>
class TinyVec {
 public:
  static_assert(Length > 0);

  explicit TinyVec(std::size_t size = Length, real_t x = 0) noexcept : size_(Full ? Length : size) { fill(x); }

  std::size_t size() const noexcept {
    if constexpr (Full) {
      return Length;
    } else {
      return size_;
    }
  }

  const real_t* data() const noexcept { return v_; }

  void fill(real_t x) noexcept {
    for (std::size_t j = 0; j < size(); ++j) v_[j] = x;
  }

  TinyVec& operator*=(const real_t* x) noexcept {
    for (std::size_t j = 0; j < size(); ++j) v_[j] *= x[j];
    return *this;
  }

  TinyVec& operator+=(const TinyVec& x) noexcept {
    for (std::size_t j = 0; j < size(); ++j) v_[j] += x.v_[j];
    return *this;
  }

  void store_plus(real_t* dst) const noexcept {
    for (std::size_t j = 0; j < size(); ++j) dst[j] += v_[j];
  }

  void atomic_store_plus(real_t* dst) const noexcept {
    for (std::size_t j = 0; j < size(); ++j) atomic_add(dst[j], v_[j]);
  }

 private:
  alignas(64) real_t v_[Length];
  std::size_t size_;
};

}  // namespace spcp
