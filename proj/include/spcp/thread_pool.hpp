#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

namespace spcp {

/// Fixed-width pool of worker threads that executes a block-indexed loop.
///
/// A pool of width T owns T-1 background threads; the calling thread acts as
/// worker 0. Blocks are handed out through a shared atomic counter, so a
/// `parallel_for` behaves like a work queue over its block range. With width 1
/// everything runs on the caller in increasing block order.
class ThreadPool {
 public:
  using BlockFn = std::function<void(std::size_t block, std::size_t worker)>;

  explicit ThreadPool(std::size_t width) : width_(std::max<std::size_t>(width, 1)) {
    workers_.reserve(width_ - 1);
    for (std::size_t w = 1; w < width_; ++w) {
      workers_.emplace_back([this, w] { worker_loop(w); });
    }
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  ~ThreadPool() {
    {
      std::lock_guard lock(mutex_);
      stopping_ = true;
    }
    wake_.notify_all();
    for (auto& t : workers_) t.join();
  }

  std::size_t width() const noexcept { return width_; }

  /// Runs fn(block, worker) for every block in [0, n_blocks). Blocks until all
  /// blocks have finished. The first exception thrown by any block is rethrown.
  void parallel_for(std::size_t n_blocks, const BlockFn& fn) {
    if (n_blocks == 0) return;
    if (width_ == 1 || n_blocks == 1) {
      for (std::size_t b = 0; b < n_blocks; ++b) fn(b, 0);
      return;
    }

    std::lock_guard call_lock(call_mutex_);
    {
      std::lock_guard lock(mutex_);
      job_ = &fn;
      n_blocks_ = n_blocks;
      next_block_.store(0, std::memory_order_relaxed);
      active_ = width_ - 1;
      error_ = nullptr;
      ++generation_;
    }
    wake_.notify_all();

    drain(0);

    std::unique_lock lock(mutex_);
    done_.wait(lock, [this] { return active_ == 0; });
    job_ = nullptr;
    if (error_) std::rethrow_exception(error_);
  }

 private:
  void drain(std::size_t worker) {
    for (;;) {
      const std::size_t b = next_block_.fetch_add(1, std::memory_order_relaxed);
      if (b >= n_blocks_) return;
      try {
        (*job_)(b, worker);
      } catch (...) {
        std::lock_guard lock(mutex_);
        if (!error_) error_ = std::current_exception();
        next_block_.store(n_blocks_, std::memory_order_relaxed);
      }
    }
  }

  void worker_loop(std::size_t worker) {
    std::size_t seen = 0;
    for (;;) {
      {
        std::unique_lock lock(mutex_);
        wake_.wait(lock, [&] { return stopping_ || generation_ != seen; });
        if (stopping_) return;
        seen = generation_;
      }
      drain(worker);
      {
        std::lock_guard lock(mutex_);
        if (--active_ == 0) done_.notify_one();
      }
    }
  }

  std::size_t width_;
  std::vector<std::thread> workers_;

  std::mutex call_mutex_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  bool stopping_ = false;
  std::size_t generation_ = 0;
  std::size_t active_ = 0;

  const BlockFn* job_ = nullptr;
  std::size_t n_blocks_ = 0;
  std::atomic<std::size_t> next_block_{0};
  std::exception_ptr error_;
};

/// Process-wide pool of the given width, created on first use and kept alive.
inline ThreadPool& shared_pool(std::size_t width) {
  static std::mutex registry_mutex;
  static std::map<std::size_t, std::unique_ptr<ThreadPool>> registry;
  width = std::max<std::size_t>(width, 1);
  std::lock_guard lock(registry_mutex);
  auto& slot = registry[width];
  if (!slot) slot = std::make_unique<ThreadPool>(width);
  return *slot;
}

}  // namespace spcp
