#pragma once

#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace garnn {

/// Minimal fixed-size worker pool for batch-level parallelism. Work items
/// write to disjoint slots; callers reduce results in index order, so the
/// outcome is bit-identical regardless of thread count.
class ThreadPool {
 public:
  explicit ThreadPool(std::size_t threads = 0) {
    if (threads == 0) {
      threads = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    }
    for (std::size_t i = 0; i < threads; ++i) {
      workers_.emplace_back([this] { worker_loop(); });
    }
  }

  ~ThreadPool() {
    {
      std::lock_guard lock(mutex_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& w : workers_) w.join();
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  std::size_t size() const { return workers_.size(); }

  /// Runs fn(i) for i in [begin, end); blocks until all items finished.
  /// Exceptions from fn are rethrown (first one wins).
  void parallel_for(std::size_t begin, std::size_t end,
                    const std::function<void(std::size_t)>& fn) {
    if (end <= begin) return;
    if (workers_.size() == 1 || end - begin == 1) {
      for (std::size_t i = begin; i < end; ++i) fn(i);
      return;
    }
    std::exception_ptr error;
    std::size_t remaining = end - begin;
    std::mutex done_mutex;
    std::condition_variable done_cv;
    {
      std::lock_guard lock(mutex_);
      for (std::size_t i = begin; i < end; ++i) {
        queue_.push_back([&, i] {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard dl(done_mutex);
            if (!error) error = std::current_exception();
          }
          std::lock_guard dl(done_mutex);
          if (--remaining == 0) done_cv.notify_one();
        });
      }
    }
    cv_.notify_all();
    std::unique_lock done_lock(done_mutex);
    done_cv.wait(done_lock, [&] { return remaining == 0; });
    if (error) std::rethrow_exception(error);
  }

 private:
  void worker_loop() {
    for (;;) {
      std::function<void()> task;
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [this] { return stop_ || !queue_.empty(); });
        if (stop_ && queue_.empty()) return;
        task = std::move(queue_.front());
        queue_.erase(queue_.begin());
      }
      task();
    }
  }

  std::vector<std::thread> workers_;
  std::vector<std::function<void()>> queue_;
  std::mutex mutex_;
  std::condition_variable cv_;
  bool stop_ = false;
};

}  // namespace garnn
