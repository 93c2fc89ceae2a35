// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace bitnet {

// Fixed-size pool of persistent workers. run() blocks until every submitted
// task has finished and is safe to call from several threads at once.
class ThreadPool {
 public:
  explicit ThreadPool(unsigned n_threads) {
    n_threads = std::max(1u, n_threads);
    threads_.reserve(n_threads);
    for (unsigned i = 0; i < n_threads; ++i) {
      threads_.emplace_back([this] { worker_loop(); });
    }
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  ~ThreadPool() {
    {
      std::lock_guard lock(mutex_);
      stopping_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  unsigned size() const noexcept { return static_cast<unsigned>(threads_.size()); }

  // Runs task(i) for i in [0, n_tasks). The first exception thrown by any
  // task is rethrown on the calling thread once all tasks are done.
  void run(unsigned n_tasks, const std::function<void(unsigned)>& task) {
    if (n_tasks == 0) return;
    Batch batch;
    batch.remaining = n_tasks;
    {
      std::lock_guard lock(mutex_);
      for (unsigned i = 0; i < n_tasks; ++i) {
        queue_.push_back(Item{&batch, &task, i});
      }
    }
    cv_.notify_all();
    std::unique_lock lock(mutex_);
    batch.done.wait(lock, [&] { return batch.remaining == 0; });
    if (batch.error) std::rethrow_exception(batch.error);
  }

  static ThreadPool& shared() {
    static ThreadPool pool(std::max(8u, std::thread::hardware_concurrency()));
    return pool;
  }

 private:
  struct Batch {
    unsigned remaining = 0;
    std::exception_ptr error;
    std::condition_variable done;
  };
  struct Item {
    Batch* batch;
    const std::function<void(unsigned)>* task;
    unsigned index;
  };

  void worker_loop() {
    for (;;) {
      Item item;
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
        if (queue_.empty()) return;
        item = queue_.front();
        queue_.pop_front();
      }
      std::exception_ptr error;
      try {
        (*item.task)(item.index);
      } catch (...) {
        error = std::current_exception();
      }
      std::lock_guard lock(mutex_);
      if (error && !item.batch->error) item.batch->error = error;
      if (--item.batch->remaining == 0) item.batch->done.notify_all();
    }
  }

  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<Item> queue_;
  std::vector<std::thread> threads_;
  bool stopping_ = false;
};

// Splits [0, n) into at most `workers` contiguous chunks and calls
// body(begin, end) on each. Chunks never overlap, so a body that writes only
// the outputs indexed by its own range needs no synchronisation.
inline void parallel_for(std::size_t n, unsigned workers,
                         const std::function<void(std::size_t, std::size_t)>& body) {
  if (n == 0) return;
  const std::size_t chunks = std::min<std::size_t>(std::max(1u, workers), n);
  if (chunks == 1) {
    body(0, n);
    return;
  }
  const std::size_t base = n / chunks;
  const std::size_t extra = n % chunks;
  ThreadPool::shared().run(static_cast<unsigned>(chunks), [&](unsigned c) {
    const std::size_t begin = c * base + std::min<std::size_t>(c, extra);
    const std::size_t end = begin + base + (c < extra ? 1 : 0);
    body(begin, end);
  });
}

}  // namespace bitnet
