#ifndef SCALEDET_THREADPOOL_HPP
#define SCALEDET_THREADPOOL_HPP

#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <queue>
#include <thread>
#include <vector>

namespace scaledet {

// Fixed-size worker pool for embarrassingly parallel loops. parallel_for
// blocks until every index has run; exceptions from the body are rethrown on
// the calling thread. With one worker (or tiny loops) it runs inline, so
// single-core behavior is plain sequential execution.
class ThreadPool {
 public:
  explicit ThreadPool(unsigned threads) {
    if (threads < 1) threads = 1;
    for (unsigned i = 0; i + 1 < threads; ++i)
      workers_.emplace_back([this] { work(); });
  }

  ~ThreadPool() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (std::thread& t : workers_) t.join();
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  unsigned thread_count() const { return static_cast<unsigned>(workers_.size()) + 1; }

  void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
    if (count == 0) return;
    std::size_t shards = thread_count();
    if (shards <= 1 || count == 1) {
      for (std::size_t i = 0; i < count; ++i) body(i);
      return;
    }
    if (shards > count) shards = count;

    struct Batch {
      std::mutex mu;
      std::condition_variable done;
      std::size_t remaining;
      std::exception_ptr error;
    } batch;
    batch.remaining = shards;

    auto run_shard = [&batch, &body, count, shards](std::size_t s) {
      try {
        // Contiguous slices keep each worker's memory traffic local.
        std::size_t lo = count * s / shards;
        std::size_t hi = count * (s + 1) / shards;
        for (std::size_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(batch.mu);
        if (!batch.error) batch.error = std::current_exception();
      }
      std::lock_guard<std::mutex> lock(batch.mu);
      if (--batch.remaining == 0) batch.done.notify_one();
    };

    {
      std::lock_guard<std::mutex> lock(mu_);
      for (std::size_t s = 1; s < shards; ++s)
        tasks_.push([run_shard, s] { run_shard(s); });
    }
    cv_.notify_all();
    run_shard(0);  // the caller is one of the workers

    std::unique_lock<std::mutex> lock(batch.mu);
    batch.done.wait(lock, [&batch] { return batch.remaining == 0; });
    if (batch.error) std::rethrow_exception(batch.error);
  }

 private:
  void work() {
    for (;;) {
      std::function<void()> task;
      {
        std::unique_lock<std::mutex> lock(mu_);
        cv_.wait(lock, [this] { return stop_ || !tasks_.empty(); });
        if (stop_ && tasks_.empty()) return;
        task = std::move(tasks_.front());
        tasks_.pop();
      }
      task();
    }
  }

  std::vector<std::thread> workers_;
  std::queue<std::function<void()>> tasks_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool stop_ = false;
};

// Shared pool for read-only inference, sized to the machine.
inline ThreadPool& inference_pool() {
  static ThreadPool pool(std::thread::hardware_concurrency());
  return pool;
}

}  // namespace scaledet

#endif  // SCALEDET_THREADPOOL_HPP
