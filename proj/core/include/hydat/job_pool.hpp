#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace hydat {

/// Fixed set of worker threads draining a bounded FIFO queue.
class JobPool {
 public:
  JobPool(std::size_t workers, std::size_t max_queued);
  /// Waits for running tasks; tasks still queued are dropped.
  ~JobPool();
  JobPool(const JobPool&) = delete;
  JobPool& operator=(const JobPool&) = delete;

  /// False when the queue is full or the pool is shutting down.
  bool submit(std::function<void()> task);
  /// Blocks until the queue is empty and no task is running.
  void wait_idle();
  std::size_t workers() const { return threads_.size(); }

 private:
  void work();

  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable idle_;
  std::deque<std::function<void()>> queue_;
  std::vector<std::thread> threads_;
  std::size_t max_queued_;
  std::size_t running_ = 0;
  bool stopping_ = false;
};

}  // namespace hydat
