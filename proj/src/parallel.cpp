/* Copyright 2026 The WavClass Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "wavclass/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

#include "wavclass/error.hpp"

namespace wvc {
namespace {

int g_threads = 1;

// Lazily started pool; workers pull chunk indices from a shared counter.
// Chunk boundaries come from the caller, so scheduling order cannot change
// which elements a chunk computes.
class Pool {
 public:
  explicit Pool(int workers) {
    for (int i = 0; i < workers; ++i)
      threads_.emplace_back([this] { worker(); });
  }

  ~Pool() {
    {
      std::unique_lock<std::mutex> lock(mu_);
      stop_ = true;
      cv_.notify_all();
    }
    for (auto& t : threads_) t.join();
  }

  void run(long chunks, const std::function<void(long)>& fn) {
    std::unique_lock<std::mutex> lock(mu_);
    fn_ = &fn;
    next_.store(0, std::memory_order_relaxed);
    total_ = chunks;
    pending_ = chunks;
    generation_ += 1;
    cv_.notify_all();
    done_cv_.wait(lock, [this] { return pending_ == 0; });
    fn_ = nullptr;
  }

 private:
  void worker() {
    uint64_t seen = 0;
    for (;;) {
      const std::function<void(long)>* fn;
      {
        std::unique_lock<std::mutex> lock(mu_);
        cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        fn = fn_;
      }
      long done_here = 0;
      for (;;) {
        const long i = next_.fetch_add(1, std::memory_order_relaxed);
        if (i >= total_) break;
        (*fn)(i);
        ++done_here;
      }
      if (done_here > 0) {
        std::unique_lock<std::mutex> lock(mu_);
        pending_ -= done_here;
        if (pending_ == 0) done_cv_.notify_all();
      } else {
        std::unique_lock<std::mutex> lock(mu_);
        if (pending_ == 0) done_cv_.notify_all();
      }
    }
  }

  std::mutex mu_;
  std::condition_variable cv_, done_cv_;
  std::vector<std::thread> threads_;
  const std::function<void(long)>* fn_ = nullptr;
  std::atomic<long> next_{0};
  long total_ = 0;
  long pending_ = 0;
  uint64_t generation_ = 0;
  bool stop_ = false;
};

Pool* g_pool = nullptr;
int g_pool_size = 0;

}  // namespace

void set_num_threads(int n) {
  if (n < 1) throw_config("thread count must be >= 1");
  g_threads = n;
}

int num_threads() { return g_threads; }

void parallel_for(long chunks, const std::function<void(long)>& fn) {
  if (chunks <= 0) return;
  if (g_threads == 1 || chunks == 1) {
    for (long i = 0; i < chunks; ++i) fn(i);
    return;
  }
  if (!g_pool || g_pool_size != g_threads) {
    delete g_pool;
    g_pool = new Pool(g_threads);
    g_pool_size = g_threads;
  }
  g_pool->run(chunks, fn);
}

}  // namespace wvc
