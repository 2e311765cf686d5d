#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace fbspec {

// Maps fn over 0..count−1 on a fixed number of threads. Results come back in
// index order, so output does not depend on scheduling. The exception of the
// lowest failing index is rethrown.
class WorkerPool {
public:
  explicit WorkerPool(int workers = 1) : workers_(std::max(1, workers)) {}
  int workers() const { return workers_; }

  template <class Fn>
  auto operator()(int count, Fn fn) const {
    using R = decltype(fn(0));
    std::vector<std::optional<R>> slots(std::max(0, count));
    std::vector<std::exception_ptr> errors(slots.size());
    std::atomic<int> next{0};
    auto work = [&]() {
      for(int i = next++; i < count; i = next++) {
        try {
          slots[i].emplace(fn(i));
        } catch(...) {
          errors[i] = std::current_exception();
        }
      }
    };
    int threads = std::min(workers_, count);
    if(threads <= 1) {
      work();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(threads);
      for(int t = 0; t < threads; ++t) pool.emplace_back(work);
      for(auto& th : pool) th.join();
    }
    for(auto& e : errors) {
      if(e) std::rethrow_exception(e);
    }
    std::vector<R> out;
    out.reserve(slots.size());
    for(auto& s : slots) out.push_back(std::move(*s));
    return out;
  }

private:
  int workers_;
};

}  // namespace fbspec
