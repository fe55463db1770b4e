#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

namespace trapk {

/// Worker count from TRAPK_WORKERS, else the hardware concurrency.
inline unsigned default_worker_count() {
  if (const char* env = std::getenv("TRAPK_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Thrown when a replica fails; carries the failing replica index.
class ReplicaError : public std::runtime_error {
 public:
  ReplicaError(std::uint64_t index, const std::string& what)
      : std::runtime_error("replica " + std::to_string(index) + " failed: " + what), index_(index) {}
  std::uint64_t index() const { return index_; }

 private:
  std::uint64_t index_;
};

/// Evaluates `fn(i)` for every replica index in [0, count) on a fixed pool
/// of workers and returns the results in index order. Replicas are claimed
/// from a shared counter in chunks, so results never depend on the worker
/// count as long as `fn` depends only on its index.
template <class Fn>
auto run_replicas(std::uint64_t count, unsigned workers, Fn&& fn)
    -> std::vector<decltype(fn(std::uint64_t{}))> {
  using Result = decltype(fn(std::uint64_t{}));
  static_assert(!std::is_same_v<Result, bool>, "vector<bool> is not safe for concurrent writes");
  std::vector<Result> out(count);
  if (count == 0) return out;
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::min<std::uint64_t>(count, 1024))));

  if (workers == 1) {
    for (std::uint64_t i = 0; i < count; ++i) {
      try {
        out[i] = fn(i);
      } catch (const std::exception& e) {
        throw ReplicaError(i, e.what());
      }
    }
    return out;
  }

  constexpr std::uint64_t kChunk = 64;
  std::atomic<std::uint64_t> next{0};
  // Lowest failing index so far. Work below it always completes, so the
  // reported index is the lowest failing one whatever the interleaving.
  std::atomic<std::uint64_t> first_error{count};
  std::mutex error_mutex;
  std::string error_what;

  auto work = [&] {
    for (;;) {
      const std::uint64_t begin = next.fetch_add(kChunk);
      if (begin >= std::min(count, first_error.load())) return;
      const std::uint64_t end = std::min(count, begin + kChunk);
      for (std::uint64_t i = begin; i < end; ++i) {
        if (i >= first_error.load()) return;
        try {
          out[i] = fn(i);
        } catch (const std::exception& e) {
          std::lock_guard lock(error_mutex);
          if (i < first_error.load()) {
            first_error = i;
            error_what = e.what();
          }
          return;
        }
      }
    }
  };

  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  pool.clear();
  if (first_error < count) throw ReplicaError(first_error, error_what);
  return out;
}

template <class Fn>
auto run_replicas(std::uint64_t count, Fn&& fn) {
  return run_replicas(count, default_worker_count(), std::forward<Fn>(fn));
}

}  // namespace trapk
