#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace sgan {

inline constexpr double kPi = 3.14159265358979323846;

// Error categories; the CLI maps each to a distinct exit code.
struct ConfigError : std::runtime_error { using std::runtime_error::runtime_error; };
struct IoError : std::runtime_error { using std::runtime_error::runtime_error; };
struct DataError : std::runtime_error { using std::runtime_error::runtime_error; };
struct NumericError : std::runtime_error { using std::runtime_error::runtime_error; };

namespace detail {
inline int& thread_count_slot() {
  static int n = 0;
  return n;
}
}  // namespace detail

// 0 = auto (hardware concurrency).
inline void set_thread_count(int n) { detail::thread_count_slot() = n; }

inline int thread_count() {
  if (int n = detail::thread_count_slot(); n > 0) return n;
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Extra per-op finite checks. Defaults to on in debug builds; tests enable it
// explicitly.
inline bool& debug_checks() {
#ifdef NDEBUG
  static bool on = false;
#else
  static bool on = true;
#endif
  return on;
}

// Runs body(begin, end) over a contiguous partition of [0, n). Callers must
// guarantee disjoint writes; the partition depends only on n and the thread
// count, and results must not depend on it.
inline void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& body) {
  if (n <= 0) return;
  int workers = thread_count();
  if (workers <= 1 || n == 1) {
    body(0, n);
    return;
  }
  int chunks = static_cast<int>(std::min<int64_t>(workers, n));
  int64_t per = (n + chunks - 1) / chunks;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(chunks));
  for (int i = 0; i < chunks; ++i) {
    int64_t b = i * per;
    int64_t e = std::min<int64_t>(n, b + per);
    if (b >= e) break;
    pool.emplace_back([&body, b, e] { body(b, e); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace sgan
