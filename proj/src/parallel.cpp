#include "simplicits/parallel.hpp"

#include <omp.h>

#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>

namespace simplicits {

namespace {

int initial_thread_count() {
  if (const char* env = std::getenv("SIMPLICITS_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (...) {
      // fall through to the OpenMP default
    }
  }
  return omp_get_max_threads();
}

std::atomic<int>& thread_cap() {
  static std::atomic<int> cap{initial_thread_count()};
  return cap;
}

} // namespace

int thread_count() { return thread_cap().load(std::memory_order_relaxed); }

void set_thread_count(int n) { thread_cap().store(n < 1 ? 1 : n, std::memory_order_relaxed); }

namespace detail {

void parallel_for_impl(std::size_t n, void (*thunk)(void*, std::size_t), void* ctx) {
  const auto count = static_cast<long long>(n);
  std::exception_ptr first_error;
#pragma omp parallel for schedule(dynamic, 1) num_threads(thread_count())
  for (long long i = 0; i < count; ++i) {
    try {
      thunk(ctx, static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(simplicits_parallel_error)
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

} // namespace detail
} // namespace simplicits
