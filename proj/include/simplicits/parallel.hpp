#pragma once

#include <cstddef>
#include <type_traits>
#include <utility>
#include <vector>

namespace simplicits {

/// Execution policy for the data-parallel kernels. Both policies partition work
/// into the same fixed-size chunks and reduce partial results in the same
/// order, so `serial` and `parallel` produce bitwise-identical output.
enum class Exec { serial, parallel };

/// Worker cap. Defaults to the OpenMP maximum, overridden by the
/// SIMPLICITS_THREADS environment variable or set_thread_count().
int thread_count();
void set_thread_count(int n);

inline constexpr std::size_t kPointChunk = 256;

inline std::size_t chunk_count(std::size_t n, std::size_t chunk = kPointChunk) {
  return (n + chunk - 1) / chunk;
}

namespace detail {
void parallel_for_impl(std::size_t n, void (*thunk)(void*, std::size_t), void* ctx);
}

/// Runs body(i) for i in [0, n). Iterations must be independent.
template <class Body>
void for_each_index(Exec exec, std::size_t n, Body&& body) {
  if (exec == Exec::serial || n < 2 || thread_count() < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  using B = std::remove_reference_t<Body>;
  detail::parallel_for_impl(
      n, [](void* ctx, std::size_t i) { (*static_cast<B*>(ctx))(i); },
      const_cast<void*>(static_cast<const void*>(&body)));
}

/// Pairwise tree sum of per-chunk partials. Fixed shape for a given count.
template <class T>
T tree_sum(std::vector<T> parts) {
  if (parts.empty()) return T{};
  for (std::size_t stride = 1; stride < parts.size(); stride *= 2) {
    for (std::size_t i = 0; i + stride < parts.size(); i += 2 * stride) {
      parts[i] += parts[i + stride];
    }
  }
  return std::move(parts.front());
}

} // namespace simplicits
