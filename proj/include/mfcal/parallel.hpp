#pragma once

#include <cstddef>
#include <exception>
#include <vector>

#include <omp.h>

namespace mfcal {

/// Runs body(i) for i in [0, n). threads <= 1 is the serial reference path:
/// a plain loop with no OpenMP involvement. Otherwise iterations are spread
/// over an OpenMP team. Bodies must write only to index-owned state, so both
/// paths produce identical results. If any iteration throws, the exception
/// of the lowest failing index is rethrown after the loop.
template <typename Body>
void parallel_for(std::size_t n, int threads, Body&& body) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<long long>(n);
#pragma omp parallel for num_threads(threads) schedule(dynamic, 1)
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace mfcal
