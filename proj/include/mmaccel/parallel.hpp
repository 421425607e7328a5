#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace mmaccel {

/// Number of worker threads used by parallel loops. Defaults to the
/// MMACCEL_THREADS environment variable, else the hardware concurrency.
std::size_t thread_count();
void set_thread_count(std::size_t n);

/// Runs body(begin, end) over [0, n) split into fixed-size chunks. Chunk
/// boundaries depend only on n and `chunk`, never on the thread count.
void parallel_for(std::size_t n, std::size_t chunk,
                  const std::function<void(std::size_t, std::size_t)>& body);

/// Deterministic sum of per-chunk partial vectors: chunk c contributes
/// partial(c, begin, end, acc) into a zeroed accumulator of length `width`,
/// and chunk accumulators are added in chunk order.
std::vector<double> chunked_sum(
    std::size_t n, std::size_t width,
    const std::function<void(std::size_t, std::size_t, double*)>& partial);

inline constexpr std::size_t kDefaultChunk = 4096;

}  // namespace mmaccel
