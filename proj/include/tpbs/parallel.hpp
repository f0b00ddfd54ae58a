#pragma once

#include <cstddef>
#include <functional>

namespace tpbs {

/// Caps the number of worker threads used inside the library. 0 or 1 means
/// everything runs on the calling thread.
void set_num_threads(unsigned count);
unsigned num_threads();

/// Splits [0, count) into contiguous chunks, one per worker, and calls
/// body(chunk_index, begin, end) for each. Chunk boundaries depend only on
/// `count` and the configured thread count, so reductions performed in chunk
/// order are reproducible run to run.
void parallel_chunks(std::size_t count,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body);

/// Number of chunks parallel_chunks will produce for `count` items.
std::size_t chunk_count(std::size_t count);

}  // namespace tpbs
