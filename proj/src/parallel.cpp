#include "tpbs/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace tpbs {

namespace {
std::atomic<unsigned> g_threads{1};
}

void set_num_threads(unsigned count) { g_threads.store(std::max(1u, count)); }

unsigned num_threads() { return g_threads.load(); }

std::size_t chunk_count(std::size_t count) {
    if (count == 0) return 0;
    return std::min<std::size_t>(count, num_threads());
}

void parallel_chunks(std::size_t count,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body) {
    const std::size_t chunks = chunk_count(count);
    if (chunks == 0) return;
    auto bounds = [&](std::size_t c) { return c * count / chunks; };
    if (chunks == 1) {
        body(0, 0, count);
        return;
    }
    std::vector<std::jthread> workers;
    workers.reserve(chunks - 1);
    for (std::size_t c = 1; c < chunks; ++c)
        workers.emplace_back([&, c] { body(c, bounds(c), bounds(c + 1)); });
    body(0, bounds(0), bounds(1));
}

}  // namespace tpbs
