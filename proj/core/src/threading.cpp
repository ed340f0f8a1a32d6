#include "attribroi/threading.hpp"

#include <cstdlib>
#include <thread>
#include <vector>

namespace attribroi {

std::size_t worker_threads() {
    static const std::size_t cached = [] {
        const char* env = std::getenv("ATTRIBROI_THREADS");
        if (env != nullptr) {
            const long v = std::atol(env);
            if (v > 0) return static_cast<std::size_t>(v);
        }
        const unsigned hc = std::thread::hardware_concurrency();
        return static_cast<std::size_t>(hc == 0 ? 1 : hc);
    }();
    return cached;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min(worker_threads(), count);
    if (workers <= 1 || count < 4) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(begin + chunk, count);
        if (begin >= end) break;
        pool.emplace_back([&, begin, end] {
            for (std::size_t i = begin; i < end; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace attribroi
