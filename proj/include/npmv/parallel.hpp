#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace npmv {

/// Worker count from NPMV_THREADS, else hardware concurrency (at least 1).
inline unsigned default_thread_count() {
    if (const char* env = std::getenv("NPMV_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v >= 1) return static_cast<unsigned>(v);
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, count). Each index is handled exactly once; callers
/// write results into per-index slots, so output order never depends on scheduling.
template <typename Body>
void parallel_for(std::size_t count, Body&& body, unsigned threads = default_thread_count()) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned w = 0; w < threads; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        body(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

/// SplitMix64 finalizer; used to derive independent stream seeds from a master seed.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
    return mix64(master + mix64(stream));
}

}  // namespace npmv
