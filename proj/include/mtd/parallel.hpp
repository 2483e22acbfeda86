#pragma once
// Tiny blocked parallel-for. Work is split by task index, never by data, so
// callers that write task-indexed slots get results independent of the thread
// count. threads <= 1 runs inline.

#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mtd {

inline int default_threads() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

template <class Fn>
void parallel_for(std::int64_t n_tasks, int threads, Fn&& fn) {
    if (n_tasks <= 0) return;
    if (threads > n_tasks) threads = static_cast<int>(n_tasks);
    if (threads <= 1) {
        for (std::int64_t i = 0; i < n_tasks; ++i) fn(i);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::exception_ptr err;
    std::mutex err_mtx;
    auto worker = [&] {
        for (;;) {
            std::int64_t i = next.fetch_add(1);
            if (i >= n_tasks) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mtx);
                if (!err) err = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace mtd
