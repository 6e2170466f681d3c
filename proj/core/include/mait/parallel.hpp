#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace mait {

// Process-wide worker budget. Parallel sections split work by task index
// and every task owns its output slot, so results never depend on how many
// workers actually ran.
int thread_budget();
void set_thread_budget(int n);

inline int& detail_thread_budget() {
    static int budget = 1;
    return budget;
}

inline int thread_budget() { return detail_thread_budget(); }

inline void set_thread_budget(int n) { detail_thread_budget() = n < 1 ? 1 : n; }

inline void parallel_for(std::size_t n_tasks, const std::function<void(std::size_t)>& fn) {
    const int budget = thread_budget();
    if (budget <= 1 || n_tasks <= 1) {
        for (std::size_t i = 0; i < n_tasks; ++i) fn(i);
        return;
    }
    const std::size_t n_workers = std::min<std::size_t>(budget, n_tasks);
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n_tasks) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(n_workers);
    for (std::size_t t = 0; t < n_workers; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace mait
