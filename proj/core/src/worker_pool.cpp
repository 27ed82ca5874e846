#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "selfbias/pipeline.hpp"

namespace selfbias::pipeline {

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    {
        std::vector<std::jthread> pool;
        pool.reserve(count);
        for (std::size_t w = 0; w < count; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mu);
                        if (!failure) failure = std::current_exception();
                        next = n;
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

namespace {

template <typename T>
std::vector<T> map_sorted(std::span<const TaskSpec> tasks, int workers, const std::function<T(const TaskSpec&)>& fn) {
    std::vector<T> out(tasks.size());
    parallel_for(tasks.size(), workers, [&](std::size_t i) { out[i] = fn(tasks[i]); });
    std::stable_sort(out.begin(), out.end(), [](const T& a, const T& b) { return a.sample_id < b.sample_id; });
    return out;
}

}  // namespace

std::vector<Trajectory> map_trajectories(std::span<const TaskSpec> tasks, int workers,
                                         const std::function<Trajectory(const TaskSpec&)>& fn) {
    return map_sorted<Trajectory>(tasks, workers, fn);
}

std::vector<SelectionRecord> map_selections(std::span<const TaskSpec> tasks, int workers,
                                            const std::function<SelectionRecord(const TaskSpec&)>& fn) {
    return map_sorted<SelectionRecord>(tasks, workers, fn);
}

}  // namespace selfbias::pipeline
