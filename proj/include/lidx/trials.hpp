#pragma once

#include <cstddef>
#include <exception>
#include <type_traits>
#include <vector>

#include <omp.h>

namespace lidx {

/// Reference runner: trials 0..n-1 in order.
template <typename F>
auto run_trials_serial(std::size_t n, F &&trial) -> std::vector<std::invoke_result_t<F &, std::size_t>> {
    std::vector<std::invoke_result_t<F &, std::size_t>> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(trial(i));
    return out;
}

/// Same results as run_trials_serial as long as each trial depends only on its
/// index. jobs <= 0 uses the OpenMP default. The first exception thrown by any
/// trial is rethrown after the loop.
template <typename F>
auto run_trials_parallel(std::size_t n, F &&trial, int jobs = 0) -> std::vector<std::invoke_result_t<F &, std::size_t>> {
    using R = std::invoke_result_t<F &, std::size_t>;
    std::vector<R> out(n);
    std::exception_ptr failure;
    const int threads = jobs > 0 ? jobs : omp_get_max_threads();
    const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (long long i = 0; i < count; ++i) {
        try {
            out[static_cast<std::size_t>(i)] = trial(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical(lidx_trial_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

template <typename F>
auto run_trials(std::size_t n, F &&trial, int jobs) {
    return jobs == 1 ? run_trials_serial(n, trial) : run_trials_parallel(n, trial, jobs);
}

} // namespace lidx
