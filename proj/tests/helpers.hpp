#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "compass/compass.hpp"

namespace testing_util {

inline compass::GridSpec grid(std::size_t nx, std::size_t ny, std::size_t nz, double mm = 2.0)
{
    compass::GridSpec g;
    g.dims = {nx, ny, nz};
    g.spacing_mm = {mm, mm, mm};
    g.origin_mm = {0.0, 0.0, 0.0};
    return g;
}

inline std::vector<double> random_values(std::size_t n, std::uint64_t seed, double lo = 0.0, double hi = 10.0)
{
    compass::CounterRng rng(seed, 7);
    std::vector<double> v(n);
    for (auto& x : v)
        x = rng.uniform(lo, hi);
    return v;
}

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag)
{
    static std::atomic<int> counter{0};
    auto p = std::filesystem::temp_directory_path() /
             ("compass_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

/// Small but complete cohort, quick to generate.
inline compass::CohortConfig small_cohort_config(int patients = 3, std::uint64_t seed = 7)
{
    compass::CohortConfig c;
    c.n_patients = patients;
    c.rng_seed = seed;
    return c;
}

} // namespace testing_util
