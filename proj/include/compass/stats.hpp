#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace compass {

/// Not-a-value marker for undefined statistics (0/0, zero variance, missing).
inline constexpr double kSentinel = std::numeric_limits<double>::quiet_NaN();

inline bool is_sentinel(double v) noexcept { return std::isnan(v); }

namespace stats {

inline std::vector<double> sorted_descending(std::span<const double> v)
{
    std::vector<double> s(v.begin(), v.end());
    std::sort(s.begin(), s.end(), std::greater<>());
    return s;
}

/// Number of voxels making up the hottest `pct` percent: ceil(pct * n / 100), at least 1.
inline std::size_t hottest_count(unsigned pct, std::size_t n) noexcept
{
    const std::size_t k = (static_cast<std::size_t>(pct) * n + 99) / 100;
    return std::clamp<std::size_t>(k, 1, n);
}

/// Minimum value among the hottest `pct` percent of voxels (nearest-rank, DVH convention).
inline double hottest_min(std::span<const double> sorted_desc, unsigned pct) noexcept
{
    return sorted_desc[hottest_count(pct, sorted_desc.size()) - 1];
}

/// Percentage of voxels with value >= threshold.
inline double percent_at_least(std::span<const double> v, double threshold) noexcept
{
    std::size_t c = 0;
    for (double x : v)
        c += x >= threshold;
    return 100.0 * static_cast<double>(c) / static_cast<double>(v.size());
}

/// Percentage of voxels with value strictly > threshold.
inline double percent_above(std::span<const double> v, double threshold) noexcept
{
    std::size_t c = 0;
    for (double x : v)
        c += x > threshold;
    return 100.0 * static_cast<double>(c) / static_cast<double>(v.size());
}

inline double mean(std::span<const double> v) noexcept
{
    double s = 0.0;
    for (double x : v)
        s += x;
    return s / static_cast<double>(v.size());
}

/// Central moments with the population (divide-by-n) convention.
struct Moments {
    double mean = 0.0;
    double variance = 0.0;
    double skewness = kSentinel;
    double excess_kurtosis = kSentinel;
};

inline Moments moments(std::span<const double> v) noexcept
{
    Moments m;
    m.mean = mean(v);
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double x : v) {
        const double d = x - m.mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    const double n = static_cast<double>(v.size());
    m2 /= n;
    m3 /= n;
    m4 /= n;
    m.variance = m2;
    // Relative threshold: rounding noise on a constant array must read as zero variance.
    const double scale = std::max(1.0, m.mean * m.mean);
    if (m2 > 1e-24 * scale) {
        m.skewness = m3 / std::pow(m2, 1.5);
        m.excess_kurtosis = m4 / (m2 * m2) - 3.0;
    } else {
        m.variance = 0.0;
    }
    return m;
}

/// Linear-interpolation percentile on an ascending array, q in [0, 100].
inline double percentile_linear(std::span<const double> sorted_asc, double q) noexcept
{
    const double pos = q / 100.0 * static_cast<double>(sorted_asc.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted_asc.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted_asc[lo] + frac * (sorted_asc[hi] - sorted_asc[lo]);
}

/// Median of the non-sentinel entries; sentinel if there are none.
inline double median_ignoring_sentinel(std::span<const double> v)
{
    std::vector<double> s;
    s.reserve(v.size());
    for (double x : v)
        if (!is_sentinel(x))
            s.push_back(x);
    if (s.empty())
        return kSentinel;
    std::sort(s.begin(), s.end());
    return percentile_linear(s, 50.0);
}

} // namespace stats
} // namespace compass
