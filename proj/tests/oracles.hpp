#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

// Deliberately naive reference implementations: O(n^2) ranks, no shared helpers.
namespace oracle {

/// Value v in the array with #(x > v) < k <= #(x >= v), k = smallest k >= 1 with 100 k >= pct n.
inline double kth_largest_pct(std::span<const double> v, unsigned pct)
{
    const std::size_t n = v.size();
    std::size_t k = 1;
    while (100 * k < pct * n)
        ++k;
    if (k > n)
        k = n;
    for (double c : v) {
        std::size_t gt = 0, ge = 0;
        for (double x : v) {
            gt += x > c;
            ge += x >= c;
        }
        if (gt < k && k <= ge)
            return c;
    }
    return std::nan("");
}

inline double kth_largest(std::span<const double> v, std::size_t k)
{
    for (double c : v) {
        std::size_t gt = 0, ge = 0;
        for (double x : v) {
            gt += x > c;
            ge += x >= c;
        }
        if (gt < k && k <= ge)
            return c;
    }
    return std::nan("");
}

inline double pct_ge(std::span<const double> v, double t)
{
    std::size_t c = 0;
    for (double x : v)
        if (x >= t)
            ++c;
    return 100.0 * static_cast<double>(c) / static_cast<double>(v.size());
}

inline double pct_gt(std::span<const double> v, double t)
{
    std::size_t c = 0;
    for (double x : v)
        if (x > t)
            ++c;
    return 100.0 * static_cast<double>(c) / static_cast<double>(v.size());
}

struct Shape {
    double mean, var, skew, kurt;
};

inline Shape shape(std::span<const double> v)
{
    std::vector<double> s(v.begin(), v.end());
    std::sort(s.begin(), s.end());
    long double sum = 0;
    for (double x : s)
        sum += x;
    const long double n = static_cast<long double>(s.size());
    const long double mu = sum / n;
    long double m2 = 0, m3 = 0, m4 = 0;
    for (double x : s) {
        const long double d = x - mu;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    return {static_cast<double>(mu), static_cast<double>(m2), static_cast<double>(m3 / std::pow(m2, 1.5L)),
            static_cast<double>(m4 / (m2 * m2) - 3)};
}

/// Pairwise AUC: P(score_pos > score_neg) + 0.5 P(tie).
inline double pairwise_auc(std::span<const double> s, std::span<const int> y)
{
    double num = 0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
            if (y[i] == 1 && y[j] == 0) {
                ++pairs;
                num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
            }
    return num / static_cast<double>(pairs);
}

} // namespace oracle

#include "compass/gru_autoencoder.hpp"

namespace oracle {

struct GradCheck {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
};

/// Central differences on `n_params` randomly chosen coordinates of the batch loss.
/// Relative error uses max(|analytic|, |numeric|, floor) as the denominator.
inline GradCheck finite_difference_check(const compass::AutoencoderParams& p,
                                         std::span<const compass::SequenceView> batch,
                                         std::span<const compass::DropoutMask> drops, std::size_t n_params,
                                         std::uint64_t seed, double h = 1e-5, double floor = 1e-7)
{
    const auto lg = compass::loss_and_gradient(p, batch, drops);
    compass::CounterRng rng(seed, 0xfd);
    GradCheck out;
    auto q = p;
    for (std::size_t k = 0; k < n_params; ++k) {
        const auto i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(p.data.size()) - 1));
        const double orig = q.data[i];
        q.data[i] = orig + h;
        const double fp = compass::batch_loss(q, batch, drops);
        q.data[i] = orig - h;
        const double fm = compass::batch_loss(q, batch, drops);
        q.data[i] = orig;
        const double num = (fp - fm) / (2 * h), ana = lg.grad.data[i];
        const double den = std::max({std::abs(num), std::abs(ana), floor});
        out.max_rel_error = std::max(out.max_rel_error, std::abs(num - ana) / den);
        ++out.checked;
    }
    return out;
}

} // namespace oracle
