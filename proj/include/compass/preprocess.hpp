#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "compass/features.hpp"
#include "compass/stats.hpp"

namespace compass {

/// Row-major observation matrix (rows = observations, columns = features).
using FeatureMatrix = std::vector<std::vector<double>>;

inline constexpr double kCullThreshold = 0.90;

namespace detail {

/// Average (fractional) ranks, ties share their mean rank.
inline std::vector<double> average_ranks(std::span<const double> v)
{
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]])
            ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

inline double pearson(std::span<const double> a, std::span<const double> b)
{
    const double ma = stats::mean(a), mb = stats::mean(b);
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0)
        return kSentinel;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

inline std::optional<double> try_spearman(std::span<const double> a, std::span<const double> b)
{
    std::vector<double> ca, cb;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!is_sentinel(a[i]) && !is_sentinel(b[i])) {
            ca.push_back(a[i]);
            cb.push_back(b[i]);
        }
    if (ca.size() < 2)
        return std::nullopt;
    return pearson(average_ranks(ca), average_ranks(cb));
}

inline std::vector<double> column(const FeatureMatrix& m, std::size_t j)
{
    std::vector<double> c;
    c.reserve(m.size());
    for (const auto& row : m)
        c.push_back(row[j]);
    return c;
}

} // namespace detail

/// Spearman correlation over pairwise-complete entries; sentinel if either side is constant.
inline double spearman_rho(std::span<const double> a, std::span<const double> b)
{
    require(a.size() == b.size(), "spearman_rho: length mismatch");
    auto r = detail::try_spearman(a, b);
    require(r.has_value(), "spearman_rho: fewer than 2 complete pairs");
    return *r;
}

/// Keep-earlier redundancy culling on |rho| > 0.90. All-sentinel and constant
/// columns are dropped outright. Returns sorted kept column indices.
inline std::vector<std::size_t> fit_culler(const FeatureMatrix& train)
{
    require(!train.empty(), "fit_culler: empty training set");
    const std::size_t nf = train.front().size();
    std::vector<std::vector<double>> cols(nf);
    for (std::size_t j = 0; j < nf; ++j)
        cols[j] = detail::column(train, j);

    std::vector<std::size_t> kept;
    for (std::size_t j = 0; j < nf; ++j) {
        double lo = INFINITY, hi = -INFINITY;
        for (double v : cols[j])
            if (!is_sentinel(v)) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        if (!(hi > lo))
            continue; // all sentinel or constant
        bool redundant = false;
        for (std::size_t i : kept) {
            auto rho = detail::try_spearman(cols[i], cols[j]);
            if (rho && !is_sentinel(*rho) && std::abs(*rho) > kCullThreshold) {
                redundant = true;
                break;
            }
        }
        if (!redundant)
            kept.push_back(j);
    }
    return kept;
}

/// Per-column training medians over non-sentinel entries.
inline std::vector<double> fit_imputer(const FeatureMatrix& train)
{
    require(!train.empty(), "fit_imputer: empty training set");
    std::vector<double> med(train.front().size());
    for (std::size_t j = 0; j < med.size(); ++j) {
        med[j] = stats::median_ignoring_sentinel(detail::column(train, j));
        require(!is_sentinel(med[j]), "fit_imputer: column " + std::to_string(j) + " has no training values");
    }
    return med;
}

inline void apply_imputer(FeatureMatrix& m, std::span<const double> medians)
{
    for (auto& row : m)
        for (std::size_t j = 0; j < row.size(); ++j)
            if (is_sentinel(row[j]))
                row[j] = medians[j];
}

struct ScalerParams {
    std::vector<double> means;
    std::vector<double> stds; // population convention

    friend bool operator==(const ScalerParams&, const ScalerParams&) = default;
};

inline ScalerParams fit_scaler(const FeatureMatrix& train)
{
    require(!train.empty(), "fit_scaler: empty training set");
    ScalerParams s;
    const std::size_t nf = train.front().size();
    s.means.resize(nf);
    s.stds.resize(nf);
    const double n = static_cast<double>(train.size());
    for (std::size_t j = 0; j < nf; ++j) {
        double sum = 0;
        for (const auto& r : train)
            sum += r[j];
        const double mu = sum / n;
        double ss = 0;
        for (const auto& r : train)
            ss += (r[j] - mu) * (r[j] - mu);
        s.means[j] = mu;
        s.stds[j] = std::sqrt(ss / n);
    }
    return s;
}

inline double scale_value(double v, double mean, double sd) noexcept
{
    return (v - mean) / (sd > 0.0 ? sd : 1.0);
}

inline void apply_scaler(FeatureMatrix& m, const ScalerParams& s)
{
    for (auto& row : m)
        for (std::size_t j = 0; j < row.size(); ++j)
            row[j] = scale_value(row[j], s.means[j], s.stds[j]);
}

// ---------------------------------------------------------------------------
// Fold-scoped preprocessing model
// ---------------------------------------------------------------------------

struct PreprocessModel {
    std::vector<std::size_t> kept_feature_indices;
    std::vector<double> medians; // per kept feature
    ScalerParams scaler;         // per kept feature
    std::vector<std::string> fitted_on;

    std::size_t width() const noexcept { return kept_feature_indices.size(); }

    friend bool operator==(const PreprocessModel&, const PreprocessModel&) = default;
};

inline FeatureMatrix to_matrix(std::span<const FeatureVector> obs)
{
    FeatureMatrix m;
    m.reserve(obs.size());
    for (const auto& o : obs)
        m.emplace_back(o.values.begin(), o.values.end());
    return m;
}

inline FeatureMatrix select_columns(const FeatureMatrix& m, std::span<const std::size_t> cols)
{
    FeatureMatrix out;
    out.reserve(m.size());
    for (const auto& r : m) {
        std::vector<double> row;
        row.reserve(cols.size());
        for (auto c : cols)
            row.push_back(r[c]);
        out.push_back(std::move(row));
    }
    return out;
}

/// Cull, impute, scale, fitted on training observations only.
inline PreprocessModel fit_preprocess(std::span<const FeatureVector> train)
{
    require(train.size() >= 2, "fit_preprocess: need at least 2 training observations");
    PreprocessModel pm;
    std::set<std::string> ids;
    for (const auto& o : train)
        ids.insert(o.patient_id);
    pm.fitted_on.assign(ids.begin(), ids.end());
    const auto raw = to_matrix(train);
    pm.kept_feature_indices = fit_culler(raw);
    auto kept = select_columns(raw, pm.kept_feature_indices);
    pm.medians = fit_imputer(kept);
    apply_imputer(kept, pm.medians);
    pm.scaler = fit_scaler(kept);
    return pm;
}

struct ProcessedObservation {
    std::string patient_id;
    OrganId organ = OrganId::Heart;
    int fraction_index = 1;
    std::vector<double> values;
};

inline ProcessedObservation apply_preprocess(const PreprocessModel& pm, const FeatureVector& fv)
{
    ProcessedObservation po{fv.patient_id, fv.organ, fv.fraction_index, {}};
    po.values.reserve(pm.width());
    for (std::size_t k = 0; k < pm.width(); ++k) {
        double v = fv.values[pm.kept_feature_indices[k]];
        if (is_sentinel(v))
            v = pm.medians[k];
        po.values.push_back(scale_value(v, pm.scaler.means[k], pm.scaler.stds[k]));
    }
    return po;
}

inline std::vector<ProcessedObservation> apply_preprocess(const PreprocessModel& pm, std::span<const FeatureVector> obs)
{
    std::vector<ProcessedObservation> out;
    out.reserve(obs.size());
    for (const auto& o : obs)
        out.push_back(apply_preprocess(pm, o));
    return out;
}

inline nlohmann::json preprocess_to_json(const PreprocessModel& pm)
{
    nlohmann::json j;
    j["kept_feature_indices"] = pm.kept_feature_indices;
    std::vector<std::string> names;
    for (auto i : pm.kept_feature_indices)
        names.emplace_back(kFeatureNames[i]);
    j["kept_feature_names"] = names;
    j["medians"] = pm.medians;
    j["means"] = pm.scaler.means;
    j["stds"] = pm.scaler.stds;
    j["fitted_on"] = pm.fitted_on;
    j["cull_threshold_abs_rho"] = kCullThreshold;
    return j;
}

// ---------------------------------------------------------------------------
// Padded sequences
// ---------------------------------------------------------------------------

struct SequenceId {
    std::string patient_id;
    OrganId organ = OrganId::Heart;

    friend auto operator<=>(const SequenceId&, const SequenceId&) = default;
};

/// (sequences x max_fractions x features), zero-padded, with a validity mask.
struct FeatureSequence {
    std::vector<SequenceId> ids;
    std::size_t max_fractions = 0;
    std::size_t n_features = 0;
    std::vector<double> tensor;
    std::vector<std::uint8_t> valid; // sequences x max_fractions
    std::vector<std::size_t> lengths;

    std::size_t size() const noexcept { return ids.size(); }

    double at(std::size_t s, std::size_t t, std::size_t f) const noexcept
    {
        return tensor[(s * max_fractions + t) * n_features + f];
    }
    double& at(std::size_t s, std::size_t t, std::size_t f) noexcept
    {
        return tensor[(s * max_fractions + t) * n_features + f];
    }
    bool is_valid(std::size_t s, std::size_t t) const noexcept { return valid[s * max_fractions + t] != 0; }

    /// Row s as a contiguous (max_fractions x n_features) span.
    std::span<const double> row(std::size_t s) const noexcept
    {
        return std::span<const double>(tensor).subspan(s * max_fractions * n_features, max_fractions * n_features);
    }
};

/// Groups by (patient, organ), sorts by fraction, pads with zeros.
/// max_fractions = 0 uses the longest trajectory.
inline FeatureSequence build_sequences(std::span<const ProcessedObservation> obs, std::size_t max_fractions = 0)
{
    require(!obs.empty(), "build_sequences: no observations");
    std::map<SequenceId, std::vector<const ProcessedObservation*>> groups;
    const std::size_t nf = obs.front().values.size();
    for (const auto& o : obs) {
        require(o.values.size() == nf, "build_sequences: inconsistent feature width");
        groups[{o.patient_id, o.organ}].push_back(&o);
    }
    std::size_t longest = 0;
    for (auto& [id, g] : groups) {
        std::sort(g.begin(), g.end(), [](auto a, auto b) { return a->fraction_index < b->fraction_index; });
        for (std::size_t t = 0; t < g.size(); ++t)
            require(g[t]->fraction_index == static_cast<int>(t) + 1,
                    "build_sequences: trajectory " + id.patient_id + "/" + std::string(to_string(id.organ)) +
                        " is missing fraction " + std::to_string(t + 1));
        longest = std::max(longest, g.size());
    }
    if (max_fractions == 0)
        max_fractions = longest;
    require(longest <= max_fractions, "build_sequences: trajectory longer than max_fractions");

    FeatureSequence fs;
    fs.max_fractions = max_fractions;
    fs.n_features = nf;
    fs.tensor.assign(groups.size() * max_fractions * nf, 0.0);
    fs.valid.assign(groups.size() * max_fractions, 0);
    std::size_t s = 0;
    for (auto& [id, g] : groups) {
        fs.ids.push_back(id);
        fs.lengths.push_back(g.size());
        for (std::size_t t = 0; t < g.size(); ++t) {
            fs.valid[s * max_fractions + t] = 1;
            for (std::size_t f = 0; f < nf; ++f)
                fs.at(s, t, f) = g[t]->values[f];
        }
        ++s;
    }
    return fs;
}

} // namespace compass
