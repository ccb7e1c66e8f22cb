#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "compass/biodose.hpp"
#include "compass/cohort.hpp"
#include "compass/stats.hpp"
#include "compass/volume.hpp"

namespace compass {

inline constexpr std::size_t kFeatureCount = 73;

/// Feature groups in table order with their sizes.
struct FeatureGroup {
    std::string_view name;
    std::size_t offset;
    std::size_t size;
};

inline constexpr std::array<FeatureGroup, 7> kFeatureGroups{{{"DVH", 0, 10},
                                                              {"Dosiomics", 10, 25},
                                                              {"PlanQuality", 35, 4},
                                                              {"TemporalKinetics", 39, 2},
                                                              {"Geometric", 41, 2},
                                                              {"CTIntensity", 43, 15},
                                                              {"PETIntensity", 58, 15}}};

// Dosiomic grid: hottest-x% doses and >x%-of-max volumes.
inline constexpr std::array<unsigned, 13> kDxpPercents{2, 5, 10, 20, 30, 40, 50, 60, 70, 80, 90, 95, 98};
inline constexpr std::array<unsigned, 9> kVxpMaxPercents{10, 20, 30, 40, 50, 60, 70, 80, 90};

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames{
    // DVH on cumulative EQD2
    "Dmax", "Dmean", "Dmin", "D5", "D50", "D95", "D2cc", "V5", "V10", "V20",
    // Dosiomics on per-fraction physical dose
    "D2p", "D5p", "D10p", "D20p", "D30p", "D40p", "D50p", "D60p", "D70p", "D80p", "D90p", "D95p", "D98p",
    "V10pMax", "V20pMax", "V30pMax", "V40pMax", "V50pMax", "V60pMax", "V70pMax", "V80pMax", "V90pMax",
    "dose_skewness", "dose_kurtosis", "dose_cv",
    // Plan quality on cumulative EQD2
    "HI_percentile", "HI_max_mean", "CI_95", "GI_50_90",
    // Temporal kinetics
    "dDmean_EQD2", "interfraction_days",
    // Geometric
    "organ_volume_cc", "hotspot_pct",
    // CT first-order
    "CT_mean", "CT_std", "CT_min", "CT_max", "CT_median", "CT_p10", "CT_p25", "CT_p50", "CT_p75", "CT_p90",
    "CT_skewness", "CT_kurtosis", "CT_entropy", "CT_energy", "CT_uniformity",
    // PET first-order
    "PET_mean", "PET_std", "PET_min", "PET_max", "PET_median", "PET_p10", "PET_p25", "PET_p50", "PET_p75",
    "PET_p90", "PET_skewness", "PET_kurtosis", "PET_entropy", "PET_energy", "PET_uniformity"};

/// FNV-1a over the ordered names; stamps model files with the layout they were trained on.
inline std::uint64_t feature_spec_hash()
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto name : kFeatureNames) {
        for (char c : name) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
        h ^= 0x2c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

struct FeatureVector {
    std::string patient_id;
    OrganId organ = OrganId::Heart;
    int fraction_index = 1;
    std::array<double, kFeatureCount> values{};

    friend bool operator==(const FeatureVector& a, const FeatureVector& b)
    {
        if (a.patient_id != b.patient_id || a.organ != b.organ || a.fraction_index != b.fraction_index)
            return false;
        for (std::size_t i = 0; i < kFeatureCount; ++i)
            if (!(a.values[i] == b.values[i] || (is_sentinel(a.values[i]) && is_sentinel(b.values[i]))))
                return false;
        return true;
    }
};

// ---------------------------------------------------------------------------
// Per-block extractors
// ---------------------------------------------------------------------------

/// Dmax, Dmean, Dmin, D5, D50, D95, D2cc, V5, V10, V20.
inline std::array<double, 10> dvh_features(std::span<const double> cum_eqd2, double voxel_cc)
{
    require(!cum_eqd2.empty(), "dvh_features: empty ROI");
    require(voxel_cc > 0.0, "dvh_features: voxel volume must be > 0");
    const auto desc = stats::sorted_descending(cum_eqd2);
    const std::size_t n = desc.size();
    // The epsilon keeps 2 / 0.008 from rounding up to 251 voxels.
    auto k2cc = static_cast<std::size_t>(std::ceil(2.0 / voxel_cc - 1e-9));
    k2cc = std::clamp<std::size_t>(k2cc, 1, n);
    return {desc.front(),
            stats::mean(cum_eqd2),
            desc.back(),
            stats::hottest_min(desc, 5),
            stats::hottest_min(desc, 50),
            stats::hottest_min(desc, 95),
            desc[k2cc - 1],
            stats::percent_at_least(cum_eqd2, 5.0),
            stats::percent_at_least(cum_eqd2, 10.0),
            stats::percent_at_least(cum_eqd2, 20.0)};
}

/// 13 hottest-x% doses, 9 >x%-of-max volumes, then skewness, excess kurtosis, CV.
inline std::array<double, 25> dosiomic_features(std::span<const double> fraction_dose)
{
    require(!fraction_dose.empty(), "dosiomic_features: empty ROI");
    std::array<double, 25> out{};
    const auto desc = stats::sorted_descending(fraction_dose);
    for (std::size_t i = 0; i < kDxpPercents.size(); ++i)
        out[i] = stats::hottest_min(desc, kDxpPercents[i]);
    const double dmax = desc.front();
    for (std::size_t i = 0; i < kVxpMaxPercents.size(); ++i)
        out[13 + i] = dmax > 0.0 ? stats::percent_above(fraction_dose, kVxpMaxPercents[i] / 100.0 * dmax) : 0.0;
    if (dmax > 0.0) {
        const auto m = stats::moments(fraction_dose);
        out[22] = m.skewness;
        out[23] = m.excess_kurtosis;
        out[24] = std::sqrt(m.variance) / m.mean;
    } else {
        out[22] = out[23] = out[24] = kSentinel;
    }
    return out;
}

/// Percentile homogeneity, max/mean homogeneity, conformity (>= 95% Dmax), gradient (50%/90% of Dmax).
inline std::array<double, 4> plan_quality(std::span<const double> cum_eqd2)
{
    require(!cum_eqd2.empty(), "plan_quality: empty ROI");
    const auto desc = stats::sorted_descending(cum_eqd2);
    const double d50 = stats::hottest_min(desc, 50);
    const double dmax = desc.front();
    const double dmean = stats::mean(cum_eqd2);
    std::array<double, 4> out{kSentinel, kSentinel, kSentinel, kSentinel};
    if (d50 > 0.0)
        out[0] = (stats::hottest_min(desc, 2) - stats::hottest_min(desc, 98)) / d50;
    if (dmean > 0.0)
        out[1] = dmax / dmean;
    if (dmax > 0.0) {
        out[2] = stats::percent_at_least(cum_eqd2, 0.95 * dmax) / 100.0;
        const double f90 = stats::percent_at_least(cum_eqd2, 0.90 * dmax);
        if (f90 > 0.0)
            out[3] = stats::percent_at_least(cum_eqd2, 0.50 * dmax) / f90;
    }
    return out;
}

/// Change in cumulative mean EQD2 and the gap since the previous fraction; t is 1-based.
inline std::array<double, 2> temporal_kinetics(std::span<const double> cum_mean_eqd2, std::span<const double> times_days,
                                               std::size_t t)
{
    require(t >= 1 && t <= cum_mean_eqd2.size() && t <= times_days.size(), "temporal_kinetics: t out of range");
    for (std::size_t i = 1; i < t; ++i)
        require(times_days[i] > times_days[i - 1], "temporal_kinetics: times must be strictly increasing");
    const double prev = t == 1 ? 0.0 : cum_mean_eqd2[t - 2];
    const double gap = t == 1 ? 0.0 : times_days[t - 1] - times_days[t - 2];
    return {cum_mean_eqd2[t - 1] - prev, gap};
}

/// Organ volume (cc) and % of voxels strictly above 80% of the fraction's Dmax.
inline std::array<double, 2> geometric_features(const OrganMask& mask, std::span<const double> fraction_dose)
{
    require(!fraction_dose.empty(), "geometric_features: empty ROI");
    double dmax = 0.0;
    for (double d : fraction_dose)
        dmax = std::max(dmax, d);
    return {organ_volume_cc(mask), dmax > 0.0 ? stats::percent_above(fraction_dose, 0.8 * dmax) : 0.0};
}

inline constexpr std::size_t kHistogramBins = 64;

/// mean, std, min, max, median, P10, P25, P50, P75, P90, skewness, kurtosis, entropy, energy, uniformity.
inline std::array<double, 15> intensity_firstorder(std::span<const double> vals)
{
    require(!vals.empty(), "intensity_firstorder: empty ROI");
    std::vector<double> asc(vals.begin(), vals.end());
    std::sort(asc.begin(), asc.end());
    const auto m = stats::moments(vals);
    const double lo = asc.front(), hi = asc.back();

    double entropy = 0.0, uniformity = 1.0;
    if (hi > lo && m.variance > 0.0) {
        std::array<std::size_t, kHistogramBins> hist{};
        const double width = (hi - lo) / static_cast<double>(kHistogramBins);
        for (double v : vals) {
            auto b = static_cast<std::size_t>((v - lo) / width);
            hist[std::min(b, kHistogramBins - 1)]++;
        }
        uniformity = 0.0;
        const double n = static_cast<double>(vals.size());
        for (auto c : hist) {
            if (c == 0)
                continue;
            const double p = static_cast<double>(c) / n;
            entropy -= p * std::log2(p);
            uniformity += p * p;
        }
    }
    double energy = 0.0;
    for (double v : vals)
        energy += v * v;
    return {m.mean,
            std::sqrt(m.variance),
            lo,
            hi,
            stats::percentile_linear(asc, 50.0),
            stats::percentile_linear(asc, 10.0),
            stats::percentile_linear(asc, 25.0),
            stats::percentile_linear(asc, 50.0),
            stats::percentile_linear(asc, 75.0),
            stats::percentile_linear(asc, 90.0),
            m.skewness,
            m.excess_kurtosis,
            entropy,
            energy,
            uniformity};
}

// ---------------------------------------------------------------------------
// Observation assembly
// ---------------------------------------------------------------------------

/// Feature vectors for fractions 1..t of one organ trajectory.
inline std::vector<FeatureVector> assemble_prefix(const PatientCase& pc, OrganId organ, std::size_t t)
{
    require(t >= 1 && t <= pc.fractions.size(), "assemble_observation: fraction " + std::to_string(t) +
                                                    " does not exist for patient " + pc.patient_id);
    const OrganMask& mask = pc.mask(organ);
    const double voxel_cc = mask.grid().voxel_volume_cc();
    BedAccumulator acc(BioDoseParams::for_organ(organ));
    std::vector<double> cum_means, times;
    std::vector<FeatureVector> out;
    out.reserve(t);
    for (std::size_t f = 0; f < t; ++f) {
        const auto& fr = pc.fractions[f];
        acc.add_fraction(fr.dose);
        const auto cum = masked_values(acc.cumulative_eqd2(), mask);
        const auto dose = masked_values(fr.dose, mask);
        cum_means.push_back(stats::mean(cum));
        times.push_back(fr.time_offset_days);

        FeatureVector fv;
        fv.patient_id = pc.patient_id;
        fv.organ = organ;
        fv.fraction_index = fr.fraction_index;
        auto put = [&, pos = std::size_t{0}](const auto& block) mutable {
            for (double v : block)
                fv.values[pos++] = v;
        };
        put(dvh_features(cum, voxel_cc));
        put(dosiomic_features(dose));
        put(plan_quality(cum));
        put(temporal_kinetics(cum_means, times, f + 1));
        put(geometric_features(mask, dose));
        put(intensity_firstorder(masked_values(fr.ct, mask)));
        put(intensity_firstorder(masked_values(fr.pet, mask)));
        out.push_back(std::move(fv));
    }
    return out;
}

inline FeatureVector assemble_observation(const PatientCase& pc, OrganId organ, std::size_t t)
{
    return assemble_prefix(pc, organ, t).back();
}

/// Every (patient, organ, fraction) observation, ordered by patient, organ, fraction.
inline std::vector<FeatureVector> extract_features(const Cohort& cohort)
{
    std::vector<std::vector<FeatureVector>> parts(cohort.size() * kAllOrgans.size());
    parallel_for(parts.size(), [&](std::size_t i) {
        const auto& pc = cohort[i / kAllOrgans.size()];
        parts[i] = assemble_prefix(pc, kAllOrgans[i % kAllOrgans.size()], pc.fractions.size());
    });
    std::vector<FeatureVector> all;
    for (auto& p : parts)
        all.insert(all.end(), p.begin(), p.end());
    return all;
}

// ---------------------------------------------------------------------------
// CSV export
// ---------------------------------------------------------------------------

inline std::string format_number(double v)
{
    if (is_sentinel(v))
        return {};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_feature_csv(std::span<const FeatureVector> rows, std::ostream& out)
{
    out << "patient_id,organ,fraction";
    for (auto n : kFeatureNames)
        out << ',' << n;
    out << '\n';
    for (const auto& r : rows) {
        out << r.patient_id << ',' << to_string(r.organ) << ',' << r.fraction_index;
        for (double v : r.values)
            out << ',' << format_number(v);
        out << '\n';
    }
}

inline void write_feature_csv(std::span<const FeatureVector> rows, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw DataError("cannot write " + path.string());
    write_feature_csv(rows, out);
}

} // namespace compass
