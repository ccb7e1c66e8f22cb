#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "compass/biodose.hpp"
#include "compass/parallel.hpp"
#include "compass/rng.hpp"
#include "compass/stats.hpp"
#include "compass/volume.hpp"

namespace compass {

struct FractionRecord {
    int fraction_index = 1; // 1-based
    double time_offset_days = 0.0;
    VoxelVolume dose; // Gy, physical, this fraction only
    VoxelVolume ct;   // HU
    VoxelVolume pet;  // a.u.

    friend bool operator==(const FractionRecord&, const FractionRecord&) = default;
};

struct PatientCase {
    std::string patient_id;
    std::vector<FractionRecord> fractions;
    std::map<OrganId, OrganMask> masks;
    std::map<OrganId, int> labels; // 1 = grade >= 1, 0 = grade 0

    const GridSpec& grid() const { return fractions.front().dose.grid(); }

    const OrganMask& mask(OrganId o) const
    {
        auto it = masks.find(o);
        require(it != masks.end(), "patient " + patient_id + " has no mask for " + std::string(to_string(o)));
        return it->second;
    }

    int label(OrganId o) const
    {
        auto it = labels.find(o);
        require(it != labels.end(), "patient " + patient_id + " has no label for " + std::string(to_string(o)));
        return it->second;
    }

    /// Checks ordering, grid agreement, and physical plausibility.
    void validate() const
    {
        require(!patient_id.empty(), "patient id must be non-empty");
        require(fractions.size() >= 3, "patient " + patient_id + " has fewer than 3 fractions");
        const GridSpec& g = grid();
        std::set<int> seen;
        for (std::size_t i = 0; i < fractions.size(); ++i) {
            const auto& f = fractions[i];
            require(seen.insert(f.fraction_index).second,
                    "patient " + patient_id + ": duplicate fraction index " + std::to_string(f.fraction_index));
            require(f.fraction_index == static_cast<int>(i) + 1,
                    "patient " + patient_id + ": fractions must be numbered 1..n in order");
            require(f.time_offset_days >= 0.0, "negative time offset");
            if (i > 0)
                require(f.time_offset_days > fractions[i - 1].time_offset_days,
                        "patient " + patient_id + ": time offsets must be strictly increasing");
            require(f.dose.grid() == g && f.ct.grid() == g && f.pet.grid() == g,
                    "patient " + patient_id + ": volumes on different grids");
            for (double d : f.dose.values())
                require(d >= 0.0, "patient " + patient_id + ": negative dose");
        }
        for (auto& [o, m] : masks)
            require(m.grid() == g, "patient " + patient_id + ": mask grid differs from reference grid");
        for (auto& [o, l] : labels)
            require(l == 0 || l == 1, "labels must be binary");
    }

    friend bool operator==(const PatientCase&, const PatientCase&) = default;
};

using Cohort = std::vector<PatientCase>;

/// Cumulative EQD2 volume through fraction t (1-based) for one organ.
inline VoxelVolume cumulative_eqd2(const PatientCase& pc, OrganId organ, std::size_t t)
{
    require(t >= 1 && t <= pc.fractions.size(), "fraction out of range");
    BedAccumulator acc(BioDoseParams::for_organ(organ));
    for (std::size_t i = 0; i < t; ++i)
        acc.add_fraction(pc.fractions[i].dose);
    return acc.cumulative_eqd2();
}

/// Minimum cumulative EQD2 among the hottest 2% of organ voxels (the labelling statistic).
inline double hotspot_eqd2(const VoxelVolume& cum_eqd2, const OrganMask& mask)
{
    const auto desc = stats::sorted_descending(masked_values(cum_eqd2, mask));
    return stats::hottest_min(desc, 2);
}

// ---------------------------------------------------------------------------
// Synthetic cohort generator
// ---------------------------------------------------------------------------

struct CohortConfig {
    int n_patients = 8;
    int min_fractions = 3;
    int max_fractions = 5;
    std::vector<int> fraction_counts; // optional explicit per-patient counts
    GridSpec grid = default_grid();
    int beam_count = 3;
    double beam_sigma_mm = 9.0;       // lateral width of each beam kernel
    double beam_length_mm = 40.0;     // width along the beam axis
    double fraction_dose_gy = 9.0;    // per-fraction peak at the target
    double aim_jitter_mm = 3.0;       // per-fraction setup error
    double ct_noise_hu = 25.0;
    double pet_noise = 0.15;
    double pet_inflammation_per_gy = 0.15;
    double hotspot_threshold_gy = 30.0; // cumulative EQD2, hottest 2%
    double label_noise = 0.05;
    std::uint64_t rng_seed = 42;

    void validate() const
    {
        require(n_patients >= 2, "cohort needs at least 2 patients");
        require(min_fractions >= 3 && max_fractions <= 5 && min_fractions <= max_fractions,
                "fractions per patient must lie in [3, 5]");
        if (!fraction_counts.empty()) {
            require(fraction_counts.size() == static_cast<std::size_t>(n_patients),
                    "fraction_counts must list one count per patient");
            for (int c : fraction_counts)
                require(c >= 3 && c <= 5, "fraction_counts entries must lie in [3, 5]");
        }
        grid.validate();
        require(beam_count >= 1, "beam_count must be >= 1");
        require(beam_sigma_mm > 0 && beam_length_mm > 0, "beam widths must be > 0");
        require(fraction_dose_gy >= 0, "fraction dose must be >= 0");
        require(aim_jitter_mm >= 0 && ct_noise_hu >= 0 && pet_noise >= 0 && pet_inflammation_per_gy >= 0,
                "noise levels must be >= 0");
        require(hotspot_threshold_gy >= 0, "hotspot threshold must be >= 0");
        require(label_noise >= 0.0 && label_noise < 0.5, "label noise must lie in [0, 0.5)");
    }
};

inline void to_json(nlohmann::json& j, const CohortConfig& c)
{
    j = {{"n_patients", c.n_patients},
         {"min_fractions", c.min_fractions},
         {"max_fractions", c.max_fractions},
         {"fraction_counts", c.fraction_counts},
         {"grid", detail::grid_to_json(c.grid)},
         {"beam_count", c.beam_count},
         {"beam_sigma_mm", c.beam_sigma_mm},
         {"beam_length_mm", c.beam_length_mm},
         {"fraction_dose_gy", c.fraction_dose_gy},
         {"aim_jitter_mm", c.aim_jitter_mm},
         {"ct_noise_hu", c.ct_noise_hu},
         {"pet_noise", c.pet_noise},
         {"pet_inflammation_per_gy", c.pet_inflammation_per_gy},
         {"hotspot_threshold_gy", c.hotspot_threshold_gy},
         {"label_noise", c.label_noise},
         {"rng_seed", c.rng_seed}};
}

/// Missing keys keep their defaults, so partial configs are accepted.
inline void from_json(const nlohmann::json& j, CohortConfig& c)
{
    auto get = [&](const char* k, auto& field) {
        if (j.contains(k))
            j.at(k).get_to(field);
    };
    get("n_patients", c.n_patients);
    get("min_fractions", c.min_fractions);
    get("max_fractions", c.max_fractions);
    get("fraction_counts", c.fraction_counts);
    if (j.contains("grid"))
        c.grid = detail::grid_from_json(j.at("grid"));
    get("beam_count", c.beam_count);
    get("beam_sigma_mm", c.beam_sigma_mm);
    get("beam_length_mm", c.beam_length_mm);
    get("fraction_dose_gy", c.fraction_dose_gy);
    get("aim_jitter_mm", c.aim_jitter_mm);
    get("ct_noise_hu", c.ct_noise_hu);
    get("pet_noise", c.pet_noise);
    get("pet_inflammation_per_gy", c.pet_inflammation_per_gy);
    get("hotspot_threshold_gy", c.hotspot_threshold_gy);
    get("label_noise", c.label_noise);
    get("rng_seed", c.rng_seed);
}

namespace detail {

// Stream ids; each patient owns a block so generation can fan out.
inline constexpr std::uint64_t kStreamAnatomy = 0;
inline constexpr std::uint64_t kStreamPlan = 1;
inline constexpr std::uint64_t kStreamLabels = 2;
inline constexpr std::uint64_t kStreamFractionBase = 16;

inline std::uint64_t patient_stream(int patient, std::uint64_t sub) { return (static_cast<std::uint64_t>(patient) << 20) | sub; }

struct Anatomy {
    // All positions in physical mm.
    std::array<double, 3> heart_center;
    std::array<double, 3> heart_radii;
    double eso_x, eso_y, eso_radius, eso_amp, eso_phase;
    double cord_x, cord_y, cord_radius;
    double body_cx, body_cy, body_rx, body_ry;
    double z_lo, z_hi; // tubular organ extent
};

inline Anatomy sample_anatomy(const GridSpec& g, CounterRng& rng)
{
    const double ex = g.spacing_mm[0] * static_cast<double>(g.dims[0] - 1);
    const double ey = g.spacing_mm[1] * static_cast<double>(g.dims[1] - 1);
    const double ez = g.spacing_mm[2] * static_cast<double>(g.dims[2] - 1);
    const auto& o = g.origin_mm;
    Anatomy a{};
    a.body_cx = o[0] + 0.5 * ex;
    a.body_cy = o[1] + 0.5 * ey;
    a.body_rx = 0.47 * ex;
    a.body_ry = 0.45 * ey;
    a.heart_center = {o[0] + ex * rng.uniform(0.54, 0.60), o[1] + ey * rng.uniform(0.30, 0.36),
                      o[2] + ez * rng.uniform(0.30, 0.36)};
    a.heart_radii = {rng.uniform(14.0, 18.0), rng.uniform(11.0, 14.0), rng.uniform(11.0, 14.0)};
    a.eso_x = o[0] + ex * 0.5 + rng.uniform(-2.0, 2.0);
    a.eso_y = o[1] + ey * rng.uniform(0.58, 0.62);
    a.eso_radius = rng.uniform(4.0, 5.0);
    a.eso_amp = rng.uniform(3.0, 6.0);
    a.eso_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    a.cord_x = o[0] + ex * 0.5 + rng.uniform(-1.5, 1.5);
    a.cord_y = o[1] + ey * rng.uniform(0.78, 0.81);
    a.cord_radius = rng.uniform(4.5, 5.5);
    a.z_lo = o[2] + 0.08 * ez;
    a.z_hi = o[2] + 0.92 * ez;
    return a;
}

inline bool in_heart(const Anatomy& a, const std::array<double, 3>& p)
{
    double s = 0;
    for (int k = 0; k < 3; ++k) {
        const double d = (p[k] - a.heart_center[k]) / a.heart_radii[k];
        s += d * d;
    }
    return s <= 1.0;
}

inline double eso_center_x(const Anatomy& a, double z) { return a.eso_x + a.eso_amp * std::sin(0.06 * z + a.eso_phase); }

inline bool in_esophagus(const Anatomy& a, const std::array<double, 3>& p)
{
    if (p[2] < a.z_lo || p[2] > a.z_hi)
        return false;
    const double dx = p[0] - eso_center_x(a, p[2]), dy = p[1] - a.eso_y;
    return dx * dx + dy * dy <= a.eso_radius * a.eso_radius;
}

inline bool in_cord(const Anatomy& a, const std::array<double, 3>& p)
{
    if (p[2] < a.z_lo || p[2] > a.z_hi)
        return false;
    const double dx = p[0] - a.cord_x, dy = p[1] - a.cord_y;
    return dx * dx + dy * dy <= a.cord_radius * a.cord_radius;
}

inline bool in_body(const Anatomy& a, const std::array<double, 3>& p)
{
    const double dx = (p[0] - a.body_cx) / a.body_rx, dy = (p[1] - a.body_cy) / a.body_ry;
    return dx * dx + dy * dy <= 1.0;
}

inline bool in_lung(const Anatomy& a, const std::array<double, 3>& p)
{
    // Two ellipses either side of the mediastinum.
    for (double side : {-1.0, 1.0}) {
        const double cx = a.body_cx + side * 0.55 * a.body_rx;
        const double dx = (p[0] - cx) / (0.36 * a.body_rx), dy = (p[1] - (a.body_cy - 0.05 * a.body_ry)) / (0.7 * a.body_ry);
        if (dx * dx + dy * dy <= 1.0)
            return true;
    }
    return false;
}

struct Beam {
    std::array<double, 3> aim;
    double angle; // beam axis direction in the axial plane
    double weight;
};

struct Plan {
    std::array<double, 3> target;
    std::vector<Beam> beams;
    double dose_scale;
};

inline Plan sample_plan(const CohortConfig& cfg, const Anatomy& a, CounterRng& rng)
{
    Plan p;
    // Target somewhere in the mediastinal region; its distance to each organ
    // drives how much hotspot dose that organ collects.
    const double ry = a.body_ry;
    p.target = {a.body_cx + rng.uniform(-0.30, 0.30) * a.body_rx, a.body_cy + rng.uniform(-0.45, 0.55) * ry,
                rng.uniform(0.25, 0.75) * (a.z_hi - a.z_lo) + a.z_lo};
    p.dose_scale = rng.uniform(0.7, 1.3);
    const double base = rng.uniform(0.0, std::numbers::pi);
    for (int b = 0; b < cfg.beam_count; ++b) {
        Beam beam;
        beam.angle = base + std::numbers::pi * b / cfg.beam_count;
        beam.aim = {p.target[0] + rng.normal(0.0, 4.0), p.target[1] + rng.normal(0.0, 4.0), p.target[2]};
        beam.weight = rng.uniform(0.8, 1.2) / cfg.beam_count;
        p.beams.push_back(beam);
    }
    return p;
}

inline std::vector<double> fraction_dose(const CohortConfig& cfg, const Plan& plan, const GridSpec& g,
                                         CounterRng& rng)
{
    std::vector<std::array<double, 3>> aims;
    for (auto& b : plan.beams)
        aims.push_back({b.aim[0] + rng.normal(0.0, cfg.aim_jitter_mm), b.aim[1] + rng.normal(0.0, cfg.aim_jitter_mm),
                        b.aim[2] + rng.normal(0.0, cfg.aim_jitter_mm)});
    const double amp = cfg.fraction_dose_gy * plan.dose_scale * rng.uniform(0.92, 1.08);
    std::vector<double> dose(g.voxel_count());
    const double s_lat = cfg.beam_sigma_mm, s_ax = cfg.beam_length_mm, s_z = cfg.beam_sigma_mm;
    for (std::size_t z = 0; z < g.dims[2]; ++z)
        for (std::size_t y = 0; y < g.dims[1]; ++y)
            for (std::size_t x = 0; x < g.dims[0]; ++x) {
                const auto pos = g.position_mm(x, y, z);
                double d = 0.0;
                for (std::size_t b = 0; b < aims.size(); ++b) {
                    const double c = std::cos(plan.beams[b].angle), s = std::sin(plan.beams[b].angle);
                    const double dx = pos[0] - aims[b][0], dy = pos[1] - aims[b][1], dz = pos[2] - aims[b][2];
                    const double along = dx * c + dy * s, across = -dx * s + dy * c;
                    const double q = along * along / (s_ax * s_ax) + across * across / (s_lat * s_lat) + dz * dz / (s_z * s_z);
                    d += plan.beams[b].weight * std::exp(-0.5 * q);
                }
                // Low-level scatter so no voxel is exactly dose-free.
                const double r = std::hypot(pos[0] - plan.target[0], pos[1] - plan.target[1], pos[2] - plan.target[2]);
                d += 0.01 * std::exp(-r / 60.0);
                dose[g.index(x, y, z)] = amp * d;
            }
    return dose;
}

inline PatientCase generate_patient(const CohortConfig& cfg, int p)
{
    const GridSpec& g = cfg.grid;
    CounterRng anat_rng(cfg.rng_seed, patient_stream(p, kStreamAnatomy));
    const Anatomy a = sample_anatomy(g, anat_rng);

    // Masks; every organ must lie strictly inside the grid.
    std::map<OrganId, std::vector<std::uint8_t>> inside;
    for (auto o : kAllOrgans)
        inside[o].assign(g.voxel_count(), 0);
    std::vector<std::uint8_t> body(g.voxel_count()), lung(g.voxel_count());
    for (std::size_t z = 0; z < g.dims[2]; ++z)
        for (std::size_t y = 0; y < g.dims[1]; ++y)
            for (std::size_t x = 0; x < g.dims[0]; ++x) {
                const auto pos = g.position_mm(x, y, z);
                const auto i = g.index(x, y, z);
                body[i] = in_body(a, pos);
                lung[i] = body[i] && in_lung(a, pos);
                bool on_edge = x == 0 || y == 0 || z == 0 || x + 1 == g.dims[0] || y + 1 == g.dims[1] || z + 1 == g.dims[2];
                const bool h = in_heart(a, pos), e = in_esophagus(a, pos), c = in_cord(a, pos);
                if ((h || e || c) && on_edge)
                    throw DataError("organ does not fit inside the grid");
                // Priority on overlap: cord, esophagus, heart.
                if (c)
                    inside[OrganId::SpinalCord][i] = 1;
                else if (e)
                    inside[OrganId::Esophagus][i] = 1;
                else if (h)
                    inside[OrganId::Heart][i] = 1;
                if (c || e || h)
                    lung[i] = 0;
            }
    PatientCase pc;
    char id[32];
    std::snprintf(id, sizeof id, "P%02d", p + 1);
    pc.patient_id = id;
    for (auto o : kAllOrgans) {
        if (std::count(inside[o].begin(), inside[o].end(), 1) == 0)
            throw DataError("organ " + std::string(to_string(o)) + " does not fit inside the grid");
        pc.masks.emplace(o, OrganMask(g, inside[o]));
    }

    CounterRng plan_rng(cfg.rng_seed, patient_stream(p, kStreamPlan));
    const Plan plan = sample_plan(cfg, a, plan_rng);
    int n_fx = cfg.fraction_counts.empty()
                   ? static_cast<int>(plan_rng.uniform_int(cfg.min_fractions, cfg.max_fractions))
                   : cfg.fraction_counts[static_cast<std::size_t>(p)];
    const double uptake_heart = plan_rng.uniform(2.5, 3.5), uptake_eso = plan_rng.uniform(1.3, 1.8),
                 uptake_cord = plan_rng.uniform(0.9, 1.2);
    const double hu_shift = plan_rng.normal(0.0, 8.0);
    // Per-organ tissue texture: HU offset and noise scale for CT, heterogeneity for PET.
    std::map<OrganId, double> organ_hu, organ_ct_sd, organ_pet_sd;
    for (auto o : kAllOrgans) {
        organ_hu[o] = plan_rng.normal(0.0, 10.0);
        organ_ct_sd[o] = plan_rng.uniform(0.5, 1.8);
        organ_pet_sd[o] = plan_rng.uniform(0.5, 2.0);
    }

    // Doses first: labels follow from cumulative EQD2, PET inflammation from labels.
    double t_days = 0.0;
    for (int f = 0; f < n_fx; ++f) {
        CounterRng frng(cfg.rng_seed, patient_stream(p, kStreamFractionBase + static_cast<std::uint64_t>(f)));
        FractionRecord fr;
        fr.fraction_index = f + 1;
        if (f > 0)
            t_days += static_cast<double>(frng.uniform_int(1, 4));
        fr.time_offset_days = t_days;
        fr.dose = VoxelVolume(g, quantize_f32(fraction_dose(cfg, plan, g, frng)), VolumeRole::Dose);
        std::map<OrganId, double> drift;
        for (auto o : kAllOrgans)
            drift[o] = frng.normal(0.0, 4.0);
        std::vector<double> ct(g.voxel_count());
        for (std::size_t i = 0; i < ct.size(); ++i) {
            double hu = -1000.0, sd = cfg.ct_noise_hu;
            if (body[i]) {
                hu = lung[i] ? -820.0 : 35.0 + hu_shift;
                for (auto [o, base] : {std::pair{OrganId::Heart, 45.0}, std::pair{OrganId::Esophagus, 20.0},
                                       std::pair{OrganId::SpinalCord, 30.0}})
                    if (inside[o][i]) {
                        hu = base + hu_shift + organ_hu[o] + drift[o];
                        sd *= organ_ct_sd[o];
                    }
            }
            ct[i] = hu + frng.normal(0.0, sd);
        }
        fr.ct = VoxelVolume(g, quantize_f32(std::move(ct)), VolumeRole::Ct);
        pc.fractions.push_back(std::move(fr));
    }

    CounterRng label_rng(cfg.rng_seed, patient_stream(p, kStreamLabels));
    for (auto o : kAllOrgans) {
        const double stat = hotspot_eqd2(cumulative_eqd2(pc, o, pc.fractions.size()), pc.mask(o));
        int label = stat > cfg.hotspot_threshold_gy ? 1 : 0;
        if (label_rng.bernoulli(cfg.label_noise))
            label = 1 - label;
        pc.labels[o] = label;
    }

    std::vector<VoxelVolume> cum_by_organ;
    for (int f = 0; f < n_fx; ++f) {
        CounterRng frng(cfg.rng_seed, patient_stream(p, kStreamFractionBase + 8 + static_cast<std::uint64_t>(f)));
        std::map<OrganId, VoxelVolume> cum;
        for (auto o : kAllOrgans)
            if (pc.labels[o] == 1)
                cum.emplace(o, cumulative_eqd2(pc, o, static_cast<std::size_t>(f) + 1));
        std::vector<double> pet(g.voxel_count());
        for (std::size_t i = 0; i < pet.size(); ++i) {
            double base = body[i] ? (lung[i] ? 0.4 : 1.0) : 0.0;
            std::optional<OrganId> organ;
            for (auto o : kAllOrgans)
                if (inside[o][i])
                    organ = o;
            if (organ)
                base = *organ == OrganId::Heart ? uptake_heart : *organ == OrganId::Esophagus ? uptake_eso : uptake_cord;
            const double sd = organ ? cfg.pet_noise * organ_pet_sd[*organ] : cfg.pet_noise;
            double v = base * (1.0 + frng.normal(0.0, sd));
            if (organ && cum.count(*organ))
                v += cfg.pet_inflammation_per_gy * cum.at(*organ)[i];
            pet[i] = std::max(0.0, v);
        }
        pc.fractions[static_cast<std::size_t>(f)].pet = VoxelVolume(g, quantize_f32(std::move(pet)), VolumeRole::Pet);
    }
    pc.validate();
    return pc;
}

} // namespace detail

/// Deterministic synthetic cohort with a planted hotspot-dose toxicity rule.
inline Cohort generate_cohort(const CohortConfig& cfg)
{
    cfg.validate();
    Cohort cohort(static_cast<std::size_t>(cfg.n_patients));
    parallel_for(cohort.size(), [&](std::size_t p) { cohort[p] = detail::generate_patient(cfg, static_cast<int>(p)); });
    return cohort;
}

// ---------------------------------------------------------------------------
// Manifest I/O
// ---------------------------------------------------------------------------

inline constexpr int kManifestSchemaVersion = 1;

/// Writes `cohort.json` plus one `.cvol` per volume/mask under `dir`.
inline void write_cohort(const Cohort& cohort, const std::filesystem::path& dir,
                         const std::optional<CohortConfig>& config = std::nullopt)
{
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
    nlohmann::json m;
    m["schema_version"] = kManifestSchemaVersion;
    if (config)
        m["config"] = *config;
    m["patients"] = nlohmann::json::array();
    for (const auto& pc : cohort) {
        const fs::path pdir = dir / pc.patient_id;
        fs::create_directories(pdir, ec);
        if (ec)
            throw DataError("cannot create directory " + pdir.string() + ": " + ec.message());
        nlohmann::json pj;
        pj["patient_id"] = pc.patient_id;
        for (const auto& fr : pc.fractions) {
            const std::string stem = "fx" + std::to_string(fr.fraction_index);
            write_volume(fr.dose, pdir / (stem + "_dose.cvol"));
            write_volume(fr.ct, pdir / (stem + "_ct.cvol"));
            write_volume(fr.pet, pdir / (stem + "_pet.cvol"));
            pj["fractions"].push_back({{"fraction_index", fr.fraction_index},
                                       {"time_offset_days", fr.time_offset_days},
                                       {"dose", pc.patient_id + "/" + stem + "_dose.cvol"},
                                       {"ct", pc.patient_id + "/" + stem + "_ct.cvol"},
                                       {"pet", pc.patient_id + "/" + stem + "_pet.cvol"}});
        }
        std::vector<VoxelVolume> cts;
        for (const auto& fr : pc.fractions)
            cts.push_back(fr.ct);
        write_volume(aip(cts), pdir / "aip_ct.cvol");
        pj["aip_ct"] = pc.patient_id + "/aip_ct.cvol";
        for (const auto& [o, mask] : pc.masks) {
            const std::string name = std::string(to_string(o));
            write_mask(mask, pdir / ("mask_" + name + ".cvol"));
            pj["masks"][name] = pc.patient_id + "/mask_" + name + ".cvol";
        }
        for (const auto& [o, l] : pc.labels)
            pj["labels"][std::string(to_string(o))] = l;
        m["patients"].push_back(pj);
    }
    std::ofstream out(dir / "cohort.json", std::ios::trunc);
    if (!out)
        throw DataError("cannot write manifest in " + dir.string());
    out << m.dump(2) << '\n';
}

inline nlohmann::json read_manifest_json(const std::filesystem::path& dir)
{
    const auto path = dir / "cohort.json";
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open manifest: " + path.string());
    nlohmann::json m;
    try {
        m = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed manifest " + path.string() + ": " + e.what());
    }
    if (m.value("schema_version", 0) != kManifestSchemaVersion)
        throw DataError("unsupported manifest schema_version in " + path.string());
    return m;
}

inline Cohort read_cohort(const std::filesystem::path& dir)
{
    namespace fs = std::filesystem;
    const auto m = read_manifest_json(dir);
    auto load_volume = [&](const std::string& rel) {
        const fs::path p = dir / rel;
        if (!fs::exists(p))
            throw DataError("missing volume file: " + p.string());
        return read_volume(p);
    };
    Cohort cohort;
    try {
        std::set<std::string> ids;
        for (const auto& pj : m.at("patients")) {
            PatientCase pc;
            pc.patient_id = pj.at("patient_id").get<std::string>();
            require(ids.insert(pc.patient_id).second, "duplicate patient id " + pc.patient_id);
            std::set<int> seen;
            for (const auto& fj : pj.at("fractions")) {
                FractionRecord fr;
                fr.fraction_index = fj.at("fraction_index").get<int>();
                require(seen.insert(fr.fraction_index).second, "patient " + pc.patient_id +
                                                                   ": duplicate fraction index " +
                                                                   std::to_string(fr.fraction_index));
                fr.time_offset_days = fj.at("time_offset_days").get<double>();
                fr.dose = load_volume(fj.at("dose").get<std::string>());
                fr.ct = load_volume(fj.at("ct").get<std::string>());
                fr.pet = load_volume(fj.at("pet").get<std::string>());
                pc.fractions.push_back(std::move(fr));
            }
            std::sort(pc.fractions.begin(), pc.fractions.end(),
                      [](const auto& a, const auto& b) { return a.fraction_index < b.fraction_index; });
            for (const auto& [name, rel] : pj.at("masks").items()) {
                const fs::path p = dir / rel.get<std::string>();
                if (!fs::exists(p))
                    throw DataError("missing volume file: " + p.string());
                pc.masks.emplace(organ_from_string(name), read_mask(p));
            }
            for (const auto& [name, l] : pj.at("labels").items())
                pc.labels[organ_from_string(name)] = l.get<int>();
            pc.validate();
            cohort.push_back(std::move(pc));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed manifest: ") + e.what());
    }
    return cohort;
}

} // namespace compass
