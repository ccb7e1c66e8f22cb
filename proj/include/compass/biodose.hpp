#pragma once

#include <span>
#include <vector>

#include "compass/volume.hpp"

namespace compass {

struct BioDoseParams {
    double alpha_beta_gy = 3.0;

    static BioDoseParams for_organ(OrganId o) { return {compass::alpha_beta_gy(o)}; }

    void validate() const { require(std::isfinite(alpha_beta_gy) && alpha_beta_gy > 0.0, "alpha/beta must be > 0"); }

    friend bool operator==(const BioDoseParams&, const BioDoseParams&) = default;
};

inline double bed_value(double dose_gy, const BioDoseParams& ab) noexcept
{
    return dose_gy * (1.0 + dose_gy / ab.alpha_beta_gy);
}

inline double eqd2_value(double bed_gy, const BioDoseParams& ab) noexcept
{
    return bed_gy / (1.0 + 2.0 / ab.alpha_beta_gy);
}

/// Per-voxel linear-quadratic BED of one fraction's physical dose.
inline VoxelVolume bed_fraction(const VoxelVolume& dose, const BioDoseParams& ab)
{
    ab.validate();
    std::vector<double> out(dose.size());
    for (std::size_t i = 0; i < dose.size(); ++i) {
        require(dose[i] >= 0.0, "bed_fraction: negative dose at voxel " + std::to_string(i));
        out[i] = bed_value(dose[i], ab);
    }
    return dose.with_values(std::move(out), VolumeRole::Bed);
}

inline VoxelVolume accumulate_bed(std::span<const VoxelVolume> per_fraction_beds)
{
    require(!per_fraction_beds.empty(), "accumulate_bed: no fractions");
    const GridSpec& g = per_fraction_beds.front().grid();
    std::vector<double> sum(g.voxel_count(), 0.0);
    for (const auto& b : per_fraction_beds) {
        require(b.grid() == g, "accumulate_bed: grid mismatch");
        for (std::size_t i = 0; i < sum.size(); ++i)
            sum[i] += b[i];
    }
    return VoxelVolume(g, std::move(sum), VolumeRole::Bed);
}

inline VoxelVolume eqd2(const VoxelVolume& cum_bed, const BioDoseParams& ab)
{
    ab.validate();
    std::vector<double> out(cum_bed.size());
    for (std::size_t i = 0; i < cum_bed.size(); ++i) {
        require(cum_bed[i] >= 0.0, "eqd2: negative BED at voxel " + std::to_string(i));
        out[i] = eqd2_value(cum_bed[i], ab);
    }
    return cum_bed.with_values(std::move(out), VolumeRole::Eqd2);
}

/// Running cumulative BED for one organ trajectory. The alpha/beta ratio is
/// bound at construction; every fraction is converted with the same value.
class BedAccumulator {
public:
    explicit BedAccumulator(BioDoseParams ab) : ab_(ab) { ab_.validate(); }

    void add_fraction(const VoxelVolume& dose)
    {
        auto bed = bed_fraction(dose, ab_);
        if (fractions_ == 0) {
            cum_ = std::move(bed);
        } else {
            const VoxelVolume pair[] = {cum_, bed};
            cum_ = accumulate_bed(pair);
        }
        ++fractions_;
    }

    std::size_t fractions() const noexcept { return fractions_; }
    const BioDoseParams& params() const noexcept { return ab_; }

    const VoxelVolume& cumulative_bed() const
    {
        require(fractions_ > 0, "no fractions accumulated");
        return cum_;
    }

    VoxelVolume cumulative_eqd2() const { return eqd2(cumulative_bed(), ab_); }

private:
    BioDoseParams ab_;
    VoxelVolume cum_;
    std::size_t fractions_ = 0;
};

} // namespace compass
