#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "compass/error.hpp"

namespace compass {

// ---------------------------------------------------------------------------
// Grid geometry
// ---------------------------------------------------------------------------

struct GridSpec {
    std::array<std::size_t, 3> dims{1, 1, 1};
    std::array<double, 3> spacing_mm{1.0, 1.0, 1.0};
    std::array<double, 3> origin_mm{0.0, 0.0, 0.0};

    std::size_t voxel_count() const noexcept { return dims[0] * dims[1] * dims[2]; }
    double voxel_volume_cc() const noexcept
    {
        return spacing_mm[0] * spacing_mm[1] * spacing_mm[2] / 1000.0;
    }

    /// Flat index, x fastest then y then z.
    std::size_t index(std::size_t x, std::size_t y, std::size_t z) const noexcept
    {
        return x + dims[0] * (y + dims[1] * z);
    }

    std::array<std::size_t, 3> coords(std::size_t flat) const noexcept
    {
        return {flat % dims[0], (flat / dims[0]) % dims[1], flat / (dims[0] * dims[1])};
    }

    /// Physical position (mm) of a voxel centre.
    std::array<double, 3> position_mm(std::size_t x, std::size_t y, std::size_t z) const noexcept
    {
        return {origin_mm[0] + spacing_mm[0] * static_cast<double>(x),
                origin_mm[1] + spacing_mm[1] * static_cast<double>(y),
                origin_mm[2] + spacing_mm[2] * static_cast<double>(z)};
    }

    void validate() const
    {
        for (int a = 0; a < 3; ++a) {
            require(dims[a] >= 1, "grid dims must be >= 1");
            require(std::isfinite(spacing_mm[a]) && spacing_mm[a] > 0.0, "grid spacing must be > 0");
            require(std::isfinite(origin_mm[a]), "grid origin must be finite");
        }
    }

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Desk-scale default: 48 x 48 x 32 voxels at 2 mm isotropic.
inline GridSpec default_grid()
{
    return GridSpec{{48, 48, 32}, {2.0, 2.0, 2.0}, {0.0, 0.0, 0.0}};
}

// ---------------------------------------------------------------------------
// Volumes and masks
// ---------------------------------------------------------------------------

enum class VolumeRole { Scalar, Ct, Pet, Dose, Bed, Eqd2, Probability, Mask };

inline std::string_view to_string(VolumeRole r)
{
    switch (r) {
    case VolumeRole::Ct: return "ct";
    case VolumeRole::Pet: return "pet";
    case VolumeRole::Dose: return "dose";
    case VolumeRole::Bed: return "bed";
    case VolumeRole::Eqd2: return "eqd2";
    case VolumeRole::Probability: return "probability";
    case VolumeRole::Mask: return "mask";
    case VolumeRole::Scalar: break;
    }
    return "scalar";
}

inline VolumeRole role_from_string(std::string_view s)
{
    for (auto r : {VolumeRole::Scalar, VolumeRole::Ct, VolumeRole::Pet, VolumeRole::Dose, VolumeRole::Bed,
                   VolumeRole::Eqd2, VolumeRole::Probability, VolumeRole::Mask})
        if (to_string(r) == s)
            return r;
    throw DataError("unknown volume role '" + std::string(s) + "'");
}

/// 3D scalar grid. Values are held in 64-bit; the on-disk payload is 32-bit.
class VoxelVolume {
public:
    VoxelVolume() = default;

    VoxelVolume(GridSpec grid, std::vector<double> values, VolumeRole role = VolumeRole::Scalar)
        : grid_(grid), values_(std::move(values)), role_(role)
    {
        grid_.validate();
        require(values_.size() == grid_.voxel_count(), "volume value count does not match grid dims");
        for (double v : values_)
            require(std::isfinite(v), "volume contains non-finite value");
    }

    static VoxelVolume filled(GridSpec grid, double value, VolumeRole role = VolumeRole::Scalar)
    {
        return VoxelVolume(grid, std::vector<double>(grid.voxel_count(), value), role);
    }

    const GridSpec& grid() const noexcept { return grid_; }
    std::span<const double> values() const noexcept { return values_; }
    VolumeRole role() const noexcept { return role_; }
    std::size_t size() const noexcept { return values_.size(); }

    double operator[](std::size_t i) const noexcept { return values_[i]; }
    double at(std::size_t x, std::size_t y, std::size_t z) const noexcept { return values_[grid_.index(x, y, z)]; }

    /// New volume with the same grid and the given role.
    VoxelVolume with_values(std::vector<double> values, VolumeRole role) const
    {
        return VoxelVolume(grid_, std::move(values), role);
    }

    friend bool operator==(const VoxelVolume&, const VoxelVolume&) = default;

private:
    GridSpec grid_;
    std::vector<double> values_;
    VolumeRole role_ = VolumeRole::Scalar;
};

class OrganMask {
public:
    OrganMask() = default;

    OrganMask(GridSpec grid, std::vector<std::uint8_t> inside) : grid_(grid), inside_(std::move(inside))
    {
        grid_.validate();
        require(inside_.size() == grid_.voxel_count(), "mask length does not match grid dims");
        count_ = 0;
        for (auto& b : inside_) {
            require(b == 0 || b == 1, "mask values must be 0 or 1");
            count_ += b;
        }
        require(count_ >= 1, "organ mask must contain at least one voxel");
    }

    const GridSpec& grid() const noexcept { return grid_; }
    std::span<const std::uint8_t> inside() const noexcept { return inside_; }
    bool contains(std::size_t flat) const noexcept { return inside_[flat] != 0; }
    std::size_t count() const noexcept { return count_; }

    friend bool operator==(const OrganMask&, const OrganMask&) = default;

private:
    GridSpec grid_;
    std::vector<std::uint8_t> inside_;
    std::size_t count_ = 0;
};

// ---------------------------------------------------------------------------
// Organs at risk
// ---------------------------------------------------------------------------

enum class OrganId { Heart, Esophagus, SpinalCord };

inline constexpr std::array<OrganId, 3> kAllOrgans{OrganId::Heart, OrganId::Esophagus, OrganId::SpinalCord};

inline std::string_view to_string(OrganId o)
{
    switch (o) {
    case OrganId::Heart: return "heart";
    case OrganId::Esophagus: return "esophagus";
    case OrganId::SpinalCord: return "spinal_cord";
    }
    return "?";
}

inline OrganId organ_from_string(std::string_view s)
{
    for (auto o : kAllOrgans)
        if (to_string(o) == s)
            return o;
    throw DataError("unknown organ '" + std::string(s) + "'");
}

/// Linear-quadratic alpha/beta ratio (Gy).
inline constexpr double alpha_beta_gy(OrganId o)
{
    return o == OrganId::SpinalCord ? 2.0 : 3.0;
}

/// Organ-specific decision threshold on the final-fraction probability.
inline constexpr double classification_threshold(OrganId o)
{
    switch (o) {
    case OrganId::Heart: return 0.6;
    case OrganId::Esophagus: return 0.4;
    case OrganId::SpinalCord: return 0.5;
    }
    return 0.5;
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Voxelwise mean of a longitudinal series (average intensity projection).
inline VoxelVolume aip(std::span<const VoxelVolume> volumes)
{
    require(!volumes.empty(), "aip: empty input");
    const GridSpec& g = volumes.front().grid();
    std::vector<double> acc(g.voxel_count(), 0.0);
    for (const auto& v : volumes) {
        require(v.grid() == g, "aip: grid mismatch");
        for (std::size_t i = 0; i < acc.size(); ++i)
            acc[i] += v[i];
    }
    const double n = static_cast<double>(volumes.size());
    for (auto& a : acc)
        a /= n;
    return VoxelVolume(g, std::move(acc), volumes.front().role());
}

inline std::vector<double> masked_values(const VoxelVolume& vol, const OrganMask& mask)
{
    require(vol.grid() == mask.grid(), "masked_values: grid mismatch");
    require(mask.count() > 0, "masked_values: empty mask");
    std::vector<double> out;
    out.reserve(mask.count());
    for (std::size_t i = 0; i < vol.size(); ++i)
        if (mask.contains(i))
            out.push_back(vol[i]);
    return out;
}

inline double organ_volume_cc(const OrganMask& mask)
{
    return static_cast<double>(mask.count()) * mask.grid().voxel_volume_cc();
}

// ---------------------------------------------------------------------------
// .cvol container: one JSON header line, '\n', little-endian payload.
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json grid_to_json(const GridSpec& g)
{
    return {{"dims", g.dims}, {"spacing_mm", g.spacing_mm}, {"origin_mm", g.origin_mm}};
}

inline GridSpec grid_from_json(const nlohmann::json& j)
{
    GridSpec g;
    try {
        g.dims = j.at("dims").get<std::array<std::size_t, 3>>();
        g.spacing_mm = j.at("spacing_mm").get<std::array<double, 3>>();
        g.origin_mm = j.at("origin_mm").get<std::array<double, 3>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed grid header: ") + e.what());
    }
    g.validate();
    return g;
}

inline void write_header(std::ofstream& out, const GridSpec& g, std::string_view dtype, std::string_view role)
{
    auto h = grid_to_json(g);
    h["dtype"] = dtype;
    h["role"] = role;
    out << h.dump() << '\n';
}

struct RawContainer {
    GridSpec grid;
    std::string dtype;
    std::string role;
    std::vector<char> payload;
};

inline RawContainer read_container(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open volume file: " + path.string());
    std::string header;
    if (!std::getline(in, header))
        throw DataError("missing header in " + path.string());
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed header in " + path.string() + ": " + e.what());
    }
    RawContainer rc;
    rc.grid = grid_from_json(h);
    try {
        rc.dtype = h.at("dtype").get<std::string>();
        rc.role = h.at("role").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed header in " + path.string() + ": " + e.what());
    }
    rc.payload.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    return rc;
}

} // namespace detail

inline void write_volume(const VoxelVolume& vol, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw DataError("cannot write volume file: " + path.string());
    detail::write_header(out, vol.grid(), "f32", to_string(vol.role()));
    std::vector<char> buf(vol.size() * 4);
    for (std::size_t i = 0; i < vol.size(); ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(vol[i]));
        for (int b = 0; b < 4; ++b)
            buf[4 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out)
        throw DataError("write failed: " + path.string());
}

inline VoxelVolume read_volume(const std::filesystem::path& path)
{
    auto rc = detail::read_container(path);
    if (rc.dtype != "f32")
        throw DataError("unsupported volume dtype '" + rc.dtype + "' in " + path.string());
    const std::size_t n = rc.grid.voxel_count();
    if (rc.payload.size() != n * 4)
        throw DataError("payload length mismatch in " + path.string() + ": expected " + std::to_string(n) +
                        " values, found " + std::to_string(rc.payload.size() / 4) +
                        (rc.payload.size() % 4 ? " (+ partial)" : ""));
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b)
            bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(rc.payload[4 * i + b])) << (8 * b);
        const float f = std::bit_cast<float>(bits);
        if (!std::isfinite(f))
            throw DataError("non-finite value at index " + std::to_string(i) + " in " + path.string());
        values[i] = f;
    }
    return VoxelVolume(rc.grid, std::move(values), role_from_string(rc.role));
}

inline void write_mask(const OrganMask& mask, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw DataError("cannot write mask file: " + path.string());
    detail::write_header(out, mask.grid(), "u8", "mask");
    out.write(reinterpret_cast<const char*>(mask.inside().data()), static_cast<std::streamsize>(mask.inside().size()));
    if (!out)
        throw DataError("write failed: " + path.string());
}

inline OrganMask read_mask(const std::filesystem::path& path)
{
    auto rc = detail::read_container(path);
    if (rc.dtype != "u8")
        throw DataError("mask file must have dtype u8: " + path.string());
    if (rc.payload.size() != rc.grid.voxel_count())
        throw DataError("payload length mismatch in " + path.string());
    std::vector<std::uint8_t> inside(rc.payload.begin(), rc.payload.end());
    return OrganMask(rc.grid, std::move(inside));
}

/// Round every value to the stored 32-bit precision so that writes are lossless.
inline std::vector<double> quantize_f32(std::vector<double> v)
{
    for (auto& x : v)
        x = static_cast<double>(static_cast<float>(x));
    return v;
}

} // namespace compass
