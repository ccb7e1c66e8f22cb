#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "compass/features.hpp"
#include "compass/volume.hpp"

namespace compass {

/// Organ tolerance (cumulative EQD2) and logistic width of the voxel dose-response.
/// Only the esophageal 34 Gy is a reported planning constraint; the heart and
/// spinal-cord values are conventional-constraint defaults.
struct ToleranceModel {
    std::map<OrganId, double> tolerance_eqd2_gy{
        {OrganId::Esophagus, 34.0}, {OrganId::Heart, 40.0}, {OrganId::SpinalCord, 50.0}};
    double width_fraction = 0.1; // w = width_fraction * D_tol unless overridden
    std::map<OrganId, double> width_gy;

    double tolerance(OrganId o) const { return tolerance_eqd2_gy.at(o); }
    double width(OrganId o) const
    {
        auto it = width_gy.find(o);
        return it != width_gy.end() ? it->second : width_fraction * tolerance(o);
    }

    void validate() const
    {
        for (auto o : kAllOrgans) {
            require(tolerance_eqd2_gy.count(o) && tolerance(o) > 0.0, "organ tolerance must be > 0");
            require(width(o) > 0.0, "tolerance width must be > 0");
        }
    }
};

/// 1 / (1 + exp(-(eqd2 - D_tol) / w)).
inline double voxel_risk(double eqd2_gy, double tol_gy, double width_gy)
{
    require(eqd2_gy >= 0.0, "voxel_risk: negative EQD2");
    require(tol_gy > 0.0 && width_gy > 0.0, "voxel_risk: tolerance and width must be > 0");
    return 1.0 / (1.0 + std::exp(-(eqd2_gy - tol_gy) / width_gy));
}

/// Probability map: voxel_risk inside the organ, exactly 0 outside.
inline VoxelVolume heatmap(const VoxelVolume& cum_eqd2, const OrganMask& mask, OrganId organ,
                           const ToleranceModel& tol = {})
{
    require(cum_eqd2.grid() == mask.grid(), "heatmap: grid mismatch");
    tol.validate();
    const double d = tol.tolerance(organ), w = tol.width(organ);
    std::vector<double> p(cum_eqd2.size(), 0.0);
    for (std::size_t i = 0; i < p.size(); ++i)
        if (mask.contains(i))
            p[i] = voxel_risk(cum_eqd2[i], d, w);
    return cum_eqd2.with_values(std::move(p), VolumeRole::Probability);
}

namespace detail {

/// Blue-cyan-yellow-red ramp on [0, 1].
inline std::array<int, 3> risk_color(double p)
{
    static constexpr std::array<std::array<double, 3>, 4> stops{{{0, 0, 255}, {0, 255, 255}, {255, 255, 0}, {255, 0, 0}}};
    p = std::clamp(p, 0.0, 1.0) * 3.0;
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(p), 2);
    const double f = p - static_cast<double>(k);
    std::array<int, 3> c{};
    for (int i = 0; i < 3; ++i)
        c[i] = static_cast<int>(std::lround(stops[k][i] + f * (stops[k + 1][i] - stops[k][i])));
    return c;
}

inline int ct_gray(double hu)
{
    constexpr double lo = -1000.0, hi = 400.0; // display window
    return static_cast<int>(std::lround(255.0 * std::clamp((hu - lo) / (hi - lo), 0.0, 1.0)));
}

inline std::string rgb(const std::array<int, 3>& c)
{
    char buf[24];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
    return buf;
}

} // namespace detail

inline constexpr double kOverlayAlpha = 0.55;
inline constexpr int kSlicePixel = 8;

/// Axial slice as SVG: grayscale CT, probability overlay wherever p > 0, fixed 0-1 legend.
inline std::string slice_svg(const VoxelVolume& heat, const VoxelVolume& base_ct, std::size_t z)
{
    require(heat.grid() == base_ct.grid(), "export_slice: grid mismatch");
    const auto& g = heat.grid();
    require(z < g.dims[2], "export_slice: z index " + std::to_string(z) + " out of range [0, " +
                               std::to_string(g.dims[2]) + ")");
    const int nx = static_cast<int>(g.dims[0]), ny = static_cast<int>(g.dims[1]);
    const int legend_w = 70;
    const int w = nx * kSlicePixel + legend_w, h = ny * kSlicePixel;
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
      << ' ' << h << "\" shape-rendering=\"crispEdges\">\n";
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x) {
            const auto i = g.index(static_cast<std::size_t>(x), static_cast<std::size_t>(y), z);
            const int gray = detail::ct_gray(base_ct[i]);
            std::array<int, 3> c{gray, gray, gray};
            if (heat[i] > 0.0) {
                const auto o = detail::risk_color(heat[i]);
                for (int k = 0; k < 3; ++k)
                    c[k] = static_cast<int>(std::lround((1.0 - kOverlayAlpha) * gray + kOverlayAlpha * o[k]));
            }
            s << "<rect x=\"" << x * kSlicePixel << "\" y=\"" << y * kSlicePixel << "\" width=\"" << kSlicePixel
              << "\" height=\"" << kSlicePixel << "\" fill=\"" << detail::rgb(c) << "\"/>\n";
        }
    // Legend: fixed scale regardless of the data range.
    const int lx = nx * kSlicePixel + 15, top = 20, bottom = h - 20, steps = 20;
    for (int k = 0; k < steps; ++k) {
        const double p = 1.0 - (k + 0.5) / steps;
        const int y0 = top + (bottom - top) * k / steps, y1 = top + (bottom - top) * (k + 1) / steps;
        s << "<rect class=\"legend\" x=\"" << lx << "\" y=\"" << y0 << "\" width=\"16\" height=\"" << (y1 - y0)
          << "\" fill=\"" << detail::rgb(detail::risk_color(p)) << "\"/>\n";
    }
    s << "<text x=\"" << lx + 20 << "\" y=\"" << top + 4 << "\" font-size=\"11\">1.0</text>\n";
    s << "<text x=\"" << lx + 20 << "\" y=\"" << bottom + 4 << "\" font-size=\"11\">0.0</text>\n";
    s << "</svg>\n";
    return s.str();
}

inline std::string slice_csv(const VoxelVolume& heat, const VoxelVolume& base_ct, std::size_t z)
{
    require(heat.grid() == base_ct.grid(), "export_slice: grid mismatch");
    const auto& g = heat.grid();
    require(z < g.dims[2], "export_slice: z index out of range");
    std::ostringstream s;
    s << "x,y,ct_hu,probability\n";
    for (std::size_t y = 0; y < g.dims[1]; ++y)
        for (std::size_t x = 0; x < g.dims[0]; ++x) {
            const auto i = g.index(x, y, z);
            s << x << ',' << y << ',' << format_number(base_ct[i]) << ',' << format_number(heat[i]) << '\n';
        }
    return s.str();
}

/// Writes heatmap_slice_z<k>.svg and heatmap_slice_z<k>.csv into dir.
inline void export_slice(const VoxelVolume& heat, const VoxelVolume& base_ct, std::size_t z,
                         const std::filesystem::path& dir)
{
    const auto svg = slice_svg(heat, base_ct, z);
    const auto csv = slice_csv(heat, base_ct, z);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    const std::string stem = "heatmap_slice_z" + std::to_string(z);
    for (auto [name, text] : {std::pair{stem + ".svg", &svg}, std::pair{stem + ".csv", &csv}}) {
        std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
        if (!out)
            throw DataError("cannot write " + (dir / name).string());
        out << *text;
    }
}

} // namespace compass
