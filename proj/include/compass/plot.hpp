#pragma once

#include <cstdio>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "compass/error.hpp"
#include "compass/volume.hpp"

namespace compass {

struct TrajectoryRow {
    std::string patient;
    OrganId organ;
    int fraction;
    double probability;
    int label;
};

/// Parses `patient,organ,fraction,probability,label`.
inline std::vector<TrajectoryRow> read_trajectories_csv(std::istream& in)
{
    std::vector<TrajectoryRow> rows;
    std::string line;
    if (!std::getline(in, line))
        return rows;
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    if (line != "patient,organ,fraction,probability,label")
        throw DataError("trajectories CSV: unexpected header '" + line + "'");
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            cells.push_back(cell);
        if (cells.size() != 5)
            throw DataError("trajectories CSV line " + std::to_string(lineno) + ": expected 5 columns");
        try {
            TrajectoryRow r{cells[0], organ_from_string(cells[1]), std::stoi(cells[2]), std::stod(cells[3]),
                            std::stoi(cells[4])};
            if (r.probability < 0.0 || r.probability > 1.0 || (r.label != 0 && r.label != 1) || r.fraction < 1)
                throw DataError("value out of range");
            rows.push_back(std::move(r));
        } catch (const std::exception& e) {
            throw DataError("trajectories CSV line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return rows;
}

/// One panel per organ, one polyline per (patient, organ); red = toxic, blue = non-toxic.
inline std::string trajectory_plot_svg(const std::vector<TrajectoryRow>& rows)
{
    constexpr int panel_w = 260, panel_h = 220, margin = 40, max_fx = 5;
    const int w = 3 * (panel_w + margin) + margin, h = panel_h + 2 * margin;
    std::map<std::pair<OrganId, std::string>, std::vector<const TrajectoryRow*>> groups;
    int max_fraction = max_fx;
    for (const auto& r : rows) {
        groups[{r.organ, r.patient}].push_back(&r);
        max_fraction = std::max(max_fraction, r.fraction);
    }
    auto fmt = [](double v) {
        char b[32];
        std::snprintf(b, sizeof b, "%.2f", v);
        return std::string(b);
    };
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
      << ' ' << h << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (std::size_t k = 0; k < kAllOrgans.size(); ++k) {
        const OrganId organ = kAllOrgans[k];
        const int x0 = margin + static_cast<int>(k) * (panel_w + margin), y0 = margin;
        auto px = [&](double fx) { return x0 + (fx - 1.0) / (max_fraction - 1) * panel_w; };
        auto py = [&](double p) { return y0 + (1.0 - p) * panel_h; };
        s << "<g class=\"panel\" data-organ=\"" << to_string(organ) << "\">\n";
        s << "<text x=\"" << x0 << "\" y=\"" << y0 - 10 << "\" font-size=\"13\">" << to_string(organ) << "</text>\n";
        s << "<line class=\"axis\" x1=\"" << x0 << "\" y1=\"" << y0 + panel_h << "\" x2=\"" << x0 + panel_w
          << "\" y2=\"" << y0 + panel_h << "\" stroke=\"black\"/>\n";
        s << "<line class=\"axis\" x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y0 + panel_h
          << "\" stroke=\"black\"/>\n";
        for (int f = 1; f <= max_fraction; ++f)
            s << "<text x=\"" << fmt(px(f)) << "\" y=\"" << y0 + panel_h + 14 << "\" font-size=\"10\">" << f
              << "</text>\n";
        for (double p : {0.0, 0.5, 1.0})
            s << "<text x=\"" << x0 - 28 << "\" y=\"" << fmt(py(p) + 4) << "\" font-size=\"10\">" << fmt(p)
              << "</text>\n";
        const double thr = classification_threshold(organ);
        s << "<line class=\"threshold\" x1=\"" << x0 << "\" y1=\"" << fmt(py(thr)) << "\" x2=\"" << x0 + panel_w
          << "\" y2=\"" << fmt(py(thr)) << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
        for (const auto& [key, pts] : groups) {
            if (key.first != organ)
                continue;
            auto sorted = pts;
            std::sort(sorted.begin(), sorted.end(), [](auto a, auto b) { return a->fraction < b->fraction; });
            const bool toxic = sorted.front()->label == 1;
            s << "<polyline data-patient=\"" << key.second << "\" data-label=\"" << (toxic ? 1 : 0)
              << "\" fill=\"none\" stroke=\"" << (toxic ? "#d62728" : "#1f77b4") << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t i = 0; i < sorted.size(); ++i)
                s << (i ? " " : "") << fmt(px(sorted[i]->fraction)) << ',' << fmt(py(sorted[i]->probability));
            s << "\"/>\n";
        }
        s << "</g>\n";
    }
    s << "</svg>\n";
    return s.str();
}

} // namespace compass
