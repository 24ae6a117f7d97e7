#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <random>
#include <string>

#include "surfchange/counter_rng.hpp"
#include "surfchange/height_matrix.hpp"

namespace surfchange {

/// Synthetic scans: a spherical cap (or a flat plane) carrying Gaussian
/// texture whose positive and negative excursions scale separately, so peaks
/// and valleys can be changed independently between stages.
struct SyntheticStageSpec {
    std::string label = "synthetic";
    std::size_t locations = 9;
    std::size_t rows = 120;
    std::size_t cols = 160;
    double dx_um = kDefaultDxUm;
    double dy_um = kDefaultDyUm;
    double radius_um = 1688.0;
    bool flat = false;
    double roughness_um = 0.01; // texture standard deviation before scaling
    double peak_scale = 1.0;
    double valley_scale = 1.0;
    double location_jitter = 0.1; // relative spread of roughness across locations
    std::uint64_t seed = 1;
};

inline StageRecord synthetic_stage(const SyntheticStageSpec& spec)
{
    StageRecord rec;
    rec.stage_label = spec.label;
    rec.stage_id = spec.label;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t loc = 0; loc < spec.locations; ++loc) {
        CounterRng rng(spec.seed, loc);
        HeightMatrix m;
        m.rows = spec.rows;
        m.cols = spec.cols;
        m.dx_um = spec.dx_um;
        m.dy_um = spec.dy_um;
        m.stage_id = rec.stage_id;
        char id[32];
        std::snprintf(id, sizeof id, "loc%03zu", loc + 1);
        m.location_id = id;
        m.z.resize(m.size());

        const double amplitude = spec.roughness_um * std::max(0.1, 1.0 + spec.location_jitter * normal(rng));
        const double xc = 0.5 * static_cast<double>(spec.cols - 1) * spec.dx_um + 3.0 * normal(rng);
        const double yc = 0.5 * static_cast<double>(spec.rows - 1) * spec.dy_um + 3.0 * normal(rng);
        const double zc = -spec.radius_um + 0.5 * normal(rng);
        const double tilt_x = 1e-3 * normal(rng), tilt_y = 1e-3 * normal(rng);
        for (std::size_t r = 0; r < m.rows; ++r)
            for (std::size_t c = 0; c < m.cols; ++c) {
                const double x = m.x_um(c), y = m.y_um(r);
                double base;
                if (spec.flat) {
                    base = 0.2 + tilt_x * x + tilt_y * y;
                } else {
                    const double dx = x - xc, dy = y - yc;
                    base = zc + std::sqrt(spec.radius_um * spec.radius_um - dx * dx - dy * dy);
                }
                const double g = normal(rng);
                const double texture = amplitude * g * (g > 0 ? spec.peak_scale : spec.valley_scale);
                m.at(r, c) = base + texture;
            }
        rec.locations.push_back(std::move(m));
    }
    return rec;
}

} // namespace surfchange
