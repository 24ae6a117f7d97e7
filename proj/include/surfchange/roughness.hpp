#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "surfchange/error.hpp"
#include "surfchange/height_matrix.hpp"
#include "surfchange/numeric.hpp"

namespace surfchange {

inline constexpr std::size_t kDefaultGridSize = 1000;
inline constexpr double kDefaultSMax = 0.998;
inline constexpr double kDefaultTau = 0.25;

/// Pixel heights sorted from the highest peak (s = 0) to the deepest valley (s = 1).
struct BearingAreaCurve {
    std::vector<double> sorted_heights;
    std::string location_id;
    std::string stage_id;
};

/// Evaluation points s_1 < ... < s_m in [0, 1] plus the tail cut-off tau.
struct QuantileGrid {
    std::vector<double> points;
    double tau = kDefaultTau;

    /// m equally spaced points on [0, s_max].
    static QuantileGrid uniform(std::size_t m, double s_max = kDefaultSMax, double tau = kDefaultTau)
    {
        SURFCHANGE_REQUIRE(m >= 2, ErrorCode::InvalidArgument, "grid needs at least 2 points");
        SURFCHANGE_REQUIRE(s_max > 0.0 && s_max <= 1.0, ErrorCode::InvalidArgument, "s_max must lie in (0, 1]");
        QuantileGrid g;
        g.tau = tau;
        g.points.resize(m);
        for (std::size_t k = 0; k < m; ++k)
            g.points[k] = s_max * static_cast<double>(k) / static_cast<double>(m - 1);
        g.points.back() = s_max;
        g.validate();
        return g;
    }

    std::size_t size() const { return points.size(); }

    /// Indices with s_k <= tau (the peak side).
    std::vector<std::size_t> upper_tail(double cut) const
    {
        std::vector<std::size_t> idx;
        for (std::size_t k = 0; k < points.size(); ++k)
            if (points[k] <= cut) idx.push_back(k);
        return idx;
    }
    std::vector<std::size_t> upper_tail() const { return upper_tail(tau); }

    /// Indices with s_k >= 1 - tau (the valley side).
    std::vector<std::size_t> lower_tail(double cut) const
    {
        std::vector<std::size_t> idx;
        for (std::size_t k = 0; k < points.size(); ++k)
            if (points[k] >= 1.0 - cut) idx.push_back(k);
        return idx;
    }
    std::vector<std::size_t> lower_tail() const { return lower_tail(tau); }

    std::vector<std::size_t> all() const
    {
        std::vector<std::size_t> idx(points.size());
        for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
        return idx;
    }

    void validate() const
    {
        SURFCHANGE_REQUIRE(tau > 0.0 && tau < 0.5, ErrorCode::InvalidArgument, "tau must lie in (0, 0.5)");
        SURFCHANGE_REQUIRE(!points.empty(), ErrorCode::InvalidArgument, "empty quantile grid");
        for (std::size_t k = 0; k < points.size(); ++k) {
            SURFCHANGE_REQUIRE(points[k] >= 0.0 && points[k] <= 1.0, ErrorCode::InvalidArgument,
                               "grid point outside [0, 1]");
            SURFCHANGE_REQUIRE(k == 0 || points[k] > points[k - 1], ErrorCode::InvalidArgument,
                               "grid points must be strictly increasing");
        }
        SURFCHANGE_REQUIRE(!upper_tail().empty(), ErrorCode::InvalidArgument, "grid has no point in [0, tau]");
        SURFCHANGE_REQUIRE(!lower_tail().empty(), ErrorCode::InvalidArgument, "grid has no point in [1 - tau, 1]");
    }

    bool operator==(const QuantileGrid&) const = default;
};

/// One stage's curves evaluated on a shared grid; curves[j][k] = z_j(s_k).
struct StageSample {
    std::string stage_id;
    QuantileGrid grid;
    std::vector<std::vector<double>> curves;

    std::size_t count() const { return curves.size(); }

    void validate() const
    {
        SURFCHANGE_REQUIRE(curves.size() >= 2, ErrorCode::InsufficientData,
                           "stage sample '" + stage_id + "' needs at least 2 curves");
        for (const auto& c : curves)
            SURFCHANGE_REQUIRE(c.size() == grid.size(), ErrorCode::InvalidArgument,
                               "curve length does not match grid size");
    }
};

/// Arithmetic mean absolute deviation of the finite heights about their mean.
inline double compute_sa(const HeightMatrix& m)
{
    double n = 0.0;
    double sum = 0.0;
    for (double v : m.z) {
        if (!std::isfinite(v)) continue;
        sum += v;
        n += 1.0;
    }
    SURFCHANGE_REQUIRE(n > 0.0, ErrorCode::InsufficientData, "Sa of empty matrix");
    const double mean = sum / n;
    double dev = 0.0;
    for (double v : m.z)
        if (std::isfinite(v)) dev += std::abs(v - mean);
    return dev / n;
}

inline std::vector<double> stage_sa(const StageRecord& rec)
{
    std::vector<double> out;
    out.reserve(rec.locations.size());
    for (const auto& m : rec.locations) out.push_back(compute_sa(m));
    return out;
}

/// Median of the per-location Sa values.
inline double median_sa(const StageRecord& rec)
{
    SURFCHANGE_REQUIRE(!rec.locations.empty(), ErrorCode::InsufficientData,
                       "median Sa of empty stage '" + rec.stage_label + "'");
    return median(stage_sa(rec));
}

inline BearingAreaCurve extract_bac(const HeightMatrix& m)
{
    BearingAreaCurve bac;
    bac.sorted_heights = m.finite_values();
    SURFCHANGE_REQUIRE(bac.sorted_heights.size() >= 2, ErrorCode::InsufficientData,
                       "location '" + m.location_id + "' has fewer than 2 finite pixels");
    std::sort(bac.sorted_heights.begin(), bac.sorted_heights.end(), std::greater<>());
    bac.location_id = m.location_id;
    bac.stage_id = m.stage_id;
    return bac;
}

/// Linear interpolation between descending order statistics at u = s (n - 1).
inline double evaluate_at(const BearingAreaCurve& bac, double s)
{
    const auto& h = bac.sorted_heights;
    const std::size_t n = h.size();
    const double u = s * static_cast<double>(n - 1);
    const auto lo = std::min(static_cast<std::size_t>(std::floor(u)), n - 1);
    const auto hi = std::min(static_cast<std::size_t>(std::ceil(u)), n - 1);
    const double frac = u - static_cast<double>(lo);
    if (lo == hi || frac == 0.0) return h[lo];
    return h[lo] + frac * (h[hi] - h[lo]);
}

inline std::vector<double> evaluate_on_grid(const BearingAreaCurve& bac, const QuantileGrid& grid)
{
    SURFCHANGE_REQUIRE(bac.sorted_heights.size() >= 2, ErrorCode::InsufficientData, "curve too short");
    std::vector<double> out(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) out[k] = evaluate_at(bac, grid.points[k]);
    return out;
}

inline StageSample build_stage_sample(const StageRecord& rec, const QuantileGrid& grid)
{
    grid.validate();
    StageSample sample;
    sample.stage_id = rec.stage_id;
    sample.grid = grid;
    sample.curves.reserve(rec.locations.size());
    for (const auto& m : rec.locations) sample.curves.push_back(evaluate_on_grid(extract_bac(m), grid));
    return sample;
}

} // namespace surfchange
