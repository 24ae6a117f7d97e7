#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "surfchange/error.hpp"

namespace surfchange {

/// Instrument pixel pitch used when a manifest does not give one (µm).
inline constexpr double kDefaultDxUm = 0.359;
inline constexpr double kDefaultDyUm = 0.369;

/// Maximum fraction of non-finite pixels tolerated in one scan.
inline constexpr double kMaxDroppedFraction = 0.01;

/// One profilometer scan. Row index = Y, column index = X, heights in µm.
/// Pixels removed by cleaning stay in the grid as NaN so that every finite
/// pixel keeps its (X, Y) coordinate; `dropped` counts them.
struct HeightMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    double dx_um = kDefaultDxUm;
    double dy_um = kDefaultDyUm;
    std::vector<double> z;
    std::string location_id;
    std::string stage_id;
    std::size_t dropped = 0;

    double at(std::size_t row, std::size_t col) const { return z[row * cols + col]; }
    double& at(std::size_t row, std::size_t col) { return z[row * cols + col]; }

    double x_um(std::size_t col) const { return static_cast<double>(col) * dx_um; }
    double y_um(std::size_t row) const { return static_cast<double>(row) * dy_um; }

    std::size_t size() const { return rows * cols; }
    std::size_t valid_count() const { return size() - dropped; }

    std::vector<double> finite_values() const
    {
        std::vector<double> out;
        out.reserve(valid_count());
        for (double v : z)
            if (std::isfinite(v)) out.push_back(v);
        return out;
    }

    void validate() const
    {
        SURFCHANGE_REQUIRE(rows > 0 && cols > 0, ErrorCode::MalformedInput,
                           "height matrix '" + location_id + "' is empty");
        SURFCHANGE_REQUIRE(z.size() == rows * cols, ErrorCode::MalformedInput,
                           "height matrix '" + location_id + "' has wrong element count");
        SURFCHANGE_REQUIRE(dx_um > 0 && dy_um > 0 && std::isfinite(dx_um) && std::isfinite(dy_um),
                           ErrorCode::InvalidArgument, "pixel pitch must be positive");
        std::size_t bad = 0;
        for (double v : z)
            if (!std::isfinite(v)) ++bad;
        SURFCHANGE_REQUIRE(bad == dropped, ErrorCode::MalformedInput,
                           "height matrix '" + location_id + "' dropped-pixel count is inconsistent");
    }
};

/// All scans taken after one finishing stage.
struct StageRecord {
    std::string stage_id;
    std::string stage_label;
    std::vector<HeightMatrix> locations;
    std::optional<std::string> timestamp;

    std::size_t dropped_pixels() const
    {
        std::size_t n = 0;
        for (const auto& m : locations) n += m.dropped;
        return n;
    }

    void validate() const
    {
        SURFCHANGE_REQUIRE(locations.size() >= 2, ErrorCode::InsufficientData,
                           "insufficient locations in stage '" + stage_label + "' (need at least 2, have " +
                               std::to_string(locations.size()) + ")");
        for (const auto& m : locations) {
            SURFCHANGE_REQUIRE(m.stage_id == stage_id, ErrorCode::MalformedInput,
                               "location '" + m.location_id + "' belongs to another stage");
            m.validate();
        }
    }
};

} // namespace surfchange
