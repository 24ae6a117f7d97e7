#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "surfchange/error.hpp"
#include "surfchange/height_matrix.hpp"

namespace surfchange {

struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

struct SphereFit {
    Point3 center;
    double radius = 0.0;
    double rms_residual = 0.0; // geometric: | |p - c| - r |
};

/// z = a + b X + c Y
struct PlaneFit {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double rms_residual = 0.0;
};

enum class BaselineModel { Sphere, Plane, None };
enum class SphereBranch { Auto, Upper, Lower };

/// Finite pixels of `m` as (X, Y, z) in µm.
inline std::vector<Point3> pixel_points(const HeightMatrix& m)
{
    std::vector<Point3> pts;
    pts.reserve(m.valid_count());
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c) {
            const double v = m.at(r, c);
            if (std::isfinite(v)) pts.push_back({m.x_um(c), m.y_um(r), v});
        }
    return pts;
}

namespace detail {

struct Normalization {
    Point3 centroid;
    double scale = 1.0;
};

inline Normalization normalization(std::span<const Point3> pts)
{
    Normalization n;
    for (const auto& p : pts) {
        n.centroid.x += p.x;
        n.centroid.y += p.y;
        n.centroid.z += p.z;
    }
    const double count = static_cast<double>(pts.size());
    n.centroid = {n.centroid.x / count, n.centroid.y / count, n.centroid.z / count};
    double ss = 0.0;
    for (const auto& p : pts) {
        const double dx = p.x - n.centroid.x, dy = p.y - n.centroid.y, dz = p.z - n.centroid.z;
        ss += dx * dx + dy * dy + dz * dz;
    }
    n.scale = std::sqrt(ss / count);
    return n;
}

} // namespace detail

/// Algebraic least-squares sphere: x^2 + y^2 + z^2 = 2x Xc + 2y Yc + 2z zc + (r^2 - |c|^2),
/// solved by column-pivoted QR in centred, unit-scaled coordinates.
inline SphereFit fit_sphere(std::span<const Point3> pts)
{
    SURFCHANGE_REQUIRE(pts.size() >= 4, ErrorCode::DegenerateGeometry, "sphere fit needs at least 4 points");
    const auto norm = detail::normalization(pts);
    SURFCHANGE_REQUIRE(norm.scale > 0.0, ErrorCode::DegenerateGeometry, "sphere fit on coincident points");

    const auto n = static_cast<Eigen::Index>(pts.size());
    Eigen::MatrixXd a(n, 4);
    Eigen::VectorXd rhs(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& p = pts[static_cast<std::size_t>(i)];
        const double x = (p.x - norm.centroid.x) / norm.scale;
        const double y = (p.y - norm.centroid.y) / norm.scale;
        const double z = (p.z - norm.centroid.z) / norm.scale;
        a(i, 0) = 2.0 * x;
        a(i, 1) = 2.0 * y;
        a(i, 2) = 2.0 * z;
        a(i, 3) = 1.0;
        rhs(i) = x * x + y * y + z * z;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    qr.setThreshold(1e-10);
    SURFCHANGE_REQUIRE(qr.rank() == 4, ErrorCode::DegenerateGeometry,
                       "sphere fit is singular (coplanar or collinear points)");
    const Eigen::Vector4d sol = qr.solve(rhs);
    const double r2 = sol(3) + sol(0) * sol(0) + sol(1) * sol(1) + sol(2) * sol(2);
    SURFCHANGE_REQUIRE(r2 > 0.0 && std::isfinite(r2), ErrorCode::DegenerateGeometry, "sphere fit has no real radius");

    SphereFit fit;
    fit.center = {norm.centroid.x + norm.scale * sol(0), norm.centroid.y + norm.scale * sol(1),
                  norm.centroid.z + norm.scale * sol(2)};
    fit.radius = norm.scale * std::sqrt(r2);
    double ss = 0.0;
    for (const auto& p : pts) {
        const double dx = p.x - fit.center.x, dy = p.y - fit.center.y, dz = p.z - fit.center.z;
        const double e = std::sqrt(dx * dx + dy * dy + dz * dz) - fit.radius;
        ss += e * e;
    }
    fit.rms_residual = std::sqrt(ss / static_cast<double>(pts.size()));
    return fit;
}

inline SphereFit fit_sphere(const HeightMatrix& m) { return fit_sphere(pixel_points(m)); }

inline PlaneFit fit_plane(std::span<const Point3> pts)
{
    SURFCHANGE_REQUIRE(pts.size() >= 3, ErrorCode::DegenerateGeometry, "plane fit needs at least 3 points");
    const auto norm = detail::normalization(pts);
    const double s = norm.scale > 0.0 ? norm.scale : 1.0;
    const auto n = static_cast<Eigen::Index>(pts.size());
    Eigen::MatrixXd a(n, 3);
    Eigen::VectorXd rhs(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& p = pts[static_cast<std::size_t>(i)];
        a(i, 0) = 1.0;
        a(i, 1) = (p.x - norm.centroid.x) / s;
        a(i, 2) = (p.y - norm.centroid.y) / s;
        rhs(i) = p.z - norm.centroid.z;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    qr.setThreshold(1e-10);
    SURFCHANGE_REQUIRE(qr.rank() == 3, ErrorCode::DegenerateGeometry, "plane fit is singular (collinear points)");
    const Eigen::Vector3d sol = qr.solve(rhs);
    PlaneFit fit;
    fit.b = sol(1) / s;
    fit.c = sol(2) / s;
    fit.a = norm.centroid.z + sol(0) - fit.b * norm.centroid.x - fit.c * norm.centroid.y;
    double ss = 0.0;
    for (const auto& p : pts) {
        const double e = p.z - (fit.a + fit.b * p.x + fit.c * p.y);
        ss += e * e;
    }
    fit.rms_residual = std::sqrt(ss / static_cast<double>(pts.size()));
    return fit;
}

namespace detail {

// Radicand r^2 - (X - Xc)^2 - (Y - Yc)^2 for every pixel, throwing on the first negative one.
inline std::vector<double> cap_offsets(const HeightMatrix& m, const SphereFit& fit)
{
    std::vector<double> root(m.size());
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c) {
            const double dx = m.x_um(c) - fit.center.x;
            const double dy = m.y_um(r) - fit.center.y;
            const double radicand = fit.radius * fit.radius - dx * dx - dy * dy;
            if (radicand < 0.0)
                throw Error(ErrorCode::DegenerateGeometry,
                            "pixel (row " + std::to_string(r) + ", col " + std::to_string(c) + ") of location '" +
                                m.location_id + "' lies outside the fitted sphere cap");
            root[r * m.cols + c] = std::sqrt(radicand);
        }
    return root;
}

} // namespace detail

/// z' = z - (zc +/- sqrt(r^2 - (X - Xc)^2 - (Y - Yc)^2)). Auto picks the branch
/// with the smaller RMS residual.
inline HeightMatrix subtract_baseline(const HeightMatrix& m, const SphereFit& fit,
                                      SphereBranch branch = SphereBranch::Auto)
{
    SURFCHANGE_REQUIRE(fit.radius > 0.0, ErrorCode::InvalidArgument, "sphere radius must be positive");
    const auto root = detail::cap_offsets(m, fit);
    if (branch == SphereBranch::Auto) {
        double upper = 0.0, lower = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (!std::isfinite(m.z[i])) continue;
            const double du = m.z[i] - (fit.center.z + root[i]);
            const double dl = m.z[i] - (fit.center.z - root[i]);
            upper += du * du;
            lower += dl * dl;
        }
        branch = lower < upper ? SphereBranch::Lower : SphereBranch::Upper;
    }
    const double sign = branch == SphereBranch::Lower ? -1.0 : 1.0;
    HeightMatrix out = m;
    for (std::size_t i = 0; i < m.size(); ++i)
        if (std::isfinite(m.z[i])) out.z[i] = m.z[i] - (fit.center.z + sign * root[i]);
    return out;
}

inline HeightMatrix subtract_plane(const HeightMatrix& m, const PlaneFit& fit)
{
    HeightMatrix out = m;
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c) {
            double& v = out.at(r, c);
            if (std::isfinite(v)) v -= fit.a + fit.b * m.x_um(c) + fit.c * m.y_um(r);
        }
    return out;
}

inline HeightMatrix calibrate_location(const HeightMatrix& m, BaselineModel model = BaselineModel::Sphere)
{
    switch (model) {
    case BaselineModel::Sphere: return subtract_baseline(m, fit_sphere(m));
    case BaselineModel::Plane: return subtract_plane(m, fit_plane(pixel_points(m)));
    case BaselineModel::None: return m;
    }
    return m;
}

/// Independent baseline per location: each scan covers its own small cap.
inline StageRecord calibrate_stage(const StageRecord& rec, BaselineModel model = BaselineModel::Sphere)
{
    SURFCHANGE_REQUIRE(!rec.locations.empty(), ErrorCode::InsufficientData,
                       "cannot calibrate empty stage '" + rec.stage_label + "'");
    StageRecord out = rec;
    for (auto& m : out.locations) {
        try {
            m = calibrate_location(m, model);
        } catch (const Error& e) {
            throw Error(e.code(), "location '" + m.location_id + "': " + e.what());
        }
    }
    return out;
}

} // namespace surfchange
