#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "surfchange/calibration.hpp"
#include "surfchange/roughness.hpp"
#include "surfchange/synthetic.hpp"

using namespace surfchange;

namespace {

constexpr double kRadius = 1688.0;

std::vector<Point3> fibonacci_sphere(std::size_t n, Point3 c, double r)
{
    std::vector<Point3> pts;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (std::size_t i = 0; i < n; ++i) {
        const double y = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
        const double rad = std::sqrt(1.0 - y * y);
        const double th = golden * static_cast<double>(i);
        pts.push_back({c.x + r * rad * std::cos(th), c.y + r * y, c.z + r * rad * std::sin(th)});
    }
    return pts;
}

// Upper cap z = zc + sqrt(r^2 - dx^2 - dy^2) sampled on a pixel grid.
HeightMatrix cap(std::size_t rows, std::size_t cols, Point3 c, double r, const auto& texture)
{
    HeightMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.z.resize(rows * cols);
    m.location_id = "cap";
    m.stage_id = "st";
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) {
            const double dx = m.x_um(j) - c.x, dy = m.y_um(i) - c.y;
            m.at(i, j) = c.z + std::sqrt(r * r - dx * dx - dy * dy) + texture(m.x_um(j), m.y_um(i));
        }
    return m;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// Geometric least squares by Gauss-Newton on (c, r), started from `start`.
SphereFit geometric_refine(const std::vector<Point3>& pts, SphereFit start)
{
    Eigen::Vector4d x(start.center.x, start.center.y, start.center.z, start.radius);
    for (int it = 0; it < 50; ++it) {
        Eigen::Matrix4d jtj = Eigen::Matrix4d::Zero();
        Eigen::Vector4d jtr = Eigen::Vector4d::Zero();
        for (const auto& p : pts) {
            const Eigen::Vector3d d(p.x - x(0), p.y - x(1), p.z - x(2));
            const double dist = d.norm();
            Eigen::Vector4d j;
            j << -d / dist, -1.0;
            jtj += j * j.transpose();
            jtr += j * (dist - x(3));
        }
        const Eigen::Vector4d step = jtj.ldlt().solve(-jtr);
        x += step;
        if (step.norm() < 1e-12 * x.norm()) break;
    }
    SphereFit f;
    f.center = {x(0), x(1), x(2)};
    f.radius = x(3);
    return f;
}

} // namespace

TEST(SphereFit, ExactPointsRecovered)
{
    const Point3 c{1, 2, 3};
    const auto fit = fit_sphere(fibonacci_sphere(1000, c, kRadius));
    EXPECT_LE(rel(fit.center.x, c.x), 1e-9);
    EXPECT_LE(rel(fit.center.y, c.y), 1e-9);
    EXPECT_LE(rel(fit.center.z, c.z), 1e-9);
    EXPECT_LE(rel(fit.radius, kRadius), 1e-9);
    EXPECT_LE(fit.rms_residual, 1e-9);
}

TEST(SphereFit, ExactCapRecovered)
{
    const Point3 c{115.0, 88.0, -kRadius};
    const auto m = cap(48, 64, c, kRadius, [](double, double) { return 0.0; });
    const auto fit = fit_sphere(m);
    EXPECT_LE(rel(fit.radius, kRadius), 1e-9);
    EXPECT_LE(rel(fit.center.z, c.z), 1e-9);
    EXPECT_LE(fit.rms_residual, 1e-9 * kRadius);
    for (double v : subtract_baseline(m, fit).z) EXPECT_NEAR(v, 0.0, 1e-9);
}

TEST(SphereFit, NoisyCapAgreesWithGeometricRefinement)
{
    std::mt19937_64 rng(42);
    std::normal_distribution<double> n(0.0, 0.01);
    // Full 640 x 480 frame at the instrument pitch, apex near the frame centre.
    const Point3 c{0.5 * 639 * kDefaultDxUm + 4.0, 0.5 * 479 * kDefaultDyUm - 3.0, -kRadius};
    const auto m = cap(480, 640, c, kRadius, [&](double, double) { return n(rng); });
    const auto pts = pixel_points(m);
    const auto fit = fit_sphere(pts);
    EXPECT_LE(rel(fit.radius, kRadius), 1e-4);
    const auto geo = geometric_refine(pts, fit);
    EXPECT_LE(rel(fit.radius, geo.radius), 1e-4);
    EXPECT_NEAR(fit.rms_residual, 0.01, 1e-3);
}

TEST(SphereFit, NoisyFullSphere)
{
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0.0, 0.01);
    auto pts = fibonacci_sphere(100000, {1, 2, 3}, kRadius);
    for (auto& p : pts) p.z += n(rng);
    EXPECT_LE(rel(fit_sphere(pts).radius, kRadius), 1e-4);
}

TEST(SphereFit, OrderInvariant)
{
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(0.0, 0.02);
    auto m = cap(30, 40, {7.0, 5.0, -kRadius}, kRadius, [&](double, double) { return n(rng); });
    auto pts = pixel_points(m);
    const auto a = fit_sphere(pts);
    std::shuffle(pts.begin(), pts.end(), rng);
    const auto b = fit_sphere(pts);
    EXPECT_LE(rel(a.radius, b.radius), 1e-9);
    EXPECT_NEAR(a.center.x, b.center.x, 1e-9 * kRadius);
    EXPECT_NEAR(a.center.z, b.center.z, 1e-9 * kRadius);
}

TEST(SphereFit, DegenerateConfigurations)
{
    std::vector<Point3> plane;
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j) plane.push_back({double(i), double(j), 0.5 * i - 0.2 * j + 3.0});
    EXPECT_THROW(fit_sphere(plane), Error);
    try {
        fit_sphere(plane);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DegenerateGeometry);
    }
    EXPECT_THROW(fit_sphere(std::vector<Point3>{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}), Error);
    EXPECT_THROW(fit_sphere(std::vector<Point3>(5, Point3{1, 1, 1})), Error);
}

TEST(Baseline, SelfSubtractionAndShift)
{
    const Point3 c{10.0, 9.0, -kRadius};
    SphereFit fit;
    fit.center = c;
    fit.radius = kRadius;
    const auto m = cap(20, 30, c, kRadius, [](double, double) { return 0.0; });
    for (double v : subtract_baseline(m, fit).z) EXPECT_NEAR(v, 0.0, 1e-9);
    const auto shifted = cap(20, 30, c, kRadius, [](double, double) { return 0.37; });
    for (double v : subtract_baseline(shifted, fit, SphereBranch::Upper).z) EXPECT_NEAR(v, 0.37, 1e-9);
}

TEST(Baseline, SinusoidalTextureRecovered)
{
    const Point3 c{11.5, 8.8, -kRadius};
    const auto texture = [](double x, double y) { return 0.05 * std::sin(0.3 * x) * std::cos(0.2 * y); };
    const auto m = cap(48, 64, c, kRadius, texture);
    SphereFit fit;
    fit.center = c;
    fit.radius = kRadius;
    const auto out = subtract_baseline(m, fit);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) EXPECT_NEAR(out.at(i, j), texture(m.x_um(j), m.y_um(i)), 1e-9);
    EXPECT_EQ(out.location_id, m.location_id);
    EXPECT_EQ(out.rows, m.rows);
}

TEST(Baseline, ShiftEquivariance)
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 0.01);
    const Point3 c{11.5, 8.8, -kRadius};
    auto m = cap(20, 20, c, kRadius, [&](double, double) { return n(rng); });
    const auto fit = fit_sphere(m);
    auto moved = m;
    for (auto& v : moved.z) v += 2.5;
    auto moved_fit = fit;
    moved_fit.center.z += 2.5;
    const auto a = subtract_baseline(m, fit), b = subtract_baseline(moved, moved_fit);
    for (std::size_t i = 0; i < a.z.size(); ++i) EXPECT_NEAR(a.z[i], b.z[i], 1e-9);
}

TEST(Baseline, LowerBranchSelected)
{
    const Point3 c{11.5, 8.8, kRadius};
    HeightMatrix m;
    m.rows = 10;
    m.cols = 10;
    m.z.resize(100);
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < 10; ++j) {
            const double dx = m.x_um(j) - c.x, dy = m.y_um(i) - c.y;
            m.at(i, j) = c.z - std::sqrt(kRadius * kRadius - dx * dx - dy * dy) + 0.1;
        }
    SphereFit fit;
    fit.center = c;
    fit.radius = kRadius;
    for (double v : subtract_baseline(m, fit).z) EXPECT_NEAR(v, 0.1, 1e-9);
}

TEST(Baseline, NegativeRadicandNamesPixel)
{
    HeightMatrix m;
    m.rows = 4;
    m.cols = 4;
    m.z.assign(16, 0.0);
    m.location_id = "edge";
    SphereFit fit;
    fit.center = {0, 0, 0};
    fit.radius = 1.0;
    try {
        subtract_baseline(m, fit);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DegenerateGeometry);
        EXPECT_NE(std::string(e.what()).find("row"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("edge"), std::string::npos);
    }
}

TEST(CalibrateStage, SyntheticCapsCentreNearZero)
{
    SyntheticStageSpec spec;
    spec.seed = 12;
    const auto raw = synthetic_stage(spec);
    const auto cal = calibrate_stage(raw);
    ASSERT_EQ(cal.locations.size(), 9u);
    for (const auto& m : cal.locations) {
        double mean = 0;
        for (double v : m.z) mean += v;
        mean /= static_cast<double>(m.size());
        EXPECT_LT(std::abs(mean), 0.2 * spec.roughness_um) << m.location_id;
        EXPECT_NEAR(compute_sa(m), spec.roughness_um * std::sqrt(2.0 / std::numbers::pi), 0.5 * spec.roughness_um);
    }
}

TEST(CalibrateStage, FlatBypassUsesPlane)
{
    SyntheticStageSpec spec;
    spec.flat = true;
    spec.seed = 13;
    const auto raw = synthetic_stage(spec);
    const auto cal = calibrate_stage(raw, BaselineModel::Plane);
    for (const auto& m : cal.locations) {
        double mean = 0;
        for (double v : m.z) mean += v;
        EXPECT_NEAR(mean / static_cast<double>(m.size()), 0.0, 1e-12);
    }
    const auto untouched = calibrate_stage(raw, BaselineModel::None);
    EXPECT_EQ(untouched.locations[0].z, raw.locations[0].z);
}

TEST(CalibrateStage, EmptyStageFails)
{
    StageRecord empty;
    EXPECT_THROW(calibrate_stage(empty), Error);
}

TEST(PlaneFit, RecoversCoefficients)
{
    std::vector<Point3> pts;
    for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 9; ++j) pts.push_back({0.359 * i, 0.369 * j, 1.5 + 0.01 * (0.359 * i) - 0.02 * (0.369 * j)});
    const auto f = fit_plane(pts);
    EXPECT_NEAR(f.a, 1.5, 1e-12);
    EXPECT_NEAR(f.b, 0.01, 1e-12);
    EXPECT_NEAR(f.c, -0.02, 1e-12);
    EXPECT_NEAR(f.rms_residual, 0.0, 1e-12);
}
