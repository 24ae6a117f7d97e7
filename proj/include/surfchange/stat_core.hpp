#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "surfchange/error.hpp"
#include "surfchange/roughness.hpp"

namespace surfchange {

namespace detail {

// Continued fraction for I_x(a, b), modified Lentz.
inline double incbeta_cf(double a, double b, double x)
{
    constexpr int kMaxIter = 100000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) return h;
    }
    throw Error(ErrorCode::NumericalFailure, "incomplete beta continued fraction did not converge");
}

inline double log_beta(double a, double b)
{
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

} // namespace detail

/// Regularized incomplete beta I_x(a, b). `y` must equal 1 - x; passing it
/// separately keeps full precision when x is close to 1.
inline double incomplete_beta(double x, double y, double a, double b)
{
    SURFCHANGE_REQUIRE(a > 0 && b > 0, ErrorCode::InvalidArgument, "incomplete beta needs a, b > 0");
    if (x <= 0.0) return 0.0;
    if (y <= 0.0) return 1.0;
    const double log_front = a * std::log(x) + b * std::log(y) - detail::log_beta(a, b);
    if (x < (a + 1.0) / (a + b + 2.0)) return std::exp(log_front) * detail::incbeta_cf(a, b, x) / a;
    return 1.0 - std::exp(log_front) * detail::incbeta_cf(b, a, y) / b;
}

inline double incomplete_beta(double x, double a, double b) { return incomplete_beta(x, 1.0 - x, a, b); }

/// Upper tail P(T >= t) of Student's t with `df` degrees of freedom.
inline double student_t_sf(double t, double df)
{
    SURFCHANGE_REQUIRE(!std::isnan(t) && std::isfinite(df), ErrorCode::InvalidArgument, "non-finite t-test input");
    SURFCHANGE_REQUIRE(df > 0, ErrorCode::InvalidArgument, "t distribution needs df > 0");
    if (t == 0.0) return 0.5;
    if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
    const double t2 = t * t;
    const double tail = 0.5 * incomplete_beta(df / (df + t2), t2 / (df + t2), 0.5 * df, 0.5);
    return t > 0 ? tail : 1.0 - tail;
}

/// Upper tail P(F >= f) of the F distribution with (df1, df2) degrees of freedom.
inline double f_sf(double f, double df1, double df2)
{
    SURFCHANGE_REQUIRE(!std::isnan(f) && std::isfinite(df1) && std::isfinite(df2), ErrorCode::InvalidArgument,
                       "non-finite F-test input");
    SURFCHANGE_REQUIRE(f >= 0.0, ErrorCode::InvalidArgument, "F statistic must be non-negative");
    SURFCHANGE_REQUIRE(df1 > 0 && df2 > 0, ErrorCode::InvalidArgument, "F distribution needs df > 0");
    if (f == 0.0) return 1.0;
    if (std::isinf(f)) return 0.0;
    const double denom = df2 + df1 * f;
    return incomplete_beta(df2 / denom, df1 * f / denom, 0.5 * df2, 0.5 * df1);
}

/// t such that student_t_sf(t, df) == upper_tail, by bracketing and bisection.
inline double student_t_quantile_upper(double upper_tail, double df)
{
    SURFCHANGE_REQUIRE(upper_tail > 0.0 && upper_tail < 1.0, ErrorCode::InvalidArgument,
                       "tail probability must lie in (0, 1)");
    if (upper_tail == 0.5) return 0.0;
    if (upper_tail > 0.5) return -student_t_quantile_upper(1.0 - upper_tail, df);
    double lo = 0.0;
    double hi = 1.0;
    while (student_t_sf(hi, df) > upper_tail) {
        lo = hi;
        hi *= 2.0;
    }
    for (int i = 0; i < 200 && hi - lo > 1e-14 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (student_t_sf(mid, df) > upper_tail ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Pointwise two-sample tests

enum class TestKind { MeanGreater, MeanLess, VarianceGreater };
enum class TTestVariant { Welch, Pooled };

/// Sample mean and 1/(n-1) variance of one group at one grid point.
struct GroupMoments {
    double mean = 0.0;
    double var = 0.0;
    double n = 0.0;
};

/// Two-pass moments, shifted by the first value so constant data gives var == 0 exactly.
template <typename Get>
GroupMoments moments_by(std::size_t n, Get&& get)
{
    const double shift = get(0);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += get(i) - shift;
    const double dmean = s / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = get(i) - shift - dmean;
        ss += d * d;
    }
    return {shift + dmean, n > 1 ? ss / static_cast<double>(n - 1) : 0.0, static_cast<double>(n)};
}

inline GroupMoments moments(std::span<const double> values)
{
    SURFCHANGE_REQUIRE(!values.empty(), ErrorCode::InsufficientData, "moments of empty group");
    return moments_by(values.size(), [&](std::size_t i) { return values[i]; });
}

struct PointPValue {
    double p = 0.5;
    bool degenerate = false;
};

/// One-sided two-sample t-test; MeanGreater tests H1: mu1 > mu2.
/// Zero variance in both groups: p = 0.5 on equal means, else 0 or 1 by sign.
inline PointPValue mean_test_p(const GroupMoments& g1, const GroupMoments& g2, TestKind kind,
                               TTestVariant variant = TTestVariant::Welch)
{
    const double diff = kind == TestKind::MeanLess ? g2.mean - g1.mean : g1.mean - g2.mean;
    double se2 = 0.0;
    double df = 0.0;
    if (variant == TTestVariant::Welch) {
        const double v1 = g1.var / g1.n;
        const double v2 = g2.var / g2.n;
        se2 = v1 + v2;
        if (se2 > 0.0) df = se2 * se2 / (v1 * v1 / (g1.n - 1.0) + v2 * v2 / (g2.n - 1.0));
    } else {
        df = g1.n + g2.n - 2.0;
        const double pooled = ((g1.n - 1.0) * g1.var + (g2.n - 1.0) * g2.var) / df;
        se2 = pooled * (1.0 / g1.n + 1.0 / g2.n);
    }
    if (!(se2 > 0.0)) {
        if (diff == 0.0) return {0.5, true};
        return {diff > 0.0 ? 0.0 : 1.0, true};
    }
    return {student_t_sf(diff / std::sqrt(se2), df), false};
}

/// One-sided F-test of H1: sigma1^2 > sigma2^2 with df (n1 - 1, n2 - 1).
inline PointPValue variance_test_p(const GroupMoments& g1, const GroupMoments& g2)
{
    if (!(g2.var > 0.0)) {
        if (g1.var > 0.0) return {0.0, true};
        return {0.5, true};
    }
    return {f_sf(g1.var / g2.var, g1.n - 1.0, g2.n - 1.0), false};
}

inline PointPValue pointwise_p(const GroupMoments& g1, const GroupMoments& g2, TestKind kind,
                               TTestVariant variant = TTestVariant::Welch)
{
    if (kind == TestKind::VarianceGreater) return variance_test_p(g1, g2);
    return mean_test_p(g1, g2, kind, variant);
}

/// p[i] belongs to grid index domain[i].
struct PointwisePValues {
    std::vector<double> p;
    TestKind test_kind = TestKind::MeanGreater;
    std::vector<std::size_t> domain;
    std::size_t degenerate_points = 0;
};

inline void check_comparable(const StageSample& g1, const StageSample& g2)
{
    g1.validate();
    g2.validate();
    SURFCHANGE_REQUIRE(g1.grid.points == g2.grid.points, ErrorCode::InvalidArgument,
                       "stage samples are evaluated on different grids");
}

inline PointwisePValues pointwise_test(const StageSample& g1, const StageSample& g2, TestKind kind,
                                       std::vector<std::size_t> domain,
                                       TTestVariant variant = TTestVariant::Welch)
{
    check_comparable(g1, g2);
    SURFCHANGE_REQUIRE(!domain.empty(), ErrorCode::InvalidArgument, "empty test domain");
    PointwisePValues out;
    out.test_kind = kind;
    out.p.reserve(domain.size());
    for (std::size_t k : domain) {
        SURFCHANGE_REQUIRE(k < g1.grid.size(), ErrorCode::InvalidArgument, "domain index outside grid");
        const auto m1 = moments_by(g1.count(), [&](std::size_t j) { return g1.curves[j][k]; });
        const auto m2 = moments_by(g2.count(), [&](std::size_t j) { return g2.curves[j][k]; });
        const auto r = pointwise_p(m1, m2, kind, variant);
        out.p.push_back(r.p);
        if (r.degenerate) ++out.degenerate_points;
    }
    out.domain = std::move(domain);
    return out;
}

enum class MeanDirection { Greater, Less };

inline PointwisePValues pointwise_mean_test(const StageSample& g1, const StageSample& g2, MeanDirection direction,
                                            std::vector<std::size_t> domain,
                                            TTestVariant variant = TTestVariant::Welch)
{
    const auto kind = direction == MeanDirection::Greater ? TestKind::MeanGreater : TestKind::MeanLess;
    return pointwise_test(g1, g2, kind, std::move(domain), variant);
}

inline PointwisePValues pointwise_variance_test(const StageSample& g1, const StageSample& g2,
                                                std::vector<std::size_t> domain)
{
    return pointwise_test(g1, g2, TestKind::VarianceGreater, std::move(domain));
}

inline const char* to_string(TestKind kind)
{
    switch (kind) {
    case TestKind::MeanGreater: return "mean_greater";
    case TestKind::MeanLess: return "mean_less";
    case TestKind::VarianceGreater: return "variance_greater";
    }
    return "?";
}

inline const char* to_string(TTestVariant v) { return v == TTestVariant::Welch ? "welch" : "pooled"; }

} // namespace surfchange
