#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <numeric>
#include <span>
#include <thread>
#include <vector>

#include "surfchange/counter_rng.hpp"
#include "surfchange/error.hpp"
#include "surfchange/numeric.hpp"
#include "surfchange/stat_core.hpp"

namespace surfchange {

inline constexpr std::size_t kDefaultPermutations = 50000;
inline constexpr std::uint64_t kDefaultSeed = 20240607;
inline constexpr std::uint64_t kMaxExhaustive = 5'000'000;

/// Reduction of a pointwise p-vector: "at least one" (minP), "all" (maxP),
/// "at least half" (medP) of the tested subdomain.
enum class FamilyStatistic { MinP, MaxP, MedP };

inline const char* to_string(FamilyStatistic kind)
{
    switch (kind) {
    case FamilyStatistic::MinP: return "minP";
    case FamilyStatistic::MaxP: return "maxP";
    case FamilyStatistic::MedP: return "medP";
    }
    return "?";
}

struct PermutationConfig {
    std::size_t n_permutations = kDefaultPermutations;
    std::uint64_t seed = kDefaultSeed;
    bool exhaustive = false;
    unsigned threads = 0; // 0: std::thread::hardware_concurrency()
};

struct FamilyTestResult {
    double observed_stat = 1.0;
    std::uint64_t exceed_count = 0; // #{l : p^(l) <= observed_stat}
    std::uint64_t n_used = 0;
    FamilyStatistic stat_kind = FamilyStatistic::MaxP;
    std::size_t degenerate_points = 0;

    double corrected_p() const
    {
        return n_used == 0 ? 1.0 : static_cast<double>(exceed_count) / static_cast<double>(n_used);
    }

    bool operator==(const FamilyTestResult&) const = default;
};

inline double family_stat(std::span<const double> p, FamilyStatistic kind)
{
    SURFCHANGE_REQUIRE(!p.empty(), ErrorCode::InvalidArgument, "family statistic over an empty domain");
    switch (kind) {
    case FamilyStatistic::MinP: return *std::min_element(p.begin(), p.end());
    case FamilyStatistic::MaxP: return *std::max_element(p.begin(), p.end());
    case FamilyStatistic::MedP: return median(std::vector<double>(p.begin(), p.end()));
    }
    return 1.0;
}

inline double family_stat(const PointwisePValues& p, FamilyStatistic kind) { return family_stat(p.p, kind); }

/// Curves of the pooled sample assigned to each group, each list ascending.
struct Relabeling {
    std::vector<std::uint32_t> group1;
    std::vector<std::uint32_t> group2;

    bool operator==(const Relabeling&) const = default;
};

/// Uniformly random choice of `j1` of the `j1 + j2` pooled curves for group 1
/// (partial Fisher-Yates).
inline Relabeling draw_relabeling(CounterRng& rng, std::size_t j1, std::size_t j2)
{
    SURFCHANGE_REQUIRE(j1 >= 1 && j2 >= 1, ErrorCode::InvalidArgument, "both groups need at least one curve");
    const std::size_t n = j1 + j2;
    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    for (std::size_t i = 0; i < j1; ++i) {
        const auto pick = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(idx[i], idx[pick]);
    }
    Relabeling r;
    r.group1.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(j1));
    r.group2.assign(idx.begin() + static_cast<std::ptrdiff_t>(j1), idx.end());
    std::sort(r.group1.begin(), r.group1.end());
    std::sort(r.group2.begin(), r.group2.end());
    return r;
}

/// C(n, k), saturating at UINT64_MAX.
inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k)
{
    if (k > n) return 0;
    k = std::min(k, n - k);
    unsigned __int128 r = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i;
        if (r > UINT64_MAX) return UINT64_MAX;
    }
    return static_cast<std::uint64_t>(r);
}

/// What to compute at each grid point of the family's subdomain.
struct PointwiseTestSpec {
    TestKind kind = TestKind::MeanGreater;
    TTestVariant variant = TTestVariant::Welch;
    std::vector<std::size_t> domain;
};

namespace detail {

// Both groups pooled, restricted to the test domain, stored point-major so a
// relabeling only gathers within one contiguous row per point.
class PooledCurves {
public:
    PooledCurves(const StageSample& g1, const StageSample& g2, const std::vector<std::size_t>& domain)
        : n_(g1.count() + g2.count()), points_(domain.size()), data_(n_ * points_)
    {
        for (std::size_t d = 0; d < points_; ++d) {
            double* row = &data_[d * n_];
            std::size_t i = 0;
            for (const auto& c : g1.curves) row[i++] = c[domain[d]];
            for (const auto& c : g2.curves) row[i++] = c[domain[d]];
        }
    }

    std::size_t curves() const { return n_; }

    /// Fill `p` with the pointwise p-values under `labels`; returns the degenerate count.
    std::size_t pvalues(const Relabeling& labels, TestKind kind, TTestVariant variant, std::vector<double>& p) const
    {
        p.resize(points_);
        std::size_t degenerate = 0;
        for (std::size_t d = 0; d < points_; ++d) {
            const double* row = &data_[d * n_];
            const auto m1 = moments_by(labels.group1.size(), [&](std::size_t i) { return row[labels.group1[i]]; });
            const auto m2 = moments_by(labels.group2.size(), [&](std::size_t i) { return row[labels.group2[i]]; });
            const auto r = pointwise_p(m1, m2, kind, variant);
            p[d] = r.p;
            if (r.degenerate) ++degenerate;
        }
        return degenerate;
    }

private:
    std::size_t n_;
    std::size_t points_;
    std::vector<double> data_;
};

inline Relabeling identity_labels(std::size_t j1, std::size_t j2)
{
    Relabeling r;
    r.group1.resize(j1);
    r.group2.resize(j2);
    std::iota(r.group1.begin(), r.group1.end(), 0u);
    std::iota(r.group2.begin(), r.group2.end(), static_cast<std::uint32_t>(j1));
    return r;
}

} // namespace detail

/// Westfall-Young whole-curve permutation test of one hypothesis family.
///
/// The observed labeling is permutation l = 1; l = 2..N are random relabelings
/// whose draw is a pure function of (seed, l), so the count is identical for
/// any thread split. Exhaustive mode enumerates every C(J1 + J2, J1) labeling.
inline FamilyTestResult westfall_young(const StageSample& g1, const StageSample& g2, const PointwiseTestSpec& test,
                                       FamilyStatistic kind, const PermutationConfig& cfg)
{
    check_comparable(g1, g2);
    SURFCHANGE_REQUIRE(!test.domain.empty(), ErrorCode::InvalidArgument, "empty test domain");
    for (std::size_t k : test.domain)
        SURFCHANGE_REQUIRE(k < g1.grid.size(), ErrorCode::InvalidArgument, "domain index outside grid");
    const std::size_t j1 = g1.count();
    const std::size_t j2 = g2.count();
    const detail::PooledCurves pooled(g1, g2, test.domain);

    FamilyTestResult result;
    result.stat_kind = kind;
    std::vector<double> p;
    result.degenerate_points = pooled.pvalues(detail::identity_labels(j1, j2), test.kind, test.variant, p);
    result.observed_stat = family_stat(p, kind);
    const double observed = result.observed_stat;

    if (cfg.exhaustive) {
        const auto total = binomial(j1 + j2, j1);
        SURFCHANGE_REQUIRE(total <= kMaxExhaustive, ErrorCode::InvalidArgument,
                           "exhaustive enumeration too large (" + std::to_string(total) + " relabelings)");
        std::vector<char> in_group1(j1 + j2, 0);
        std::fill(in_group1.begin(), in_group1.begin() + static_cast<std::ptrdiff_t>(j1), 1);
        Relabeling labels;
        std::uint64_t count = 0;
        std::uint64_t seen = 0;
        do {
            labels.group1.clear();
            labels.group2.clear();
            for (std::uint32_t i = 0; i < in_group1.size(); ++i) (in_group1[i] ? labels.group1 : labels.group2).push_back(i);
            pooled.pvalues(labels, test.kind, test.variant, p);
            if (family_stat(p, kind) <= observed) ++count;
            ++seen;
        } while (std::prev_permutation(in_group1.begin(), in_group1.end()));
        result.exceed_count = count;
        result.n_used = seen;
        return result;
    }

    SURFCHANGE_REQUIRE(cfg.n_permutations >= 1, ErrorCode::InvalidArgument, "need at least one permutation");
    const std::uint64_t n_perm = cfg.n_permutations;
    const auto count_range = [&](std::uint64_t first, std::uint64_t last) {
        std::vector<double> local;
        std::uint64_t count = 0;
        for (std::uint64_t l = first; l <= last; ++l) {
            CounterRng rng(cfg.seed, l);
            pooled.pvalues(draw_relabeling(rng, j1, j2), test.kind, test.variant, local);
            if (family_stat(local, kind) <= observed) ++count;
        }
        return count;
    };

    unsigned threads = cfg.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cfg.threads;
    if (n_perm < 2 * threads) threads = 1;
    std::uint64_t count = 1; // l = 1, the observed labeling
    if (n_perm > 1) {
        if (threads == 1) {
            count += count_range(2, n_perm);
        } else {
            std::vector<std::uint64_t> partial(threads, 0);
            std::vector<std::exception_ptr> errors(threads);
            std::vector<std::jthread> workers;
            const std::uint64_t span = n_perm - 1;
            for (unsigned t = 0; t < threads; ++t) {
                const std::uint64_t first = 2 + span * t / threads;
                const std::uint64_t last = 1 + span * (t + 1) / threads;
                workers.emplace_back([&, t, first, last] {
                    try {
                        partial[t] = count_range(first, last);
                    } catch (...) {
                        errors[t] = std::current_exception();
                    }
                });
            }
            workers.clear();
            for (const auto& e : errors)
                if (e) std::rethrow_exception(e);
            for (auto c : partial) count += c;
        }
    }
    result.exceed_count = count;
    result.n_used = n_perm;
    return result;
}

} // namespace surfchange
