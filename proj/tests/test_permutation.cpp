#include <map>
#include <random>

#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include "oracle.hpp"
#include "surfchange/permutation.hpp"

using namespace surfchange;

namespace {

QuantileGrid unit_grid(std::size_t m)
{
    QuantileGrid g;
    for (std::size_t k = 0; k < m; ++k) g.points.push_back(static_cast<double>(k) / static_cast<double>(m - 1));
    return g;
}

StageSample make_sample(std::vector<std::vector<double>> curves)
{
    StageSample s;
    s.grid = unit_grid(curves.front().size());
    s.curves = std::move(curves);
    return s;
}

std::vector<std::vector<double>> noise(std::mt19937_64& rng, std::size_t j, std::size_t m, double shift = 0.0,
                                       double scale = 1.0)
{
    std::normal_distribution<double> n(0, 1);
    std::vector<std::vector<double>> c(j, std::vector<double>(m));
    for (auto& row : c)
        for (auto& v : row) v = shift + scale * n(rng);
    return c;
}

oracle::Stat to_oracle(FamilyStatistic s)
{
    switch (s) {
    case FamilyStatistic::MinP: return oracle::Stat::Min;
    case FamilyStatistic::MaxP: return oracle::Stat::Max;
    case FamilyStatistic::MedP: return oracle::Stat::Med;
    }
    return oracle::Stat::Max;
}

constexpr FamilyStatistic kAllStats[] = {FamilyStatistic::MinP, FamilyStatistic::MaxP, FamilyStatistic::MedP};

} // namespace

TEST(FamilyStat, Examples)
{
    const std::vector<double> p{0.3, 0.01, 0.2, 0.5};
    EXPECT_EQ(family_stat(p, FamilyStatistic::MinP), 0.01);
    EXPECT_EQ(family_stat(p, FamilyStatistic::MaxP), 0.5);
    EXPECT_DOUBLE_EQ(family_stat(p, FamilyStatistic::MedP), 0.25);
    const std::vector<double> odd{0.9, 0.1, 0.4};
    EXPECT_EQ(family_stat(odd, FamilyStatistic::MedP), 0.4);
    EXPECT_THROW(family_stat(std::vector<double>{}, FamilyStatistic::MaxP), Error);
    EXPECT_STREQ(to_string(FamilyStatistic::MinP), "minP");
    EXPECT_STREQ(to_string(FamilyStatistic::MedP), "medP");
}

TEST(Binomial, SmallValues)
{
    EXPECT_EQ(binomial(8, 4), 70u);
    EXPECT_EQ(binomial(18, 9), 48620u);
    EXPECT_EQ(binomial(5, 0), 1u);
    EXPECT_EQ(binomial(3, 5), 0u);
    EXPECT_EQ(binomial(200, 100), UINT64_MAX);
}

TEST(Relabeling, PartitionsThePool)
{
    CounterRng rng(11, 3);
    for (int i = 0; i < 200; ++i) {
        const auto r = draw_relabeling(rng, 3, 6);
        ASSERT_EQ(r.group1.size(), 3u);
        ASSERT_EQ(r.group2.size(), 6u);
        std::vector<std::uint32_t> all = r.group1;
        all.insert(all.end(), r.group2.begin(), r.group2.end());
        std::sort(all.begin(), all.end());
        for (std::uint32_t k = 0; k < 9; ++k) EXPECT_EQ(all[k], k);
    }
}

TEST(Relabeling, UniformOverAllPartitions)
{
    // 4 + 4 curves: 70 partitions, each should appear with frequency 1/70.
    std::map<std::vector<std::uint32_t>, int> counts;
    const int draws = 70000;
    for (int l = 0; l < draws; ++l) {
        CounterRng rng(987654321, static_cast<std::uint64_t>(l));
        ++counts[draw_relabeling(rng, 4, 4).group1];
    }
    ASSERT_EQ(counts.size(), 70u);
    double chi2 = 0.0;
    const double expected = draws / 70.0;
    for (const auto& [k, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
    const double p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(69.0), chi2));
    EXPECT_GT(p, 1e-4) << "chi2=" << chi2;
}

TEST(Relabeling, ElementInclusionRates)
{
    std::vector<int> hits(10, 0);
    const int draws = 40000;
    for (int l = 0; l < draws; ++l) {
        CounterRng rng(5, static_cast<std::uint64_t>(l));
        for (auto i : draw_relabeling(rng, 3, 7).group1) ++hits[i];
    }
    for (int h : hits) EXPECT_NEAR(h / static_cast<double>(draws), 0.3, 5 * oracle::binomial_sigma(0.3, draws));
}

TEST(WestfallYoung, ExhaustiveMatchesBruteForce)
{
    std::mt19937_64 rng(21);
    const auto a = noise(rng, 4, 12, 0.4);
    const auto b = noise(rng, 4, 12);
    const auto ga = make_sample(a), gb = make_sample(b);
    std::vector<std::size_t> domain{0, 2, 3, 5, 7, 11};
    PermutationConfig cfg;
    cfg.exhaustive = true;
    for (auto stat : kAllStats) {
        for (auto [kind, ok] : {std::pair{TestKind::MeanGreater, oracle::Test::MeanGreater},
                                std::pair{TestKind::VarianceGreater, oracle::Test::VarianceGreater}}) {
            const auto r = westfall_young(ga, gb, {kind, TTestVariant::Welch, domain}, stat, cfg);
            EXPECT_EQ(r.n_used, 70u);
            EXPECT_NEAR(r.corrected_p(), oracle::exhaustive_corrected_p(a, b, domain, ok, to_oracle(stat)), 1e-12)
                << to_string(stat) << " " << to_string(kind);
        }
    }
}

TEST(WestfallYoung, SampledApproachesExhaustive)
{
    std::mt19937_64 rng(22);
    const auto a = make_sample(noise(rng, 4, 20, 0.5));
    const auto b = make_sample(noise(rng, 4, 20));
    const auto domain = a.grid.all();
    PermutationConfig ex;
    ex.exhaustive = true;
    PermutationConfig sm;
    sm.n_permutations = 20000;
    sm.seed = 77;
    for (auto stat : kAllStats) {
        const PointwiseTestSpec spec{TestKind::MeanGreater, TTestVariant::Welch, domain};
        const double exact = westfall_young(a, b, spec, stat, ex).corrected_p();
        const double approx = westfall_young(a, b, spec, stat, sm).corrected_p();
        EXPECT_NEAR(approx, exact, 5 * oracle::binomial_sigma(exact, 20000) + 1.0 / 20000) << to_string(stat);
    }
}

TEST(WestfallYoung, DeterministicAndThreadIndependent)
{
    std::mt19937_64 rng(23);
    const auto a = make_sample(noise(rng, 6, 30));
    const auto b = make_sample(noise(rng, 5, 30, 0.2));
    const PointwiseTestSpec spec{TestKind::MeanGreater, TTestVariant::Welch, a.grid.all()};
    PermutationConfig cfg;
    cfg.n_permutations = 3001;
    cfg.seed = 99;
    cfg.threads = 1;
    const auto r1 = westfall_young(a, b, spec, FamilyStatistic::MaxP, cfg);
    const auto r1b = westfall_young(a, b, spec, FamilyStatistic::MaxP, cfg);
    EXPECT_EQ(r1, r1b);
    for (unsigned t : {2u, 3u, 8u}) {
        cfg.threads = t;
        EXPECT_EQ(westfall_young(a, b, spec, FamilyStatistic::MaxP, cfg), r1) << t << " threads";
    }
    cfg.threads = 1;
    cfg.seed = 100;
    const auto other = westfall_young(a, b, spec, FamilyStatistic::MaxP, cfg);
    EXPECT_EQ(other.observed_stat, r1.observed_stat);
}

TEST(WestfallYoung, ExtremeSeparationGivesOneOverN)
{
    std::mt19937_64 rng(24);
    const auto a = make_sample(noise(rng, 9, 40, 10.0, 0.1));
    const auto b = make_sample(noise(rng, 9, 40, 0.0, 0.1));
    PermutationConfig cfg;
    cfg.n_permutations = 2000;
    for (auto stat : kAllStats) {
        const auto r = westfall_young(a, b, {TestKind::MeanGreater, TTestVariant::Welch, a.grid.all()}, stat, cfg);
        EXPECT_EQ(r.exceed_count, 1u);
        EXPECT_DOUBLE_EQ(r.corrected_p(), 1.0 / 2000);
    }
}

TEST(WestfallYoung, CorrectedPNeverZeroAndNeverAboveOne)
{
    std::mt19937_64 rng(25);
    const auto a = make_sample(noise(rng, 5, 10));
    const auto b = make_sample(noise(rng, 5, 10, 3.0));
    PermutationConfig cfg;
    cfg.n_permutations = 500;
    const auto r = westfall_young(a, b, {TestKind::MeanGreater, TTestVariant::Welch, a.grid.all()},
                                  FamilyStatistic::MaxP, cfg);
    EXPECT_GE(r.corrected_p(), 1.0 / 500);
    EXPECT_LE(r.corrected_p(), 1.0);
    EXPECT_GT(r.corrected_p(), 0.9);
}

TEST(WestfallYoung, RejectsBadInput)
{
    std::mt19937_64 rng(26);
    const auto a = make_sample(noise(rng, 4, 10));
    const auto short_grid = make_sample(noise(rng, 4, 8));
    const auto single = make_sample(noise(rng, 1, 10));
    PermutationConfig cfg;
    cfg.n_permutations = 10;
    const PointwiseTestSpec spec{TestKind::MeanGreater, TTestVariant::Welch, a.grid.all()};
    EXPECT_THROW(westfall_young(a, short_grid, spec, FamilyStatistic::MaxP, cfg), Error);
    EXPECT_THROW(westfall_young(a, single, spec, FamilyStatistic::MaxP, cfg), Error);
    EXPECT_THROW(westfall_young(a, a, {TestKind::MeanGreater, TTestVariant::Welch, {}}, FamilyStatistic::MaxP, cfg),
                 Error);
    EXPECT_THROW(westfall_young(a, a, {TestKind::MeanGreater, TTestVariant::Welch, {10}}, FamilyStatistic::MaxP, cfg),
                 Error);
    cfg.n_permutations = 0;
    EXPECT_THROW(westfall_young(a, a, spec, FamilyStatistic::MaxP, cfg), Error);
    const auto big1 = make_sample(noise(rng, 20, 3));
    const auto big2 = make_sample(noise(rng, 20, 3));
    cfg.exhaustive = true;
    EXPECT_THROW(westfall_young(big1, big2, {TestKind::MeanGreater, TTestVariant::Welch, {0}}, FamilyStatistic::MaxP,
                                cfg),
                 Error);
}

TEST(WestfallYoung, NullRejectionRateIsControlled)
{
    // Exact test under exchangeability: rejection at 0.1 should be ~0.1.
    std::mt19937_64 rng(27);
    PermutationConfig cfg;
    cfg.n_permutations = 200;
    const int reps = 300;
    int rejections = 0;
    for (int r = 0; r < reps; ++r) {
        const auto a = make_sample(noise(rng, 5, 15));
        const auto b = make_sample(noise(rng, 5, 15));
        cfg.seed = static_cast<std::uint64_t>(r);
        const auto res = westfall_young(a, b, {TestKind::MeanGreater, TTestVariant::Welch, a.grid.all()},
                                        FamilyStatistic::MaxP, cfg);
        if (res.corrected_p() <= 0.1) ++rejections;
    }
    EXPECT_LE(rejections / static_cast<double>(reps), 0.1 + 3 * oracle::binomial_sigma(0.1, reps));
}
