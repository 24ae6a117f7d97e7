#pragma once

#include <cstdint>
#include <string>

#include "surfchange/error.hpp"
#include "surfchange/numeric.hpp"
#include "surfchange/permutation.hpp"
#include "surfchange/roughness.hpp"
#include "surfchange/stat_core.hpp"

namespace surfchange {

inline constexpr double kDefaultAlpha = 0.1;

enum class MarginalPolicy { Continue, Strict };
enum class Band { Significant, Marginal, NotSignificant };
enum class Overall { ImprovementDetected, ImprovementMarginal, NoImprovement };
enum class Recommendation { Continue, CleanOrChangeTool, StopIfFinest };
enum class Family { UpperTail, LowerTail, Variance };

struct DecisionConfig {
    double tau = kDefaultTau;
    double alpha = kDefaultAlpha;
    PermutationConfig perm;
    std::size_t grid_size = kDefaultGridSize;
    double s_max = kDefaultSMax;
    TTestVariant t_variant = TTestVariant::Welch;
    MarginalPolicy marginal = MarginalPolicy::Continue;
    bool finest_tool = false;

    QuantileGrid grid() const { return QuantileGrid::uniform(grid_size, s_max, tau); }

    void validate() const
    {
        SURFCHANGE_REQUIRE(tau > 0.0 && tau < 0.5, ErrorCode::InvalidArgument, "tau must lie in (0, 0.5)");
        SURFCHANGE_REQUIRE(alpha > 0.0 && alpha < 1.0, ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
    }
};

/// Per-family threshold after the Bonferroni split over three families.
inline double significant_threshold(double alpha) { return alpha / 3.0; }
inline double marginal_threshold(double alpha) { return 2.0 * alpha / 3.0; }

/// Closed bands: p <= alpha/3 significant, alpha/3 < p <= 2 alpha/3 marginal.
inline Band band(double p, double alpha)
{
    if (p <= significant_threshold(alpha)) return Band::Significant;
    if (p <= marginal_threshold(alpha)) return Band::Marginal;
    return Band::NotSignificant;
}

inline Overall combine(double p_upper, double p_lower, double p_variance, double alpha)
{
    const Band bands[] = {band(p_upper, alpha), band(p_lower, alpha), band(p_variance, alpha)};
    bool marginal = false;
    for (Band b : bands) {
        if (b == Band::Significant) return Overall::ImprovementDetected;
        if (b == Band::Marginal) marginal = true;
    }
    return marginal ? Overall::ImprovementMarginal : Overall::NoImprovement;
}

inline Recommendation recommend(Overall overall, MarginalPolicy policy, bool finest_tool)
{
    if (overall == Overall::ImprovementDetected) return Recommendation::Continue;
    if (overall == Overall::ImprovementMarginal && policy == MarginalPolicy::Continue) return Recommendation::Continue;
    return finest_tool ? Recommendation::StopIfFinest : Recommendation::CleanOrChangeTool;
}

inline std::string verdict(Family family, Band b)
{
    std::string base;
    switch (family) {
    case Family::UpperTail: base = "Lowered"; break;
    case Family::LowerTail: base = "Raised"; break;
    case Family::Variance: base = "Reduced"; break;
    }
    if (b == Band::Significant) return base;
    if (b == Band::Marginal) return base + " (marginal)";
    base[0] = static_cast<char>(base[0] - 'A' + 'a');
    return "Not " + base;
}

struct FamilyOutcome {
    FamilyTestResult result;
    Band band = Band::NotSignificant;
    std::string verdict;

    bool operator==(const FamilyOutcome&) const = default;
};

struct Provenance {
    std::uint64_t seed = kDefaultSeed;
    std::uint64_t n_permutations = kDefaultPermutations;
    bool exhaustive = false;
    std::uint64_t m = kDefaultGridSize;
    double tau = kDefaultTau;
    double alpha = kDefaultAlpha;
    double s_max = kDefaultSMax;
    TTestVariant t_variant = TTestVariant::Welch;
    MarginalPolicy marginal = MarginalPolicy::Continue;

    bool operator==(const Provenance&) const = default;
};

struct DecisionRecord {
    std::string stage_prev;
    std::string stage_curr;
    FamilyOutcome upper_tail;
    FamilyOutcome lower_tail;
    FamilyOutcome variance;
    Overall overall = Overall::NoImprovement;
    Recommendation recommendation = Recommendation::CleanOrChangeTool;
    Provenance provenance;

    bool operator==(const DecisionRecord&) const = default;
};

namespace detail {

inline PermutationConfig with_seed(PermutationConfig perm, std::uint64_t seed)
{
    perm.seed = seed;
    return perm;
}

inline void require_samples(const StageSample& prev, const StageSample& curr, const DecisionConfig& cfg)
{
    cfg.validate();
    check_comparable(prev, curr);
}

} // namespace detail

/// Peaks lowered: mean(prev) > mean(curr) at every s <= tau, maxP.
inline FamilyTestResult test_upper_tail(const StageSample& prev, const StageSample& curr, const DecisionConfig& cfg)
{
    detail::require_samples(prev, curr, cfg);
    PointwiseTestSpec spec{TestKind::MeanGreater, cfg.t_variant, prev.grid.upper_tail(cfg.tau)};
    SURFCHANGE_REQUIRE(!spec.domain.empty(), ErrorCode::InvalidArgument, "no grid point in the upper tail");
    return westfall_young(prev, curr, spec, FamilyStatistic::MaxP, cfg.perm);
}

/// Valleys raised: mean(prev) < mean(curr) at every s >= 1 - tau, maxP.
inline FamilyTestResult test_lower_tail(const StageSample& prev, const StageSample& curr, const DecisionConfig& cfg)
{
    detail::require_samples(prev, curr, cfg);
    PointwiseTestSpec spec{TestKind::MeanLess, cfg.t_variant, prev.grid.lower_tail(cfg.tau)};
    SURFCHANGE_REQUIRE(!spec.domain.empty(), ErrorCode::InvalidArgument, "no grid point in the lower tail");
    return westfall_young(prev, curr, spec, FamilyStatistic::MaxP, cfg.perm);
}

/// Spread reduced: var(prev) > var(curr) on at least half of the grid, medP.
inline FamilyTestResult test_variance(const StageSample& prev, const StageSample& curr, const DecisionConfig& cfg)
{
    detail::require_samples(prev, curr, cfg);
    PointwiseTestSpec spec{TestKind::VarianceGreater, cfg.t_variant, prev.grid.all()};
    return westfall_young(prev, curr, spec, FamilyStatistic::MedP, cfg.perm);
}

inline FamilyOutcome make_outcome(Family family, FamilyTestResult r, double alpha)
{
    r.observed_stat = round_significant(r.observed_stat, 6);
    FamilyOutcome out;
    out.band = band(r.corrected_p(), alpha);
    out.verdict = verdict(family, out.band);
    out.result = r;
    return out;
}

inline DecisionRecord assemble_record(std::string prev_label, std::string curr_label, const FamilyTestResult& upper,
                                      const FamilyTestResult& lower, const FamilyTestResult& var,
                                      const DecisionConfig& cfg, const QuantileGrid& grid)
{
    DecisionRecord rec;
    rec.stage_prev = std::move(prev_label);
    rec.stage_curr = std::move(curr_label);
    rec.upper_tail = make_outcome(Family::UpperTail, upper, cfg.alpha);
    rec.lower_tail = make_outcome(Family::LowerTail, lower, cfg.alpha);
    rec.variance = make_outcome(Family::Variance, var, cfg.alpha);
    rec.overall = combine(upper.corrected_p(), lower.corrected_p(), var.corrected_p(), cfg.alpha);
    rec.recommendation = recommend(rec.overall, cfg.marginal, cfg.finest_tool);

    auto& prov = rec.provenance;
    prov.seed = cfg.perm.seed;
    prov.n_permutations = cfg.perm.n_permutations;
    prov.exhaustive = cfg.perm.exhaustive;
    prov.m = grid.size();
    prov.tau = cfg.tau;
    prov.alpha = cfg.alpha;
    prov.s_max = grid.points.back();
    prov.t_variant = cfg.t_variant;
    prov.marginal = cfg.marginal;
    return rec;
}

/// Run the three families with seeds seed, seed^1, seed^2 and combine them.
inline DecisionRecord decide(const StageSample& prev, const StageSample& curr, const DecisionConfig& cfg,
                             std::string prev_label = {}, std::string curr_label = {})
{
    detail::require_samples(prev, curr, cfg);
    const std::uint64_t seed = cfg.perm.seed;

    DecisionConfig upper_cfg = cfg;
    upper_cfg.perm = detail::with_seed(cfg.perm, seed);
    DecisionConfig lower_cfg = cfg;
    lower_cfg.perm = detail::with_seed(cfg.perm, seed ^ 1u);
    DecisionConfig var_cfg = cfg;
    var_cfg.perm = detail::with_seed(cfg.perm, seed ^ 2u);

    const auto upper = test_upper_tail(prev, curr, upper_cfg);
    const auto lower = test_lower_tail(prev, curr, lower_cfg);
    const auto var = test_variance(prev, curr, var_cfg);
    return assemble_record(prev_label.empty() ? prev.stage_id : std::move(prev_label),
                           curr_label.empty() ? curr.stage_id : std::move(curr_label), upper, lower, var, cfg,
                           prev.grid);
}

inline const char* to_string(Overall o)
{
    switch (o) {
    case Overall::ImprovementDetected: return "improvement_detected";
    case Overall::ImprovementMarginal: return "improvement_marginal";
    case Overall::NoImprovement: return "no_improvement";
    }
    return "?";
}

inline const char* to_string(Recommendation r)
{
    switch (r) {
    case Recommendation::Continue: return "continue";
    case Recommendation::CleanOrChangeTool: return "clean_or_change_tool";
    case Recommendation::StopIfFinest: return "stop_if_finest";
    }
    return "?";
}

inline const char* to_string(MarginalPolicy p) { return p == MarginalPolicy::Continue ? "marginal_continues" : "strict"; }

} // namespace surfchange
