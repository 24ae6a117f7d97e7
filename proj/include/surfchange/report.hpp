#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "surfchange/decision.hpp"
#include "surfchange/error.hpp"
#include "surfchange/numeric.hpp"

namespace surfchange {

inline constexpr const char* kToolName = "surfchange";
inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr const char* kDecisionSchema = "surfchange.decision/1";

namespace detail {

template <typename Enum, std::size_t N>
Enum parse_enum(const std::string& text, const Enum (&values)[N], const char* what)
{
    for (Enum v : values)
        if (text == to_string(v)) return v;
    throw Error(ErrorCode::MalformedInput, std::string("unknown ") + what + " '" + text + "'");
}

inline constexpr FamilyStatistic kStats[] = {FamilyStatistic::MinP, FamilyStatistic::MaxP, FamilyStatistic::MedP};
inline constexpr Overall kOveralls[] = {Overall::ImprovementDetected, Overall::ImprovementMarginal,
                                        Overall::NoImprovement};
inline constexpr Recommendation kRecommendations[] = {Recommendation::Continue, Recommendation::CleanOrChangeTool,
                                                      Recommendation::StopIfFinest};
inline constexpr TTestVariant kVariants[] = {TTestVariant::Welch, TTestVariant::Pooled};
inline constexpr MarginalPolicy kPolicies[] = {MarginalPolicy::Continue, MarginalPolicy::Strict};

inline nlohmann::ordered_json family_json(const FamilyOutcome& f, TestKind test)
{
    nlohmann::ordered_json j;
    j["statistic_kind"] = to_string(f.result.stat_kind);
    j["pointwise_test"] = to_string(test);
    j["observed_stat"] = round_significant(f.result.observed_stat, 6);
    j["corrected_p"] = round_significant(f.result.corrected_p(), 6);
    j["exceed_count"] = f.result.exceed_count;
    j["n_used"] = f.result.n_used;
    j["degenerate_points"] = f.result.degenerate_points;
    j["verdict"] = f.verdict;
    return j;
}

inline FamilyOutcome family_from_json(const nlohmann::json& j, Family family, double alpha)
{
    FamilyOutcome f;
    f.result.stat_kind = parse_enum(j.at("statistic_kind").get<std::string>(), kStats, "statistic kind");
    f.result.observed_stat = j.at("observed_stat").get<double>();
    f.result.exceed_count = j.at("exceed_count").get<std::uint64_t>();
    f.result.n_used = j.at("n_used").get<std::uint64_t>();
    f.result.degenerate_points = j.at("degenerate_points").get<std::size_t>();
    f.band = band(f.result.corrected_p(), alpha);
    f.verdict = j.at("verdict").get<std::string>();
    SURFCHANGE_REQUIRE(f.verdict == verdict(family, f.band), ErrorCode::MalformedInput,
                       "report verdict '" + f.verdict + "' disagrees with its p-value");
    return f;
}

} // namespace detail

inline nlohmann::ordered_json to_json(const DecisionRecord& rec)
{
    nlohmann::ordered_json j;
    j["schema"] = kDecisionSchema;
    j["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
    j["stages"] = {{"previous", rec.stage_prev}, {"current", rec.stage_curr}};
    nlohmann::ordered_json fam;
    fam["upper_tail"] = detail::family_json(rec.upper_tail, TestKind::MeanGreater);
    fam["lower_tail"] = detail::family_json(rec.lower_tail, TestKind::MeanLess);
    fam["variance"] = detail::family_json(rec.variance, TestKind::VarianceGreater);
    j["families"] = fam;
    j["overall"] = to_string(rec.overall);
    j["recommendation"] = to_string(rec.recommendation);
    const auto& p = rec.provenance;
    nlohmann::ordered_json prov;
    prov["seed"] = p.seed;
    prov["permutations"] = p.n_permutations;
    prov["exhaustive"] = p.exhaustive;
    prov["m"] = p.m;
    prov["tau"] = p.tau;
    prov["alpha"] = p.alpha;
    prov["s_max"] = p.s_max;
    prov["t_test"] = to_string(p.t_variant);
    prov["marginal_policy"] = to_string(p.marginal);
    j["provenance"] = prov;
    return j;
}

inline DecisionRecord decision_from_json(const nlohmann::json& j)
{
    try {
        SURFCHANGE_REQUIRE(j.at("schema").get<std::string>() == kDecisionSchema, ErrorCode::MalformedInput,
                           "unsupported report schema");
        DecisionRecord rec;
        rec.stage_prev = j.at("stages").at("previous").get<std::string>();
        rec.stage_curr = j.at("stages").at("current").get<std::string>();
        const auto& pj = j.at("provenance");
        auto& p = rec.provenance;
        p.seed = pj.at("seed").get<std::uint64_t>();
        p.n_permutations = pj.at("permutations").get<std::uint64_t>();
        p.exhaustive = pj.at("exhaustive").get<bool>();
        p.m = pj.at("m").get<std::uint64_t>();
        p.tau = pj.at("tau").get<double>();
        p.alpha = pj.at("alpha").get<double>();
        p.s_max = pj.at("s_max").get<double>();
        p.t_variant = detail::parse_enum(pj.at("t_test").get<std::string>(), detail::kVariants, "t-test variant");
        p.marginal = detail::parse_enum(pj.at("marginal_policy").get<std::string>(), detail::kPolicies,
                                        "marginal policy");
        const auto& fam = j.at("families");
        rec.upper_tail = detail::family_from_json(fam.at("upper_tail"), Family::UpperTail, p.alpha);
        rec.lower_tail = detail::family_from_json(fam.at("lower_tail"), Family::LowerTail, p.alpha);
        rec.variance = detail::family_from_json(fam.at("variance"), Family::Variance, p.alpha);
        rec.overall = detail::parse_enum(j.at("overall").get<std::string>(), detail::kOveralls, "overall verdict");
        rec.recommendation = detail::parse_enum(j.at("recommendation").get<std::string>(), detail::kRecommendations,
                                                "recommendation");
        return rec;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedInput, std::string("malformed report: ") + e.what());
    }
}

inline std::string report_text(const DecisionRecord& rec) { return to_json(rec).dump(2) + "\n"; }

inline void write_text_file(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    SURFCHANGE_REQUIRE(out.good(), ErrorCode::Io, "cannot write '" + path.string() + "'");
    out << text;
    out.close();
    SURFCHANGE_REQUIRE(!out.fail(), ErrorCode::Io, "write failed for '" + path.string() + "'");
}

inline std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    SURFCHANGE_REQUIRE(in.good(), ErrorCode::Io, "cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void save_report(const DecisionRecord& rec, const std::filesystem::path& path)
{
    write_text_file(path, report_text(rec));
}

inline DecisionRecord load_report(const std::filesystem::path& path)
{
    const auto text = read_text_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedInput, "report '" + path.string() + "': " + e.what());
    }
    return decision_from_json(j);
}

} // namespace surfchange
