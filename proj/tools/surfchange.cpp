// surfchange: detect surface-quality change between consecutive finishing stages.
//
// Exit status of `decide`: 0 improvement detected, 10 marginal improvement,
// 20 no improvement. Any failure exits with a status above 100.

#include <cstdio>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "surfchange/surfchange.hpp"

namespace {

using namespace surfchange;

constexpr int kExitDetected = 0;
constexpr int kExitMarginal = 10;
constexpr int kExitNone = 20;
constexpr int kExitFailure = 101;
constexpr int kExitUsage = 102;

struct BaselineFlags {
    bool flat = false;
    bool raw = false;

    BaselineModel model() const
    {
        if (raw) return BaselineModel::None;
        return flat ? BaselineModel::Plane : BaselineModel::Sphere;
    }
};

void add_baseline_flags(CLI::App* cmd, BaselineFlags& f)
{
    auto* flat = cmd->add_flag("--flat", f.flat, "Subtract a least-squares plane instead of a sphere");
    cmd->add_flag("--raw", f.raw, "Input is already calibrated; skip baseline removal")->excludes(flat);
}

std::uint64_t parse_seed(const std::string& text)
{
    if (text == "random") return (static_cast<std::uint64_t>(std::random_device{}()) << 32) ^ std::random_device{}();
    try {
        std::size_t used = 0;
        const auto v = std::stoull(text, &used, 0);
        if (used == text.size()) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::InvalidArgument, "invalid seed '" + text + "' (integer or 'random')");
}

StageRecord load_calibrated(const std::string& path, const BaselineFlags& flags, const std::string& label = {})
{
    const auto rec = load_stage(path, label);
    if (rec.dropped_pixels() > 0)
        std::cerr << "warning: stage '" << rec.stage_label << "': dropped " << rec.dropped_pixels()
                  << " non-finite pixels\n";
    return calibrate_stage(rec, flags.model());
}

// ---------------------------------------------------------------------------

struct CalibrateOpts {
    std::string stage;
    std::string out;
    std::string label;
    bool flat = false;
};

int run_calibrate(const CalibrateOpts& o)
{
    auto rec = load_stage(o.stage, o.label);
    const auto model = o.flat ? BaselineModel::Plane : BaselineModel::Sphere;
    for (const auto& m : rec.locations) {
        if (model == BaselineModel::Sphere) {
            const auto fit = fit_sphere(m);
            std::printf("%s center=(%.6f, %.6f, %.6f) radius=%.6f rms=%.6g\n", m.location_id.c_str(), fit.center.x,
                        fit.center.y, fit.center.z, fit.radius, fit.rms_residual);
        } else {
            const auto fit = fit_plane(pixel_points(m));
            std::printf("%s plane a=%.6g b=%.6g c=%.6g rms=%.6g\n", m.location_id.c_str(), fit.a, fit.b, fit.c,
                        fit.rms_residual);
        }
    }
    save_stage(calibrate_stage(rec, model), o.out);
    return 0;
}

struct SaOpts {
    std::vector<std::string> stages;
    BaselineFlags baseline;
};

int run_sa(const SaOpts& o)
{
    std::printf("# stage\tlocation\tsa_um\n");
    std::vector<std::pair<std::string, double>> medians;
    for (const auto& path : o.stages) {
        const auto rec = load_calibrated(path, o.baseline);
        const auto sa = stage_sa(rec);
        for (std::size_t i = 0; i < sa.size(); ++i)
            std::printf("%s\t%s\t%.9g\n", rec.stage_label.c_str(), rec.locations[i].location_id.c_str(), sa[i]);
        medians.emplace_back(rec.stage_label, median(sa));
    }
    for (const auto& [label, med] : medians) std::printf("%s\tmedian\t%.9g\n", label.c_str(), med);
    return 0;
}

struct BacOpts {
    std::string stage;
    BaselineFlags baseline;
    std::size_t grid_size = kDefaultGridSize;
    double s_max = kDefaultSMax;
    double tau = kDefaultTau;
    double confidence = 0.967;
    std::string out;
};

int run_bac(const BacOpts& o)
{
    SURFCHANGE_REQUIRE(o.confidence > 0.0 && o.confidence < 1.0, ErrorCode::InvalidArgument,
                       "confidence must lie in (0, 1)");
    const auto rec = load_calibrated(o.stage, o.baseline);
    const auto sample = build_stage_sample(rec, QuantileGrid::uniform(o.grid_size, o.s_max, o.tau));
    const double j = static_cast<double>(sample.count());
    const double tq = student_t_quantile_upper(0.5 * (1.0 - o.confidence), j - 1.0);

    std::ostringstream os;
    os << "# stage " << rec.stage_label << ", J = " << sample.count() << ", confidence " << o.confidence << "\n";
    os << "s\tmean\tvariance\tlower\tupper\n";
    char line[256];
    for (std::size_t k = 0; k < sample.grid.size(); ++k) {
        const auto mo = moments_by(sample.count(), [&](std::size_t i) { return sample.curves[i][k]; });
        const double half = tq * std::sqrt(mo.var / j);
        std::snprintf(line, sizeof line, "%.10g\t%.10g\t%.10g\t%.10g\t%.10g\n", sample.grid.points[k], mo.mean,
                      mo.var, mo.mean - half, mo.mean + half);
        os << line;
    }
    if (o.out.empty())
        std::cout << os.str();
    else
        write_text_file(o.out, os.str());
    return 0;
}

struct DecideOpts {
    std::string prev;
    std::string curr;
    BaselineFlags baseline;
    double tau = kDefaultTau;
    double alpha = kDefaultAlpha;
    std::size_t permutations = kDefaultPermutations;
    std::size_t grid_size = kDefaultGridSize;
    double s_max = kDefaultSMax;
    std::string seed = std::to_string(kDefaultSeed);
    bool exhaustive = false;
    bool pooled = false;
    bool strict = false;
    bool finest_tool = false;
    unsigned threads = 0;
    std::string out = "decision.json";
};

int run_decide(const DecideOpts& o)
{
    DecisionConfig cfg;
    cfg.tau = o.tau;
    cfg.alpha = o.alpha;
    cfg.grid_size = o.grid_size;
    cfg.s_max = o.s_max;
    cfg.perm.n_permutations = o.permutations;
    cfg.perm.seed = parse_seed(o.seed);
    cfg.perm.exhaustive = o.exhaustive;
    cfg.perm.threads = o.threads;
    cfg.t_variant = o.pooled ? TTestVariant::Pooled : TTestVariant::Welch;
    cfg.marginal = o.strict ? MarginalPolicy::Strict : MarginalPolicy::Continue;
    cfg.finest_tool = o.finest_tool;
    cfg.validate();

    const auto prev = load_calibrated(o.prev, o.baseline);
    const auto curr = load_calibrated(o.curr, o.baseline);
    const auto grid = cfg.grid();
    const auto rec = decide(build_stage_sample(prev, grid), build_stage_sample(curr, grid), cfg, prev.stage_label,
                            curr.stage_label);
    save_report(rec, o.out);

    std::printf("%s -> %s\n", rec.stage_prev.c_str(), rec.stage_curr.c_str());
    const auto row = [](const char* name, const FamilyOutcome& f) {
        std::printf("  %-12s %-5s p = %-10s %s\n", name, to_string(f.result.stat_kind),
                    format_significant(f.result.corrected_p()).c_str(), f.verdict.c_str());
    };
    row("upper tail", rec.upper_tail);
    row("lower tail", rec.lower_tail);
    row("variance", rec.variance);
    std::printf("  overall: %s, recommendation: %s\n", to_string(rec.overall), to_string(rec.recommendation));

    switch (rec.overall) {
    case Overall::ImprovementDetected: return kExitDetected;
    case Overall::ImprovementMarginal: return kExitMarginal;
    case Overall::NoImprovement: return kExitNone;
    }
    return kExitFailure;
}

struct SimulateOpts {
    std::vector<std::size_t> n{6, 9, 12, 15};
    std::size_t runs = 1000;
    std::size_t permutations = kDefaultSimPermutations;
    std::size_t points = 100;
    double alpha = 0.03;
    double tau = 0.25;
    std::string seed = std::to_string(kDefaultSeed);
    bool null_model = false;
    bool pooled = false;
    unsigned threads = 0;
    std::string out;
};

int run_simulate(const SimulateOpts& o)
{
    SimConfig cfg;
    cfg.runs = o.runs;
    cfg.n_input_points = o.points;
    cfg.alpha = o.alpha;
    cfg.tau = o.tau;
    cfg.seed = parse_seed(o.seed);
    cfg.perm.seed = cfg.seed;
    cfg.perm.n_permutations = o.permutations;
    cfg.perm.threads = o.threads;
    cfg.null_model = o.null_model;
    cfg.t_variant = o.pooled ? TTestVariant::Pooled : TTestVariant::Welch;

    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    std::printf("N\tavg_L2_pct\ttype2_upper\ttype2_lower\truns\n");
    for (std::size_t n : o.n) {
        cfg.n_curves_per_group = n;
        const auto r = estimate_type2(cfg);
        std::printf("%zu\t%.4f\t%.4f\t%.4f\t%zu\n", n, r.avg_l2_pct, r.type2_upper, r.type2_lower, r.runs_used);
        std::fflush(stdout);
        rows.push_back({{"n", n},
                        {"avg_l2_pct", round_significant(r.avg_l2_pct, 6)},
                        {"type2_upper", r.type2_upper},
                        {"type2_lower", r.type2_lower},
                        {"runs", r.runs_used}});
    }
    if (!o.out.empty()) {
        nlohmann::ordered_json j;
        j["schema"] = "surfchange.simulation/1";
        j["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
        j["config"] = {{"seed", cfg.seed},          {"permutations", cfg.perm.n_permutations},
                       {"runs", cfg.runs},          {"input_points", cfg.n_input_points},
                       {"sigma_f", cfg.sigma_f},    {"theta", cfg.theta},
                       {"sigma_eps", cfg.sigma_eps}, {"alpha", cfg.alpha},
                       {"tau", cfg.tau},            {"null_model", cfg.null_model},
                       {"t_test", to_string(cfg.t_variant)}};
        j["rows"] = rows;
        write_text_file(o.out, j.dump(2) + "\n");
    }
    return 0;
}

int run_report(const std::string& path)
{
    const auto rec = load_report(path);
    std::printf("%s -> %s  (seed %llu, N %llu, m %llu, tau %g, alpha %g, s_max %g)\n", rec.stage_prev.c_str(),
                rec.stage_curr.c_str(), static_cast<unsigned long long>(rec.provenance.seed),
                static_cast<unsigned long long>(rec.provenance.n_permutations),
                static_cast<unsigned long long>(rec.provenance.m), rec.provenance.tau, rec.provenance.alpha,
                rec.provenance.s_max);
    const auto row = [](const char* name, const FamilyOutcome& f) {
        std::printf("  %-12s observed %-10s corrected %-10s %s\n", name,
                    format_significant(f.result.observed_stat).c_str(),
                    format_significant(f.result.corrected_p()).c_str(), f.verdict.c_str());
    };
    row("upper tail", rec.upper_tail);
    row("lower tail", rec.lower_tail);
    row("variance", rec.variance);
    std::printf("  overall: %s, recommendation: %s\n", to_string(rec.overall), to_string(rec.recommendation));
    return 0;
}

struct SynthOpts {
    SyntheticStageSpec spec;
    std::string out;
};

int run_synth(const SynthOpts& o)
{
    save_stage(synthetic_stage(o.spec), o.out);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"surfchange: surface-quality change detection on bearing area curves"};
    app.require_subcommand(1);
    app.get_formatter()->column_width(36);

    CalibrateOpts cal;
    auto* c_cal = app.add_subcommand("calibrate", "Remove the sphere (or plane) baseline from every scan of a stage");
    c_cal->add_option("stage", cal.stage, "Stage directory or manifest")->required();
    c_cal->add_option("--out", cal.out, "Output stage directory")->required();
    c_cal->add_option("--label", cal.label, "Stage label override");
    c_cal->add_flag("--flat", cal.flat, "Subtract a least-squares plane instead of a sphere");

    SaOpts sa;
    auto* c_sa = app.add_subcommand("sa", "Per-location Sa and median Sa of one or more stages");
    c_sa->add_option("stages", sa.stages, "Stage directories or manifests")->required();
    add_baseline_flags(c_sa, sa.baseline);

    BacOpts bac;
    auto* c_bac = app.add_subcommand("bac", "Mean bearing area curve with pointwise confidence band, as columns");
    c_bac->add_option("stage", bac.stage, "Stage directory or manifest")->required();
    add_baseline_flags(c_bac, bac.baseline);
    c_bac->add_option("--grid-size", bac.grid_size, "Number of quantile grid points")->capture_default_str();
    c_bac->add_option("--s-max", bac.s_max, "Largest quantile on the grid")->capture_default_str();
    c_bac->add_option("--tau", bac.tau, "Tail cut-off")->capture_default_str();
    c_bac->add_option("--confidence", bac.confidence, "Pointwise band confidence")->capture_default_str();
    c_bac->add_option("--out", bac.out, "Write columns to this file instead of stdout");

    DecideOpts dec;
    auto* c_dec = app.add_subcommand("decide", "Test prev -> curr for improvement and write a decision report");
    c_dec->add_option("prev", dec.prev, "Previous stage directory or manifest")->required();
    c_dec->add_option("curr", dec.curr, "Current stage directory or manifest")->required();
    add_baseline_flags(c_dec, dec.baseline);
    c_dec->add_option("--tau", dec.tau, "Tail cut-off")->capture_default_str();
    c_dec->add_option("--alpha", dec.alpha, "Overall significance level")->capture_default_str();
    c_dec->add_option("--permutations", dec.permutations, "Permutations per family")->capture_default_str();
    c_dec->add_option("--grid-size", dec.grid_size, "Number of quantile grid points")->capture_default_str();
    c_dec->add_option("--s-max", dec.s_max, "Largest quantile on the grid")->capture_default_str();
    c_dec->add_option("--seed", dec.seed, "Seed (integer or 'random')")->capture_default_str();
    c_dec->add_flag("--exhaustive", dec.exhaustive, "Enumerate every relabeling instead of sampling");
    auto* welch = c_dec->add_flag("--welch", "Welch t-test (default)");
    c_dec->add_flag("--pooled", dec.pooled, "Pooled-variance t-test")->excludes(welch);
    auto* marg = c_dec->add_flag("--marginal-continues", "Marginal improvement means continue (default)");
    c_dec->add_flag("--strict", dec.strict, "Only full significance means continue")->excludes(marg);
    c_dec->add_flag("--finest-tool", dec.finest_tool, "Current tool is the finest: recommend stopping");
    c_dec->add_option("--threads", dec.threads, "Worker threads (0 = all cores)")->capture_default_str();
    c_dec->add_option("--out", dec.out, "Report file")->capture_default_str();

    SimulateOpts sim;
    auto* c_sim = app.add_subcommand("simulate", "Type II error study on simulated GP curves");
    c_sim->add_option("--n", sim.n, "Curves per group (repeatable or comma list)")
        ->delimiter(',')
        ->capture_default_str();
    c_sim->add_option("--runs", sim.runs, "Independent runs per N")->capture_default_str();
    c_sim->add_option("--permutations", sim.permutations, "Permutations per test")->capture_default_str();
    c_sim->add_option("--points", sim.points, "Input points per run")->capture_default_str();
    c_sim->add_option("--alpha", sim.alpha, "Per-test significance level")->capture_default_str();
    c_sim->add_option("--tau", sim.tau, "Tail cut-off")->capture_default_str();
    c_sim->add_option("--seed", sim.seed, "Seed (integer or 'random')")->capture_default_str();
    c_sim->add_flag("--null", sim.null_model, "Force the perturbation to zero");
    c_sim->add_flag("--pooled", sim.pooled, "Pooled-variance t-test");
    c_sim->add_option("--threads", sim.threads, "Worker threads (0 = all cores)")->capture_default_str();
    c_sim->add_option("--out", sim.out, "Write the result table as JSON");

    std::string report_path;
    auto* c_rep = app.add_subcommand("report", "Validate and summarize a decision report");
    c_rep->add_option("file", report_path, "Report file")->required();

    SynthOpts syn;
    auto* c_syn = app.add_subcommand("synth", "Write a synthetic stage (for trials without instrument data)");
    c_syn->add_option("--out", syn.out, "Output stage directory")->required();
    c_syn->add_option("--label", syn.spec.label, "Stage label")->capture_default_str();
    c_syn->add_option("--locations", syn.spec.locations, "Number of scans")->capture_default_str();
    c_syn->add_option("--rows", syn.spec.rows, "Rows per scan")->capture_default_str();
    c_syn->add_option("--cols", syn.spec.cols, "Columns per scan")->capture_default_str();
    c_syn->add_option("--roughness", syn.spec.roughness_um, "Texture standard deviation (um)")->capture_default_str();
    c_syn->add_option("--peak-scale", syn.spec.peak_scale, "Scale of positive excursions")->capture_default_str();
    c_syn->add_option("--valley-scale", syn.spec.valley_scale, "Scale of negative excursions")->capture_default_str();
    c_syn->add_option("--seed", syn.spec.seed, "Seed")->capture_default_str();
    c_syn->add_flag("--flat", syn.spec.flat, "Flat surface instead of a sphere cap");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (*c_cal) return run_calibrate(cal);
        if (*c_sa) return run_sa(sa);
        if (*c_bac) return run_bac(bac);
        if (*c_dec) return run_decide(dec);
        if (*c_sim) return run_simulate(sim);
        if (*c_rep) return run_report(report_path);
        if (*c_syn) return run_synth(syn);
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
        return kExitFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitFailure;
}
