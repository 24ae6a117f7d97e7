// Two synthetic stages, the second with flattened peaks, run through the
// whole pipeline: calibrate, Sa, bearing area curves, decision.

#include <cstdio>

#include "surfchange/surfchange.hpp"

int main()
{
    using namespace surfchange;

    SyntheticStageSpec spec;
    spec.label = "P3";
    spec.seed = 3;
    const auto prev = calibrate_stage(synthetic_stage(spec));
    spec.label = "P4";
    spec.seed = 4;
    spec.peak_scale = 0.6;
    const auto curr = calibrate_stage(synthetic_stage(spec));

    std::printf("median Sa: %s %.4f um, %s %.4f um\n", prev.stage_label.c_str(), median_sa(prev),
                curr.stage_label.c_str(), median_sa(curr));

    DecisionConfig cfg;
    cfg.grid_size = 200;
    cfg.perm.n_permutations = 5000;
    const auto grid = cfg.grid();
    const auto rec = decide(build_stage_sample(prev, grid), build_stage_sample(curr, grid), cfg, prev.stage_label,
                            curr.stage_label);
    std::fputs(report_text(rec).c_str(), stdout);
    return 0;
}
