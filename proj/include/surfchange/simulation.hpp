#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "surfchange/counter_rng.hpp"
#include "surfchange/decision.hpp"
#include "surfchange/error.hpp"
#include "surfchange/permutation.hpp"
#include "surfchange/roughness.hpp"

namespace surfchange {

inline constexpr std::size_t kDefaultSimPermutations = 2000;

/// Two groups of GP curves sharing one latent draw, the second shifted by a
/// tail perturbation.
struct SimConfig {
    std::size_t n_curves_per_group = 9;
    std::size_t n_input_points = 100;
    double sigma_f = 5.0;
    double theta = 0.2;
    double sigma_eps = 0.5;
    double alpha = 0.03;
    double tau = 0.25;
    std::size_t runs = 1000;
    PermutationConfig perm{kDefaultSimPermutations, kDefaultSeed, false, 0};
    std::uint64_t seed = kDefaultSeed;
    bool null_model = false; // perturbation forced to zero
    TTestVariant t_variant = TTestVariant::Welch;

    void validate() const
    {
        SURFCHANGE_REQUIRE(sigma_f > 0 && theta > 0 && sigma_eps > 0, ErrorCode::InvalidArgument,
                           "simulation scale parameters must be positive");
        SURFCHANGE_REQUIRE(runs >= 1, ErrorCode::InvalidArgument, "simulation needs at least one run");
        SURFCHANGE_REQUIRE(n_curves_per_group >= 2, ErrorCode::InvalidArgument, "need at least 2 curves per group");
        SURFCHANGE_REQUIRE(n_input_points >= 4, ErrorCode::InvalidArgument, "need at least 4 input points");
        SURFCHANGE_REQUIRE(alpha > 0 && alpha < 1, ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
    }
};

struct SimResult {
    std::size_t n_curves_per_group = 0;
    double type2_upper = 0.0;
    double type2_lower = 0.0;
    double avg_l2_pct = 0.0;
    std::size_t runs_used = 0;
};

inline double se_kernel(double x, double x2, double sigma_f, double theta)
{
    const double u = (x - x2) / theta;
    return sigma_f * sigma_f * std::exp(-0.5 * u * u);
}

/// Tail perturbation, jump discontinuities at 0.25 and 0.75 included.
inline double perturbation(double x)
{
    const double wave = std::sin(std::numbers::pi * (x - 0.2) / (0.8 - 0.2)) / 3.0;
    if (x <= 0.25) return -wave;
    if (x < 0.75) return 0.0;
    return wave;
}

/// 100 * ||mu1 - mu2|| / ||mu1||, L2 norms by the trapezoidal rule over the sample points x.
inline double l2_distance_pct(std::span<const double> x, std::span<const double> mu1, std::span<const double> mu2)
{
    SURFCHANGE_REQUIRE(x.size() == mu1.size() && x.size() == mu2.size() && x.size() >= 2,
                       ErrorCode::InvalidArgument, "L2 distance needs matching samples");
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) {
        const double h = x[i] - x[i - 1];
        const double d0 = mu1[i - 1] - mu2[i - 1], d1 = mu1[i] - mu2[i];
        num += 0.5 * h * (d0 * d0 + d1 * d1);
        den += 0.5 * h * (mu1[i - 1] * mu1[i - 1] + mu1[i] * mu1[i]);
    }
    SURFCHANGE_REQUIRE(den > 0.0, ErrorCode::InvalidArgument, "reference function has zero L2 norm");
    return 100.0 * std::sqrt(num / den);
}

struct SimGroups {
    std::vector<double> x;
    std::vector<double> latent;
    std::vector<std::vector<double>> group1;
    std::vector<std::vector<double>> group2;
};

/// Lower Cholesky factor of the kernel matrix on `x`; jitter starts at
/// 1e-10 sigma_f^2 and grows tenfold up to 1e-6 sigma_f^2.
inline Eigen::MatrixXd kernel_cholesky(std::span<const double> x, double sigma_f, double theta)
{
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            k(i, j) = se_kernel(x[static_cast<std::size_t>(i)], x[static_cast<std::size_t>(j)], sigma_f, theta);
    const double var = sigma_f * sigma_f;
    for (double jitter = 1e-10 * var; jitter <= 1e-6 * var * (1 + 1e-9); jitter *= 10.0) {
        Eigen::MatrixXd kj = k;
        kj.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(kj);
        if (llt.info() == Eigen::Success) return llt.matrixL();
    }
    throw Error(ErrorCode::NumericalFailure, "kernel matrix is not positive definite after maximum jitter");
}

/// One draw of the zero-mean GP at `x` given its kernel Cholesky factor.
inline std::vector<double> sample_gp(const Eigen::MatrixXd& chol, CounterRng& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd xi(chol.rows());
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi(i) = normal(rng);
    const Eigen::VectorXd z = chol.triangularView<Eigen::Lower>() * xi;
    return {z.data(), z.data() + z.size()};
}

/// Input points uniform on [0, 1] (sorted), one shared latent draw z, group 1
/// curves z + eps, group 2 curves z + perturbation + eps.
inline SimGroups sample_gp_groups(const SimConfig& cfg, CounterRng& rng)
{
    cfg.validate();
    std::normal_distribution<double> normal(0.0, 1.0);
    SimGroups g;
    g.x.resize(cfg.n_input_points);
    for (auto& v : g.x) v = rng.uniform();
    std::sort(g.x.begin(), g.x.end());
    g.latent = sample_gp(kernel_cholesky(g.x, cfg.sigma_f, cfg.theta), rng);

    const auto make_group = [&](bool perturbed) {
        std::vector<std::vector<double>> curves(cfg.n_curves_per_group, std::vector<double>(g.x.size()));
        for (auto& c : curves)
            for (std::size_t i = 0; i < g.x.size(); ++i) {
                const double shift = perturbed && !cfg.null_model ? perturbation(g.x[i]) : 0.0;
                c[i] = g.latent[i] + shift + cfg.sigma_eps * normal(rng);
            }
        return curves;
    };
    g.group1 = make_group(false);
    g.group2 = make_group(true);
    return g;
}

inline std::vector<double> mean_curve(const std::vector<std::vector<double>>& curves)
{
    std::vector<double> mu(curves.front().size(), 0.0);
    for (const auto& c : curves)
        for (std::size_t i = 0; i < mu.size(); ++i) mu[i] += c[i];
    for (auto& v : mu) v /= static_cast<double>(curves.size());
    return mu;
}

/// Wrap simulated curves as stage samples on the grid of input points.
inline std::pair<StageSample, StageSample> as_stage_samples(const SimGroups& g, double tau)
{
    QuantileGrid grid;
    grid.points = g.x;
    grid.tau = tau;
    grid.validate();
    return {StageSample{"group1", grid, g.group1}, StageSample{"group2", grid, g.group2}};
}

/// Per-run outcome of the two tail mean tests.
struct SimRunOutcome {
    double p_upper = 1.0;
    double p_lower = 1.0;
    double l2_pct = 0.0;
};

inline SimRunOutcome simulate_run(const SimConfig& cfg, std::uint64_t run)
{
    CounterRng rng(cfg.seed, run);
    const auto groups = sample_gp_groups(cfg, rng);
    const auto [g1, g2] = as_stage_samples(groups, cfg.tau);

    DecisionConfig dc;
    dc.tau = cfg.tau;
    dc.t_variant = cfg.t_variant;
    dc.perm = cfg.perm;
    const std::uint64_t perm_seed = derive_key(cfg.perm.seed ^ cfg.seed, run);
    dc.perm.seed = perm_seed;
    SimRunOutcome out;
    out.p_upper = test_upper_tail(g1, g2, dc).corrected_p();
    dc.perm.seed = perm_seed ^ 1u;
    out.p_lower = test_lower_tail(g1, g2, dc).corrected_p();
    out.l2_pct = l2_distance_pct(groups.x, mean_curve(groups.group1), mean_curve(groups.group2));
    return out;
}

/// Type II error of the two tail mean tests: the fraction of runs whose
/// corrected p exceeds alpha. Group 1 plays the earlier stage.
inline SimResult estimate_type2(const SimConfig& cfg)
{
    cfg.validate();
    std::size_t miss_upper = 0;
    std::size_t miss_lower = 0;
    double l2_sum = 0.0;
    for (std::size_t r = 0; r < cfg.runs; ++r) {
        const auto o = simulate_run(cfg, r);
        if (o.p_upper > cfg.alpha) ++miss_upper;
        if (o.p_lower > cfg.alpha) ++miss_lower;
        l2_sum += o.l2_pct;
    }
    SimResult res;
    res.n_curves_per_group = cfg.n_curves_per_group;
    res.runs_used = cfg.runs;
    res.type2_upper = static_cast<double>(miss_upper) / static_cast<double>(cfg.runs);
    res.type2_lower = static_cast<double>(miss_lower) / static_cast<double>(cfg.runs);
    res.avg_l2_pct = l2_sum / static_cast<double>(cfg.runs);
    return res;
}

} // namespace surfchange
