/*
   Copyright 2026 The milstein-mdp Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "mmdp/diagnostics.hpp"
#include "mmdp/io.hpp"

using namespace mmdp;

namespace {

ErrorCode code_of(auto&& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an error";
    return ErrorCode::InvalidParams;
}

std::vector<double> gaussian_quantiles(std::size_t n)
{
    std::vector<double> q(n);
    for (std::size_t i = 0; i < n; ++i) {
        q[i] = stats::normal_quantile((static_cast<double>(i) + 0.5) / static_cast<double>(n));
    }
    return q;
}

std::vector<double> synthetic_normals(std::size_t n, std::uint64_t seed)
{
    std::vector<double> v(n);
    NoiseStream(seed, 0, 1, NoiseLane::Sampling).fill_range(0, v);
    return v;
}

double binomial_cdf(std::size_t k, std::size_t n, double p)
{
    const double nd = static_cast<double>(n);
    double sum = 0.0;
    for (std::size_t i = 0; i <= k; ++i) {
        const double id = static_cast<double>(i);
        sum += std::exp(std::lgamma(nd + 1.0) - std::lgamma(id + 1.0) - std::lgamma(nd - id + 1.0) +
                        id * std::log(p) + (nd - id) * std::log1p(-p));
    }
    return sum;
}

const ReplicaSampleSet& ou_set()
{
    static const ReplicaSampleSet set = [] {
        const auto ou = builtin_model("ou");
        const auto s = solve_stein_1d(ou, builtin_test_function("identity"), invariant_density_1d(ou));
        ChainConfig cfg;
        cfg.eta = 0.05;
        return run_replicas(ou, s, cfg, 100'000, 4242, 0);
    }();
    return set;
}

} // namespace

TEST(Stats, KolmogorovSmirnovExamples)
{
    const auto q = gaussian_quantiles(1000);
    EXPECT_LE(stats::ks_statistic(q, stats::normal_cdf), 1.0 / 2000.0 + 1e-12);
    auto shifted = q;
    for (double& v : shifted) {
        v += 1.0;
    }
    EXPECT_NEAR(stats::ks_statistic(shifted, stats::normal_cdf), 2.0 * stats::normal_cdf(0.5) - 1.0, 1.0 / 2000.0 + 1e-12);
    EXPECT_EQ(stats::ks_critical_constant(0.01), 1.628);
    EXPECT_EQ(stats::ks_critical_constant(0.05), 1.358);
    EXPECT_EQ(code_of([] { stats::ks_critical_constant(0.1); }), ErrorCode::InvalidParams);
}

TEST(Stats, ClopperPearsonMatchesBinomialTails)
{
    const auto [lo0, hi0] = stats::clopper_pearson(0, 10);
    EXPECT_EQ(lo0, 0.0);
    EXPECT_NEAR(hi0, 1.0 - std::pow(0.025, 0.1), 1e-12);
    const auto [lon, hin] = stats::clopper_pearson(10, 10);
    EXPECT_NEAR(lon, std::pow(0.025, 0.1), 1e-12);
    EXPECT_EQ(hin, 1.0);
    for (const auto& [k, n] : {std::pair<std::size_t, std::size_t>{3, 20}, {50, 1000}, {999, 1000}}) {
        const auto [lo, hi] = stats::clopper_pearson(k, n);
        EXPECT_NEAR(1.0 - binomial_cdf(k - 1, n, lo), 0.025, 1e-9) << k << "/" << n;
        EXPECT_NEAR(binomial_cdf(k, n, hi), 0.025, 1e-9) << k << "/" << n;
    }
}

TEST(CltCheck, Examples)
{
    const auto calibrated = clt_check(gaussian_quantiles(1000));
    EXPECT_LE(calibrated.ks_statistic, 1.0 / 2000.0 + 1e-12);
    EXPECT_TRUE(calibrated.pass);
    EXPECT_NEAR(calibrated.critical_value, 1.628 / std::sqrt(1000.0), 1e-15);

    auto shifted = gaussian_quantiles(1000);
    for (double& v : shifted) {
        v += 1.0;
    }
    const auto off = clt_check(shifted);
    EXPECT_NEAR(off.ks_statistic, 0.3829, 1e-3);
    EXPECT_FALSE(off.pass);

    auto wide = gaussian_quantiles(1000);
    for (double& v : wide) {
        v *= 2.0;
    }
    EXPECT_TRUE(clt_check(wide, 4.0).pass);
    EXPECT_FALSE(clt_check(wide, 1.0).pass);
}

TEST(CltCheck, Errors)
{
    EXPECT_EQ(code_of([] { clt_check(gaussian_quantiles(99)); }), ErrorCode::TooFewSamples);
    auto with_nan = gaussian_quantiles(100);
    with_nan[3] = NAN;
    EXPECT_EQ(code_of([&] { clt_check(with_nan); }), ErrorCode::TooFewSamples);
    EXPECT_EQ(code_of([] { clt_check(gaussian_quantiles(200), 0.0); }), ErrorCode::InvalidParams);
}

TEST(CltCheck, CalibratedOnGaussianInput)
{
    int passes = 0;
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
        passes += clt_check(synthetic_normals(1000, 500 + trial)).pass ? 1 : 0;
    }
    // Expected 99 of 100; 96 is the binomial 1.5% lower quantile.
    EXPECT_GE(passes, 96);
}

TEST(CltCheck, OuStatisticPasses)
{
    const auto ou = builtin_model("ou");
    const auto s = solve_stein_1d(ou, builtin_test_function("identity"), invariant_density_1d(ou));
    ChainConfig cfg;
    cfg.eta = 0.02;
    const auto set = run_replicas(ou, s, cfg, 2000, 77, 0);
    const auto r = clt_check(set.column([](const ChainStats& c) { return c.w; }));
    EXPECT_TRUE(r.pass) << r.ks_statistic << " vs " << r.critical_value;
}

TEST(TailRatio, SyntheticGaussianRatiosCoverOne)
{
    const auto v = synthetic_normals(100'000, 9);
    const std::vector<double> xs{1.0, 2.0};
    for (const auto& row : tail_rows("Z", v, xs)) {
        EXPECT_LE(row.ci_lo, 1.0) << row.x;
        EXPECT_GE(row.ci_hi, 1.0) << row.x;
        EXPECT_NEAR(row.p_gauss, stats::normal_sf(row.x), 0.0);
    }
}

TEST(TailRatio, Resolution)
{
    const auto v = synthetic_normals(10'000, 2);
    const std::vector<double> xs{1.0, 4.0};
    EXPECT_EQ(code_of([&] { tail_rows("Z", v, xs); }), ErrorCode::InsufficientResolution);
    TailOptions opts;
    opts.mark_unresolved = true;
    const auto rows = tail_rows("Z", v, xs, opts);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_TRUE(rows[0].resolved);
    EXPECT_FALSE(rows[1].resolved);
    EXPECT_TRUE(std::isnan(rows[1].ratio));
    EXPECT_TRUE(tail_resolvable(2.0, 100'000));
    EXPECT_FALSE(tail_resolvable(3.0, 10'000));
}

TEST(TailRatio, OuTableAtZeroAndInvariants)
{
    const auto& set = ou_set();
    ASSERT_EQ(set.failures(), 0u);
    const auto zero = tail_ratio_table(set, {0.0});
    ASSERT_EQ(zero.rows.size(), 4u);
    for (const auto& row : zero.rows) {
        EXPECT_GE(row.ratio, 0.98) << row.statistic;
        EXPECT_LE(row.ratio, 1.02) << row.statistic;
    }
    const auto table = tail_ratio_table(set, {2.0, 0.5, 1.0, 1.5});
    EXPECT_EQ(table.xs, (std::vector<double>{0.5, 1.0, 1.5, 2.0}));
    ASSERT_EQ(table.rows.size(), 16u);
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        EXPECT_LE(row.ci_lo, row.ratio);
        EXPECT_GE(row.ci_hi, row.ratio);
        EXPECT_EQ(row.n_effective, 100'000u);
        if (i % 4 != 0) {
            EXPECT_EQ(row.statistic, table.rows[i - 1].statistic);
            EXPECT_LE(row.p_emp, table.rows[i - 1].p_emp);
        }
    }
    const std::string csv = io::to_csv(table);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), io::kTailHeader);
}

TEST(StrongOrder, ConstantSigmaSchemesCoincide)
{
    StrongOrderOptions opts;
    opts.paths = 32;
    const auto r = strong_order_regression(builtin_model("ou"), {0.125, 0.0625, 0.03125}, opts);
    EXPECT_TRUE(r.identical_paths);
    EXPECT_EQ(r.error_em, r.error_milstein);
    EXPECT_EQ(r.slope_em, r.slope_milstein);
    EXPECT_DOUBLE_EQ(r.eta_ref, 0.03125 / 16.0);
}

TEST(StrongOrder, MilsteinBeatsEulerOnMultiplicativeNoise)
{
    StrongOrderOptions opts;
    opts.paths = 128;
    const auto tanh = builtin_model("tanh1d", {{"c", 0.0}});
    const auto r = strong_order_regression(tanh, {0.0625, 0.03125, 0.015625, 0.0078125}, opts);
    EXPECT_FALSE(r.identical_paths);
    EXPECT_GT(r.slope_milstein, 0.8);
    EXPECT_LT(r.slope_em, 0.7);
    for (std::size_t e = 0; e < r.etas.size(); ++e) {
        EXPECT_LT(r.error_milstein[e], r.error_em[e]);
    }
}

TEST(StrongOrder, Errors)
{
    const auto ou = builtin_model("ou");
    EXPECT_EQ(code_of([&] { strong_order_regression(ou, {0.1}); }), ErrorCode::InsufficientEtaGrid);
    EXPECT_EQ(code_of([&] { strong_order_regression(ou, {0.1, 0.03}); }), ErrorCode::InvalidParams);
    StrongOrderOptions opts;
    opts.paths = 0;
    EXPECT_EQ(code_of([&] { strong_order_regression(ou, {0.125, 0.0625}, opts); }), ErrorCode::EmptyReplicaSet);
}

TEST(DriftCondition, OuAtOriginMatchesClosedForm)
{
    const auto rep = drift_condition_check(builtin_model("ou"), 0.01, {{0.0}}, 100'000, 3);
    ASSERT_EQ(rep.probes.size(), 1u);
    const auto& p = rep.probes[0];
    EXPECT_DOUBLE_EQ(rep.constants.c2, 2.0);
    EXPECT_DOUBLE_EQ(rep.constants.c3, 2.0);
    EXPECT_NEAR(p.rhs, 0.9975 + 0.02, 1e-15);
    EXPECT_TRUE(p.in_b);
    EXPECT_LE(std::abs(p.lhs - 1.01), 3.0 * p.stderr);
    EXPECT_TRUE(p.pass);
    EXPECT_TRUE(rep.pass);
}

TEST(DriftCondition, AllBuiltinModelsPassOnProbeGrid)
{
    for (const auto& id : builtin_model_ids()) {
        const auto m = builtin_model(id);
        for (double eta : {0.05, 0.01}) {
            const auto rep = drift_condition_check(m, eta, diagonal_probes(m.dimension, -10.0, 10.0, 50), 10'000, 5);
            EXPECT_TRUE(rep.pass) << id << " eta " << eta;
            EXPECT_EQ(rep.probes.size(), 50u);
        }
    }
}

TEST(DriftCondition, FarProbesHavePositiveMargin)
{
    for (const auto& id : builtin_model_ids()) {
        const auto m = builtin_model(id);
        std::vector<double> x(m.dimension, 0.0);
        x[0] = 10.0;
        const auto rep = drift_condition_check(m, 0.01, {x}, 1'000'000, 6);
        EXPECT_GT(rep.probes[0].margin, 0.0) << id;
        EXPECT_FALSE(rep.probes[0].in_b) << id;
    }
}

TEST(DriftCondition, Errors)
{
    auto m = builtin_model("ou");
    m.constants.dissipativity = 0.0;
    EXPECT_EQ(code_of([&] { drift_condition_check(m, 0.01, {{0.0}}, 100, 1); }), ErrorCode::ConstantsMissing);
    EXPECT_EQ(code_of([&] { drift_condition_check(builtin_model("ou"), 0.01, {{0.0, 1.0}}, 100, 1); }),
              ErrorCode::DimensionMismatch);
}

TEST(VarianceBridge, ConstantObservableSkipsSlope)
{
    const auto ou = builtin_model("ou");
    const auto s = solve_stein_1d(ou, builtin_test_function("identity"), invariant_density_1d(ou));
    BridgeOptions opts;
    opts.chain_len = 100'000;
    const auto r = variance_bridge(ou, s, {0.2, 0.1, 0.05}, opts);
    EXPECT_TRUE(r.slope_skipped);
    EXPECT_FALSE(r.skip_reason.empty());
    EXPECT_TRUE(std::isnan(r.slope));
    for (const auto& row : r.rows) {
        EXPECT_LE(row.gap, 1e-6);
    }
}

TEST(VarianceBridge, ReportsGapsWithErrorBars)
{
    const auto th = builtin_model("tanh1d");
    const auto s = solve_stein_1d(th, builtin_test_function("gauss"), invariant_density_1d(th));
    BridgeOptions opts;
    opts.chain_len = 400'000;
    const auto a = variance_bridge(th, s, {0.2, 0.1, 0.05}, opts);
    ASSERT_EQ(a.rows.size(), 3u);
    EXPECT_FALSE(a.slope_skipped);
    for (const auto& row : a.rows) {
        EXPECT_GT(row.stderr, 0.0);
        EXPECT_EQ(row.pi_value, s.asymptotic_variance);
    }
    opts.workers = 3;
    EXPECT_EQ(io::to_csv(a), io::to_csv(variance_bridge(th, s, {0.2, 0.1, 0.05}, opts)));
}

TEST(VarianceBridge, ControlVariateKeepsMeanAndShrinksError)
{
    const auto th = builtin_model("tanh1d");
    const auto s = solve_stein_1d(th, builtin_test_function("gauss"), invariant_density_1d(th));
    BridgeOptions opts;
    opts.chain_len = 1'000'000;
    const auto r = variance_bridge(th, s, {0.2, 0.1, 0.05}, opts);
    EXPECT_TRUE(r.control_variate);
    EXPECT_LE(r.cv_residual, 1e-6);
    for (const auto& row : r.rows) {
        // the added terms have zero conditional mean
        EXPECT_LE(std::abs(row.pi_eta - row.pi_eta_plain), 4.0 * (row.stderr + row.stderr_plain)) << row.eta;
        EXPECT_LT(row.stderr, 0.25 * row.stderr_plain) << row.eta;
    }
    opts.control_variate = false;
    const auto p = variance_bridge(th, s, {0.2, 0.1, 0.05}, opts);
    EXPECT_FALSE(p.control_variate);
    for (std::size_t i = 0; i < p.rows.size(); ++i) {
        EXPECT_EQ(p.rows[i].pi_eta, p.rows[i].pi_eta_plain);
        EXPECT_EQ(p.rows[i].pi_eta_plain, r.rows[i].pi_eta_plain);
    }
}

TEST(VarianceBridge, Errors)
{
    const auto ou = builtin_model("ou");
    const auto s = solve_stein_1d(ou, builtin_test_function("identity"), invariant_density_1d(ou));
    EXPECT_EQ(code_of([&] { variance_bridge(ou, s, {0.1, 0.05}); }), ErrorCode::InsufficientEtaGrid);
}

TEST(Concentration, DegenerateStatistic)
{
    const std::vector<double> zeros(1000, 0.0);
    const auto c = concentration_curve("VY_dev", zeros, {0.01, 0.02});
    EXPECT_TRUE(c.degenerate);
    EXPECT_FALSE(c.pass);
    for (const auto& p : c.points) {
        EXPECT_EQ(p.tail, 0.0);
    }
}

TEST(Concentration, ExponentialTailsDecay)
{
    const NoiseStream u(31, 0, 1, NoiseLane::Sampling);
    std::vector<double> v(100'000);
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = -std::log(u.uniform_at(i));
    }
    const auto c = concentration_curve("b_energy", v, {0.5, 1.0, 2.0, 3.0, 4.0});
    EXPECT_TRUE(c.strictly_decreasing);
    EXPECT_TRUE(c.pass);
    EXPECT_NEAR(c.linear_rate, 1.0, 0.05);
    EXPECT_EQ(c.dominant, "linear");
    EXPECT_EQ(code_of([&] { concentration_curve("b_energy", v, {20.0}); }), ErrorCode::InsufficientResolution);
    ConcentrationOptions opts;
    opts.mark_unresolved = true;
    EXPECT_FALSE(concentration_curve("b_energy", v, {1.0, 2.0, 20.0}, opts).points.back().resolved);
}

TEST(Concentration, OuSampleShapes)
{
    const auto& set = ou_set();
    for (auto which : {ConcentrationStatistic::VYDev, ConcentrationStatistic::RRem, ConcentrationStatistic::BEnergy}) {
        const auto values = concentration_samples(set, which);
        ASSERT_EQ(values.size(), 100'000u);
        ConcentrationOptions opts;
        opts.mark_unresolved = true;
        const auto c = concentration_curve(std::string(to_string(which)), values, spread_grid(values), opts);
        EXPECT_TRUE(c.pass) << to_string(which);
        EXPECT_GT(c.points.size(), 1u);
    }
    // y is identically 1 for the OU pair; its deviation is degenerate.
    const auto ydev = concentration_samples(set, ConcentrationStatistic::YDev);
    EXPECT_LE(*std::max_element(ydev.begin(), ydev.end()), 1e-6);
}

TEST(Concentration, Names)
{
    for (auto s : {ConcentrationStatistic::YDev, ConcentrationStatistic::VYDev, ConcentrationStatistic::RRem,
                   ConcentrationStatistic::BEnergy}) {
        EXPECT_EQ(concentration_statistic_from(std::string(to_string(s))), s);
    }
    EXPECT_EQ(code_of([] { concentration_statistic_from("nope"); }), ErrorCode::InvalidParams);
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0, 5.0};
    const auto ys = spread_grid(v, 3);
    EXPECT_DOUBLE_EQ(ys[0], 3.0);
    EXPECT_DOUBLE_EQ(ys[2], 3.0 + std::sqrt(2.5));
}
