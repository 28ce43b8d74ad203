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

#include <chrono>
#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "mmdp/io.hpp"
#include "mmdp/montecarlo.hpp"

using namespace mmdp;

namespace {

ChainConfig gaussian_start(double eta)
{
    ChainConfig c;
    c.eta = eta;
    c.initial.kind = InitialCondition::Kind::Gaussian;
    c.initial.std_dev = 1.0;
    return c;
}

} // namespace

TEST(RunReplicas, WorkerCountDoesNotChangeOutput)
{
    const auto th = builtin_model("tanh1d");
    const auto s = solve_stein_1d(th, builtin_test_function("gauss"), invariant_density_1d(th));
    const auto cfg = gaussian_start(0.05);
    const auto one = run_replicas(th, s, cfg, 64, 99, 1);
    const auto eight = run_replicas(th, s, cfg, 64, 99, 8);
    EXPECT_EQ(io::to_csv(one), io::to_csv(eight));
    EXPECT_EQ(io::to_csv(one), io::to_csv(run_replicas(th, s, cfg, 64, 99, 1)));
    for (std::size_t i = 0; i < one.replicas.size(); ++i) {
        EXPECT_EQ(one.replicas[i].replica, i);
    }
    EXPECT_EQ(one.m, 400u);
    EXPECT_EQ(eight.workers, 8u);
}

TEST(RunReplicas, SingleReplicaIsTheChainResult)
{
    const auto th = builtin_model("tanh1d");
    const auto s = solve_stein_1d(th, builtin_test_function("tanh"), invariant_density_1d(th));
    const auto cfg = gaussian_start(0.02);
    const auto set = run_replicas(th, s, cfg, 1, 5);
    ASSERT_EQ(set.replicas.size(), 1u);
    ASSERT_TRUE(set.replicas[0].stats);
    std::ostringstream a;
    std::ostringstream b;
    io::write_row(a, *set.replicas[0].stats);
    io::write_row(b, run_chain_stats(th, s, cfg, NoiseStream(5, 0, 1)));
    EXPECT_EQ(a.str(), b.str());
}

TEST(RunReplicas, StatisticIsSymmetric)
{
    const auto ou = builtin_model("ou");
    const auto s = solve_stein_1d(ou, builtin_test_function("identity"), invariant_density_1d(ou));
    ChainConfig cfg;
    cfg.eta = 0.05;
    const auto set = run_replicas(ou, s, cfg, 100'000, 314, 0);
    ASSERT_EQ(set.m, 400u);
    ASSERT_EQ(set.failures(), 0u);
    std::size_t positive = 0;
    for (double w : set.column([](const ChainStats& c) { return c.w; })) {
        positive += w > 0.0 ? 1 : 0;
    }
    const double p = static_cast<double>(positive) / 1e5;
    EXPECT_GE(p, 0.49);
    EXPECT_LE(p, 0.51);
}

TEST(RunReplicas, FailedReplicasAreRecorded)
{
    const auto ou = builtin_model("ou");
    auto s = solve_stein_1d(ou, builtin_test_function("identity"), invariant_density_1d(ou));
    // Grid [-2.3, 2.3] clamps about 0.1% of stationary states, so roughly
    // half of the chains cross the rejection threshold.
    s.df_interp = MonotoneCubic(-2.3, 0.46, std::vector<double>(11, -1.0));
    ChainConfig cfg;
    cfg.eta = 0.01;
    const auto set = run_replicas(ou, s, cfg, 200, 1, 0);
    EXPECT_GT(set.failures(), 0u);
    EXPECT_LT(set.failures(), 200u);
    EXPECT_EQ(set.failures() + set.successes().size(), 200u);
    for (const auto& r : set.replicas) {
        EXPECT_NE(r.stats.has_value(), r.error.has_value());
        if (r.error) {
            EXPECT_EQ(*r.error, ErrorCode::StateOutsideGrid);
            EXPECT_FALSE(r.message.empty());
        }
    }
    std::istringstream csv(io::to_csv(set));
    std::size_t lines = 0;
    for (std::string line; std::getline(csv, line);) {
        ++lines;
    }
    EXPECT_EQ(lines, 1 + set.successes().size());
}

TEST(RunReplicas, DivergenceIsReportedWithItsStep)
{
    const auto stiff = builtin_model("ou", {{"kappa", 250.0}});
    const auto ou = builtin_model("ou");
    const auto s = solve_stein_1d(ou, builtin_test_function("identity"), invariant_density_1d(ou));
    ChainConfig cfg;
    cfg.eta = 0.01;
    try {
        run_replicas(stiff, s, cfg, 4, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::AllReplicasFailed);
    }
    try {
        run_chain_stats(stiff, s, cfg, NoiseStream(1, 0, 1));
        FAIL();
    } catch (const DivergenceError& e) {
        EXPECT_GT(e.step(), 100u);
        EXPECT_LT(e.step(), cfg.resolved_steps());
    } catch (const Error& e) {
        // the clamp guard may trip before the state overflows
        EXPECT_EQ(e.code(), ErrorCode::StateOutsideGrid);
    }
    EXPECT_THROW(run_replicas(ou, s, cfg, 0, 1), Error);
}

TEST(RunReplicas, MilsteinThroughput)
{
#ifndef NDEBUG
    GTEST_SKIP() << "throughput guard only applies to optimized builds";
#endif
    for (const auto& id : {"ou", "tanh1d"}) {
        const auto m = builtin_model(id);
        ChainConfig cfg;
        cfg.eta = 0.01;
        cfg.steps = 20'000'000;
        const auto t0 = std::chrono::steady_clock::now();
        const auto end = simulate_chain(m, cfg, 1, 0);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        EXPECT_TRUE(std::isfinite(end[0]));
        EXPECT_GE(2e7 / secs, 1e7) << id << ": " << 2e7 / secs << " steps/s";
    }
}
