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

#include "mmdp/model.hpp"
#include "mmdp/noise.hpp"

using namespace mmdp;

namespace {

SdeModel scalar_model(std::function<double(double)> b, std::function<double(double)> s,
                      std::function<double(double)> ds, ModelConstants k)
{
    SdeModel m;
    m.id = "custom";
    m.dimension = 1;
    m.drift = [b](std::span<const double> x, std::span<double> out) { out[0] = b(x[0]); };
    m.diffusion = [s](std::span<const double> x, std::span<double> out) { out[0] = s(x[0]); };
    m.diffusion_gradient = [ds](std::span<const double> x, std::span<double> out) { out[0] = ds(x[0]); };
    m.constants = k;
    return m;
}

SamplingSpec box(double lo, double hi, std::size_t n, std::uint64_t seed = 1)
{
    SamplingSpec s;
    s.lower = {lo};
    s.upper = {hi};
    s.points = n;
    s.pairs = n;
    s.seed = seed;
    return s;
}

} // namespace

TEST(Validate, LinearDriftUnitNoisePasses)
{
    const auto m = scalar_model([](double x) { return -x; }, [](double) { return 1.0; }, [](double) { return 0.0; },
                                {1.0, 1.0, 0.0, 1.0, 0.0, 0.0});
    const auto rep = validate_assumptions(m, box(-10, 10, 2000));
    EXPECT_TRUE(rep.ok());
    EXPECT_FALSE(rep.multiplicative_noise);
}

TEST(Validate, ExpansiveDriftFailsDissipativity)
{
    const auto m = scalar_model([](double x) { return x; }, [](double) { return 1.0; }, [](double) { return 0.0; },
                                {1.0, 1.0, 0.0, 1.0, 0.0, 0.0});
    const auto rep = validate_assumptions(m, box(-10, 10, 500));
    EXPECT_FALSE(rep.dissipativity_ok);
    ASSERT_EQ(rep.worst_dissipativity.x.size(), 1u);
    ASSERT_EQ(rep.worst_dissipativity.y.size(), 1u);
    // <x - y, x - y> = +|x - y|^2 so the margin is -2 |x - y|^2 at the offender.
    const double dxy = rep.worst_dissipativity.x[0] - rep.worst_dissipativity.y[0];
    EXPECT_NEAR(rep.worst_dissipativity.margin, -2.0 * dxy * dxy, 1e-9 * (1 + dxy * dxy));
}

TEST(Validate, TanhDiffusionPositive)
{
    const auto m = scalar_model([](double x) { return -x; }, [](double x) { return 1.0 + 0.5 * std::tanh(x); },
                                [](double x) { return 0.5 / (std::cosh(x) * std::cosh(x)); },
                                {1.0, 1.0, 0.0, 1.5, 0.5, 0.0});
    const auto rep = validate_assumptions(m, box(-5, 5, 2000));
    EXPECT_TRUE(rep.positivity_ok);
    EXPECT_GE(rep.min_sigma_eigenvalue, 0.5);
    EXPECT_GE(rep.min_sigma_eigenvalue, 1.0 + 0.5 * std::tanh(-5.0) - 1e-15);
    EXPECT_TRUE(rep.multiplicative_noise);
}

TEST(Validate, ErrorsOnEmptyGridAndNonFinite)
{
    const auto ou = builtin_model("ou");
    SamplingSpec empty = box(-1, 1, 0);
    EXPECT_THROW(validate_assumptions(ou, empty), Error);
    try {
        validate_assumptions(ou, empty);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyGrid);
    }
    const auto bad = scalar_model([](double) { return NAN; }, [](double) { return 1.0; }, [](double) { return 0.0; },
                                  {1.0, 1.0, 0.0, 1.0, 0.0, 0.0});
    try {
        validate_assumptions(bad, box(-1, 1, 10));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonFiniteEvaluation);
    }
}

TEST(BuiltinModel, OrnsteinUhlenbeckConstants)
{
    const auto m = builtin_model("ou", {{"kappa", 1.0}, {"s", 1.0}});
    EXPECT_EQ(m.constants.dissipativity, 1.0);
    EXPECT_EQ(m.constants.offset, 0.0);
    EXPECT_EQ(m.constants.lipschitz, 1.0);
    EXPECT_EQ(m.constants.grad_sigma_sup, 0.0);
    EXPECT_TRUE(m.additive_noise);
    std::vector<double> g(1, 1.0);
    m.diffusion_gradient(std::vector<double>{0.3}, g);
    EXPECT_EQ(g[0], 0.0);
}

TEST(BuiltinModel, TanhConstants)
{
    const auto m = builtin_model("tanh1d", {{"kappa", 1.0}, {"c", 0.5}, {"s0", 1.0}, {"s1", 0.5}});
    EXPECT_DOUBLE_EQ(m.constants.dissipativity, 0.5);
    EXPECT_DOUBLE_EQ(m.constants.sigma_sup, 1.5);
    std::vector<double> s(1);
    double lo = 10;
    double hi = -10;
    for (double x = -30; x <= 30; x += 0.01) {
        m.diffusion(std::vector<double>{x}, s);
        lo = std::min(lo, s[0]);
        hi = std::max(hi, s[0]);
    }
    EXPECT_GE(lo, 0.5);
    EXPECT_LE(hi, 1.5);
    EXPECT_NEAR(lo, 0.5, 1e-12);
    EXPECT_NEAR(hi, 1.5, 1e-12);
}

TEST(BuiltinModel, RejectsBadInput)
{
    auto code = [](auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::EmptyGrid;
    };
    EXPECT_EQ(code([] { builtin_model("tanh1d", {{"kappa", 1.0}, {"c", 1.5}}); }), ErrorCode::InvalidParams);
    EXPECT_EQ(code([] { builtin_model("tanh1d", {{"s0", 0.5}, {"s1", 0.5}}); }), ErrorCode::InvalidParams);
    EXPECT_EQ(code([] { builtin_model("nope"); }), ErrorCode::UnknownModelId);
    EXPECT_EQ(code([] { builtin_model("ou", {{"sigma", 1.0}}); }), ErrorCode::InvalidParams);
    EXPECT_EQ(code([] { builtin_test_function("sinc"); }), ErrorCode::UnknownTestFunctionId);
}

TEST(BuiltinModel, AllPassOwnConstantsSeedIndependent)
{
    for (const auto& id : builtin_model_ids()) {
        const auto m = builtin_model(id);
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            SamplingSpec s = box(-10, 10, 10000, seed);
            const auto rep = validate_assumptions(m, s);
            EXPECT_TRUE(rep.ok()) << id << " seed " << seed;
        }
    }
}

TEST(BuiltinModel, DiffusionGradientMatchesFiniteDifferences)
{
    for (const auto& id : builtin_model_ids()) {
        const auto m = builtin_model(id);
        const std::size_t d = m.dimension;
        const NoiseStream u(17, 0, 1, NoiseLane::Sampling);
        std::vector<double> x(d);
        std::vector<double> grad(d * d * d);
        std::vector<double> sp(d * d);
        std::vector<double> sm(d * d);
        std::uint64_t n = 0;
        for (int p = 0; p < 100; ++p) {
            for (auto& e : x) {
                e = -5.0 + 10.0 * u.uniform_at(n++);
            }
            m.diffusion_gradient(x, grad);
            for (std::size_t l = 0; l < d; ++l) {
                const double step = 1e-5;
                auto xp = x;
                auto xm = x;
                xp[l] += step;
                xm[l] -= step;
                m.diffusion(xp, sp);
                m.diffusion(xm, sm);
                for (std::size_t ij = 0; ij < d * d; ++ij) {
                    const double fd = (sp[ij] - sm[ij]) / (2 * step);
                    const double an = grad[ij * d + l];
                    EXPECT_NEAR(an, fd, 1e-5 * std::max(1.0, std::abs(an))) << id;
                }
            }
        }
    }
}

TEST(TestFunctions, DerivativesMatchFiniteDifferences)
{
    for (const auto& id : builtin_test_function_ids()) {
        const auto h = builtin_test_function(id);
        for (double x = -4.0; x <= 4.0; x += 0.37) {
            const double step = 1e-4;
            const double d1 = (h.value(x + step) - h.value(x - step)) / (2 * step);
            const double d2 = (h.first(x + step) - h.first(x - step)) / (2 * step);
            EXPECT_NEAR(h.first(x), d1, 1e-5 * std::max(1.0, std::abs(d1))) << id << " at " << x;
            EXPECT_NEAR(h.second(x), d2, 1e-5 * std::max(1.0, std::abs(d2))) << id << " at " << x;
        }
    }
    EXPECT_FALSE(builtin_test_function("identity").bounded);
    EXPECT_TRUE(builtin_test_function("gauss").bounded);
}

TEST(TanhModel, FusedTanhMatchesLibm)
{
    double worst_t = 0.0;
    double worst_s = 0.0;
    for (double x = -30.0; x <= 30.0; x += 1e-3) {
        const auto [t, s2] = detail::tanh_sech2(x);
        const double ref = std::tanh(x);
        const double ref_s2 = 1.0 / (std::cosh(x) * std::cosh(x));
        worst_t = std::max(worst_t, std::abs(t - ref));
        worst_s = std::max(worst_s, std::abs(s2 - ref_s2) / ref_s2);
    }
    EXPECT_LE(worst_t, 4e-16);
    EXPECT_LE(worst_s, 1e-14);
    EXPECT_EQ(detail::tanh_sech2(0.0)[0], 0.0);
    EXPECT_EQ(detail::tanh_sech2(800.0)[0], 1.0);
    EXPECT_EQ(detail::tanh_sech2(-800.0)[0], -1.0);
}

TEST(TanhModel, FusedCoefficientsAgreeWithSeparateCallbacks)
{
    for (const auto& m : {builtin_model("tanh1d"), builtin_model("tanhNd", {{"dim", 3.0}})}) {
        const std::size_t d = m.dimension;
        std::vector<double> b(d), s(d * d), g(d * d * d), fb(d), fs(d * d, 7.0), fg(d * d * d, 7.0);
        for (double t = -4.0; t <= 4.0; t += 0.37) {
            std::vector<double> x(d);
            for (std::size_t i = 0; i < d; ++i) {
                x[i] = t * (1.0 + 0.3 * static_cast<double>(i));
            }
            m.drift(x, b);
            m.diffusion(x, s);
            m.diffusion_gradient(x, g);
            m.coefficients(x, fb, fs, fg);
            EXPECT_EQ(b, fb);
            EXPECT_EQ(s, fs);
            EXPECT_EQ(g, fg);
        }
    }
}
