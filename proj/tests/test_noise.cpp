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
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "mmdp/noise.hpp"
#include "mmdp/stats.hpp"

using namespace mmdp;

TEST(Philox, KnownAnswerZeroCounterZeroKey)
{
    // Published Random123 known-answer vector for philox4x32-10.
    const auto out = Philox4x32::apply({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(out[0], 0x6627e8d5u);
    EXPECT_EQ(out[1], 0xe169c58du);
    EXPECT_EQ(out[2], 0xbc57ac4cu);
    EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerAllOnes)
{
    const auto out = Philox4x32::apply({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                       {0xffffffffu, 0xffffffffu});
    EXPECT_EQ(out[0], 0x408f276du);
    EXPECT_EQ(out[1], 0x41c83b0eu);
    EXPECT_EQ(out[2], 0xa20bc7c6u);
    EXPECT_EQ(out[3], 0x6d5451fdu);
}

TEST(Philox, KnownAnswerPiDigits)
{
    const auto out = Philox4x32::apply({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                       {0xa4093822u, 0x299f31d0u});
    EXPECT_EQ(out[0], 0xd16cfe09u);
    EXPECT_EQ(out[1], 0x94fdccebu);
    EXPECT_EQ(out[2], 0x5001e420u);
    EXPECT_EQ(out[3], 0x24126ea1u);
}

TEST(NoiseStream, DeterministicAndRandomAccess)
{
    const NoiseStream a(42, 3, 2);
    const NoiseStream b(42, 3, 2);
    std::vector<double> forward;
    for (std::uint64_t n = 0; n < 100; ++n) {
        forward.push_back(a.normal_at(n));
    }
    for (std::uint64_t n = 100; n-- > 0;) {
        EXPECT_EQ(b.normal_at(n), forward[n]);
    }
    std::vector<double> xi(2);
    a.fill(7, xi);
    EXPECT_EQ(xi[0], forward[14]);
    EXPECT_EQ(xi[1], forward[15]);
}

TEST(NoiseStream, ReplicasAndLanesDiffer)
{
    const NoiseStream base(1, 0, 1);
    const NoiseStream other_replica(1, 1, 1);
    const NoiseStream other_lane(1, 0, 1, NoiseLane::InitialState);
    const NoiseStream other_seed(2, 0, 1);
    int same = 0;
    for (std::uint64_t n = 0; n < 1000; ++n) {
        same += base.normal_at(n) == other_replica.normal_at(n);
        same += base.normal_at(n) == other_lane.normal_at(n);
        same += base.normal_at(n) == other_seed.normal_at(n);
    }
    EXPECT_EQ(same, 0);
}

TEST(NoiseStream, MomentsAndIndependenceAcrossReplicas)
{
    const std::size_t n = 200000;
    std::vector<double> x(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = NoiseStream(9, i, 1).normal_at(0);
        y[i] = NoiseStream(9, i, 1).normal_at(1);
    }
    const double se = 1.0 / std::sqrt(static_cast<double>(n));
    EXPECT_LT(std::abs(stats::mean(x)), 4 * se);
    EXPECT_LT(std::abs(stats::variance(x) - 1.0), 4 * std::sqrt(2.0) * se);
    double cross = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        cross += x[i] * y[i];
    }
    EXPECT_LT(std::abs(cross / static_cast<double>(n)), 4 * se);
    // KS against N(0, 1): alpha = 0.01 critical value.
    const double ks = stats::ks_statistic(x, [](double v) { return stats::normal_cdf(v); });
    EXPECT_LT(ks, 1.628 * se);
}

TEST(NoiseStream, UniformsInOpenInterval)
{
    const NoiseStream s(5, 0, 1, NoiseLane::Sampling);
    for (std::uint64_t n = 0; n < 10000; ++n) {
        const double u = s.uniform_at(n);
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
    EXPECT_GT(bits_to_open_unit(0), 0.0);
    EXPECT_LT(bits_to_open_unit(~std::uint64_t{0}), 1.0);
}

TEST(NoiseStream, RejectsOversizedReplicaIndex)
{
    EXPECT_THROW(NoiseStream(1, std::uint64_t{1} << 32, 1), Error);
    EXPECT_THROW(NoiseStream(1, 0, 0), Error);
}

TEST(NoiseStream, RangeFillMatchesPointwise)
{
    const NoiseStream a(12, 4, 3);
    const NoiseStream b(12, 4, 3);
    for (std::uint64_t first : {0u, 1u, 7u, 1000u}) {
        for (std::size_t len : {0u, 1u, 2u, 5u, 64u}) {
            std::vector<double> out(len, NAN);
            a.fill_range(first, out);
            for (std::size_t i = 0; i < len; ++i) {
                ASSERT_EQ(out[i], b.normal_at(first + i)) << first << "+" << i;
            }
        }
    }
}
