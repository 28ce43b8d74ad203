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

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>

#include "mmdp/error.hpp"

namespace mmdp {

/// Philox4x32-10 counter-based bijection (Salmon et al., SC'11).
/// Pure function of (counter, key); no state, so any block of any stream
/// can be produced in O(1).
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr Counter apply(Counter ctr, Key key) noexcept
    {
        std::uint32_t c0 = ctr[0], c1 = ctr[1], c2 = ctr[2], c3 = ctr[3];
        std::uint32_t k0 = key[0], k1 = key[1];
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = std::uint64_t{kMul0} * c0;
            const std::uint64_t p1 = std::uint64_t{kMul1} * c2;
            c0 = static_cast<std::uint32_t>(p1 >> 32) ^ c1 ^ k0;
            c2 = static_cast<std::uint32_t>(p0 >> 32) ^ c3 ^ k1;
            c1 = static_cast<std::uint32_t>(p1);
            c3 = static_cast<std::uint32_t>(p0);
            k0 += kWeyl0;
            k1 += kWeyl1;
        }
        return {c0, c1, c2, c3};
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

/// Map 64 random bits to a double strictly inside (0, 1).
inline double bits_to_open_unit(std::uint64_t bits) noexcept
{
    return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

/// Sub-streams of one (seed, replica) pair. Each lane is an independent
/// counter space so initial-state draws never alias step noise.
enum class NoiseLane : std::uint32_t {
    Steps = 0,
    InitialState = 1,
    Sampling = 2,
};

/// Deterministic source of i.i.d. standard normal vectors xi_1, xi_2, ...
///
/// The k-th vector (0-based step index k consumes xi_{k+1}) is a pure
/// function of (master_seed, replica_index, lane, k): coordinate j of step k
/// is normal number n = k*dim + j. Normals come in pairs from the Marsaglia
/// polar method; attempt a of pair p reads Philox block (p, a), with the
/// attempt index in the top byte of the counter's second word, so pair
/// indices must stay below 2^56. Nothing is stored; streams are random-access.
class NoiseStream {
public:
    NoiseStream(std::uint64_t master_seed, std::uint64_t replica_index, std::size_t dim,
                NoiseLane lane = NoiseLane::Steps)
        : seed_(master_seed),
          key_{static_cast<std::uint32_t>(master_seed),
               static_cast<std::uint32_t>(master_seed >> 32)},
          replica_(static_cast<std::uint32_t>(replica_index)),
          lane_(static_cast<std::uint32_t>(lane)),
          dim_(dim)
    {
        if (replica_index > std::numeric_limits<std::uint32_t>::max()) {
            throw Error(ErrorCode::InvalidParams, "replica index exceeds 2^32-1");
        }
        if (dim == 0) {
            throw Error(ErrorCode::InvalidParams, "noise dimension must be positive");
        }
    }

    std::size_t dim() const noexcept { return dim_; }
    std::uint64_t master_seed() const noexcept { return seed_; }
    std::uint64_t replica() const noexcept { return replica_; }

    /// Normal number with flat index n.
    double normal_at(std::uint64_t n) const noexcept
    {
        const std::uint64_t pair = n >> 1;
        if (pair != cached_pair_) {
            fill_pair(pair);
        }
        return cached_[n & 1u];
    }

    /// Write xi_{step+1} into `out` (size dim).
    void fill(std::uint64_t step, std::span<double> out) const noexcept
    {
        const std::uint64_t base = step * dim_;
        for (std::size_t j = 0; j < dim_; ++j) {
            out[j] = normal_at(base + j);
        }
    }

    /// Write normals with flat indices [first, first + out.size()) into
    /// `out`; equal to calling normal_at on each index, without the cache.
    void fill_range(std::uint64_t first, std::span<double> out) const noexcept
    {
        std::size_t i = 0;
        std::uint64_t n = first;
        if ((n & 1u) != 0 && i < out.size()) {
            out[i++] = pair_values(n >> 1)[1];
            ++n;
        }
        for (; i + 1 < out.size(); i += 2, n += 2) {
            const auto v = pair_values(n >> 1);
            out[i] = v[0];
            out[i + 1] = v[1];
        }
        if (i < out.size()) {
            out[i] = pair_values(n >> 1)[0];
        }
    }

    /// Uniform on (0,1) with flat index n; shares the counter space of the
    /// lane, so callers should not mix uniforms and normals on one lane.
    double uniform_at(std::uint64_t n) const noexcept
    {
        const auto block = raw_block(n >> 1);
        const std::uint64_t bits = (n & 1u) == 0
            ? (std::uint64_t{block[0]} | (std::uint64_t{block[1]} << 32))
            : (std::uint64_t{block[2]} | (std::uint64_t{block[3]} << 32));
        return bits_to_open_unit(bits);
    }

private:
    Philox4x32::Counter raw_block(std::uint64_t index, std::uint32_t attempt = 0) const noexcept
    {
        const Philox4x32::Counter ctr{static_cast<std::uint32_t>(index),
                                      static_cast<std::uint32_t>(index >> 32) | (attempt << 24), replica_,
                                      lane_};
        return Philox4x32::apply(ctr, key_);
    }

    std::array<double, 2> pair_values(std::uint64_t pair) const noexcept
    {
        // Acceptance is pi/4 per attempt; 256 rejections in a row has
        // probability below 1e-170.
        for (std::uint32_t attempt = 0;; attempt = (attempt + 1) & 0xffu) {
            const auto block = raw_block(pair, attempt);
            const double u = 2.0 * bits_to_open_unit(std::uint64_t{block[0]} | (std::uint64_t{block[1]} << 32)) - 1.0;
            const double v = 2.0 * bits_to_open_unit(std::uint64_t{block[2]} | (std::uint64_t{block[3]} << 32)) - 1.0;
            const double s = u * u + v * v;
            if (s < 1.0) {
                const double scale = std::sqrt(-2.0 * std::log(s) / s);
                return {u * scale, v * scale};
            }
        }
    }

    void fill_pair(std::uint64_t pair) const noexcept
    {
        cached_ = pair_values(pair);
        cached_pair_ = pair;
    }

    std::uint64_t seed_;
    Philox4x32::Key key_;
    std::uint32_t replica_;
    std::uint32_t lane_;
    std::size_t dim_;
    mutable std::uint64_t cached_pair_ = std::numeric_limits<std::uint64_t>::max();
    mutable std::array<double, 2> cached_{};
};

} // namespace mmdp
