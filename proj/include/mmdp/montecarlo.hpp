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

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mmdp/error.hpp"
#include "mmdp/estimator.hpp"
#include "mmdp/parallel.hpp"

namespace mmdp {

/// Outcome of one replica: statistics, or the error that stopped it.
struct ReplicaOutcome {
    std::uint64_t replica = 0;
    std::optional<ChainStats> stats;
    std::optional<ErrorCode> error;
    std::string message;
    /// Step index at which the chain diverged, when it did.
    std::optional<std::uint64_t> divergence_step;
};

struct ReplicaSampleSet {
    std::string experiment_id;
    double eta = 0.0;
    std::uint64_t m = 0;
    std::uint64_t master_seed = 0;
    std::vector<ReplicaOutcome> replicas;  // replicas[i].replica == i
    double wall_seconds = 0.0;             // metadata only
    std::size_t workers = 1;               // metadata only

    std::size_t failures() const
    {
        std::size_t n = 0;
        for (const auto& r : replicas) {
            n += r.stats ? 0 : 1;
        }
        return n;
    }

    std::vector<ChainStats> successes() const
    {
        std::vector<ChainStats> out;
        out.reserve(replicas.size());
        for (const auto& r : replicas) {
            if (r.stats) {
                out.push_back(*r.stats);
            }
        }
        return out;
    }

    /// One field of every successful replica, in replica order.
    template <typename Fn>
    std::vector<double> column(Fn&& field) const
    {
        std::vector<double> out;
        out.reserve(replicas.size());
        for (const auto& r : replicas) {
            if (r.stats) {
                out.push_back(field(*r.stats));
            }
        }
        return out;
    }
};

/// Replica i runs with NoiseStream(master_seed, i). Results are collected by
/// index, so the set does not depend on `workers`.
inline ReplicaSampleSet run_replicas(const SdeModel& model, const SteinSolution& stein,
                                     const ChainConfig& config, std::size_t replicas,
                                     std::uint64_t master_seed, std::size_t workers = 1,
                                     std::string experiment_id = {})
{
    if (replicas == 0) {
        throw Error(ErrorCode::EmptyReplicaSet, "no replicas requested");
    }
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    ReplicaSampleSet set;
    set.experiment_id = std::move(experiment_id);
    set.eta = config.eta;
    set.m = config.resolved_steps();
    set.master_seed = master_seed;
    set.workers = std::min(resolve_workers(workers), replicas);
    set.replicas.resize(replicas);
    parallel_for(replicas, workers, [&](std::size_t i) {
        ReplicaOutcome& out = set.replicas[i];
        out.replica = i;
        try {
            const NoiseStream noise(master_seed, i, model.dimension);
            out.stats = run_chain_stats(model, stein, config, noise);
        } catch (const DivergenceError& e) {
            out.error = e.code();
            out.message = e.what();
            out.divergence_step = e.step();
        } catch (const Error& e) {
            out.error = e.code();
            out.message = e.what();
        }
    });
    set.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (set.failures() == replicas) {
        throw Error(ErrorCode::AllReplicasFailed, "every replica failed; first: " + set.replicas[0].message);
    }
    return set;
}

} // namespace mmdp
