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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mmdp/accumulate.hpp"
#include "mmdp/error.hpp"
#include "mmdp/model.hpp"
#include "mmdp/noise.hpp"
#include "mmdp/parallel.hpp"
#include "mmdp/quadrature.hpp"
#include "mmdp/scheme.hpp"
#include "mmdp/stats.hpp"

namespace mmdp {

/// Per-chain statistics, all from one pass over theta_0 .. theta_m.
struct ChainStats {
    double eta = 0.0;
    std::uint64_t m = 0;
    std::uint64_t replica = 0;
    double pi_hat = 0.0;   // Pi_eta(h)
    double y = 0.0;        // model-based variance estimate
    double v = 0.0;        // increment-based variance estimate
    double v_noise = 0.0;  // (1/m) sum <f', sigma xi>^2, equal to v algebraically
    double h_eta = 0.0;    // martingale part
    double r_eta = 0.0;    // remainder eta^{-1/2}(pi_hat - pi(h)) - h_eta
    double w = 0.0;
    double s = 0.0;
    std::uint64_t clamped_steps = 0;
    double b_energy = 0.0;  // eta sum |b(theta_k)|^2

    /// eta^{-1/2}(Pi_eta(h) - pi(h)).
    double centred() const { return h_eta + r_eta; }
};

/// Fraction of clamped states above which a chain is rejected.
inline constexpr double kMaxClampedFraction = 1e-3;

/// Run one chain and accumulate its statistics. The initial state comes from
/// `config.initial` drawn with the stream's (seed, replica); pi(h) and f'
/// come from `stein`.
inline ChainStats run_chain_stats(const SdeModel& model, const SteinSolution& stein,
                                  const ChainConfig& config, const NoiseStream& noise)
{
    if (model.dimension != 1) {
        throw Error(ErrorCode::NotOneDimensional, "chain statistics need the 1-D Stein solution");
    }
    if (!stein.h.value) {
        throw Error(ErrorCode::InvalidParams, "Stein solution carries no test function");
    }
    config.validate();
    const double eta = config.eta;
    const std::uint64_t m = config.resolved_steps();
    if (m == 0) {
        throw Error(ErrorCode::InvalidParams, "chain statistics need m >= 1");
    }
    const auto theta0 = config.initial.sample(1, noise.master_seed(), noise.replica());

    NeumaierSum sum_h;
    NeumaierSum sum_y;
    NeumaierSum sum_v;
    NeumaierSum sum_vn;
    NeumaierSum sum_mart;
    NeumaierSum sum_b;
    std::uint64_t clamped = 0;
    const auto& h = stein.h.value;

    simulate_chain(model, config, theta0, noise, [&](const StepView& st) {
        const double x = st.theta[0];
        bool off = false;
        const double g = stein.df_interp(x, off);
        clamped += off ? 1 : 0;
        const double hx = h(x);
        if (!std::isfinite(hx)) {
            throw Error(ErrorCode::NonFiniteEvaluation, "h not finite along the chain");
        }
        const double sig = st.stepper.sigma()[0];
        const double b = st.stepper.drift()[0];
        const double sxi = st.stepper.sigma_xi()[0];
        const double incr = st.next[0] - x - eta * b - 0.5 * eta * st.stepper.applied_correction()[0];
        const double sg = sig * g;
        const double gi = incr * g;
        const double gn = g * sxi;
        sum_h.add(hx);
        sum_y.add(sg * sg);
        sum_v.add(gi * gi);
        sum_vn.add(gn * gn);
        sum_mart.add(gn);
        sum_b.add(b * b);
    });

    if (static_cast<double>(clamped) > kMaxClampedFraction * static_cast<double>(m)) {
        throw Error(ErrorCode::StateOutsideGrid,
                    std::to_string(clamped) + " of " + std::to_string(m) +
                        " states fell outside the Stein grid; enlarge the truncation");
    }

    const auto md = static_cast<double>(m);
    ChainStats cs;
    cs.eta = eta;
    cs.m = m;
    cs.replica = noise.replica();
    cs.pi_hat = sum_h.value() / md;
    cs.y = sum_y.value() / md;
    cs.v = sum_v.value() / (eta * md);
    cs.v_noise = sum_vn.value() / md;
    cs.h_eta = -eta * sum_mart.value();
    const double centred = (cs.pi_hat - stein.pi_h) / std::sqrt(eta);
    cs.r_eta = centred - cs.h_eta;
    cs.clamped_steps = clamped;
    cs.b_energy = eta * sum_b.value();
    if (!(cs.y > 0.0) || !(cs.v > 0.0)) {
        throw Error(ErrorCode::ZeroNormalization,
                    "variance estimate vanished on the visited states (y = " + std::to_string(cs.y) +
                        ", v = " + std::to_string(cs.v) + ")");
    }
    cs.w = centred / std::sqrt(cs.y);
    cs.s = centred / std::sqrt(cs.v);
    return cs;
}

struct ResidualScaling {
    std::vector<double> etas;
    std::vector<double> median_abs_r;
    std::vector<std::size_t> failures;
    double slope = 0.0;
};

inline void require_eta_grid(const std::vector<double>& etas, double min_span)
{
    if (etas.size() < 3) {
        throw Error(ErrorCode::InsufficientEtaGrid, "need at least 3 step sizes");
    }
    const auto [lo, hi] = std::minmax_element(etas.begin(), etas.end());
    if (!(*lo > 0.0) || *hi < min_span * *lo) {
        throw Error(ErrorCode::InsufficientEtaGrid,
                    "step sizes must span a ratio of at least " + std::to_string(min_span));
    }
}

/// Median |R_eta| over `replicas` chains per step size, and its log-log
/// slope against eta. `base` supplies the initial condition and scheme; its
/// eta and steps are overridden per entry.
inline ResidualScaling decomposition_residual_scaling(const SdeModel& model, const SteinSolution& stein,
                                                      const std::vector<double>& etas,
                                                      std::size_t replicas, std::uint64_t seed,
                                                      const ChainConfig& base = {},
                                                      std::size_t workers = 1)
{
    require_eta_grid(etas, 4.0);
    if (replicas == 0) {
        throw Error(ErrorCode::EmptyReplicaSet, "no replicas requested");
    }
    ResidualScaling out;
    out.etas = etas;
    for (double eta : etas) {
        ChainConfig cfg = base;
        cfg.eta = eta;
        cfg.steps.reset();
        std::vector<std::optional<double>> r(replicas);
        parallel_for(replicas, workers, [&](std::size_t i) {
            try {
                const NoiseStream noise(seed, i, 1);
                r[i] = std::abs(run_chain_stats(model, stein, cfg, noise).r_eta);
            } catch (const Error&) {
                r[i].reset();
            }
        });
        std::vector<double> ok;
        for (const auto& e : r) {
            if (e) {
                ok.push_back(*e);
            }
        }
        if (ok.empty()) {
            throw Error(ErrorCode::AllReplicasFailed, "every chain failed at eta = " + std::to_string(eta));
        }
        out.failures.push_back(replicas - ok.size());
        out.median_abs_r.push_back(stats::median(std::move(ok)));
    }
    out.slope = stats::log_log_slope(out.etas, out.median_abs_r);
    return out;
}

} // namespace mmdp
