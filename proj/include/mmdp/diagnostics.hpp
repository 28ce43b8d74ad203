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
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mmdp/accumulate.hpp"
#include "mmdp/error.hpp"
#include "mmdp/estimator.hpp"
#include "mmdp/model.hpp"
#include "mmdp/montecarlo.hpp"
#include "mmdp/noise.hpp"
#include "mmdp/parallel.hpp"
#include "mmdp/quadrature.hpp"
#include "mmdp/scheme.hpp"
#include "mmdp/stats.hpp"

namespace mmdp {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// central limit theorem

struct CltResult {
    std::size_t n = 0;
    double ks_statistic = 0.0;
    double critical_value = 0.0;
    double alpha = 0.01;
    double mean = 0.0;
    double variance = 0.0;
    double target_variance = 1.0;
    bool pass = false;
};

/// One-sample KS test of `samples` against N(0, target_variance). Non-finite
/// samples are dropped before counting.
inline CltResult clt_check(std::span<const double> samples, double target_variance = 1.0,
                           double alpha = 0.01)
{
    if (!(target_variance > 0.0)) {
        throw Error(ErrorCode::InvalidParams, "target variance must be positive");
    }
    std::vector<double> finite;
    finite.reserve(samples.size());
    for (double v : samples) {
        if (std::isfinite(v)) {
            finite.push_back(v);
        }
    }
    if (finite.size() < 100) {
        throw Error(ErrorCode::TooFewSamples, "KS check needs at least 100 finite samples");
    }
    CltResult r;
    r.n = finite.size();
    r.alpha = alpha;
    r.target_variance = target_variance;
    r.mean = stats::mean(finite);
    r.variance = stats::variance(finite);
    r.critical_value = stats::ks_critical_constant(alpha) / std::sqrt(static_cast<double>(r.n));
    const double sd = std::sqrt(target_variance);
    r.ks_statistic = stats::ks_statistic(std::move(finite), [sd](double x) { return stats::normal_cdf(x / sd); });
    r.pass = r.ks_statistic < r.critical_value;
    return r;
}

// ---------------------------------------------------------------------------
// moderate-deviation tail ratios

struct TailRow {
    std::string statistic;
    double x = 0.0;
    double p_emp = 0.0;
    double p_gauss = 0.0;
    double ratio = 0.0;
    double ci_lo = 0.0;  // 95% Clopper-Pearson interval, divided by p_gauss
    double ci_hi = 0.0;
    std::size_t n_effective = 0;
    std::size_t hits = 0;
    bool resolved = true;
};

struct TailRatioTable {
    std::vector<double> xs;
    std::vector<TailRow> rows;
    std::size_t excluded_failures = 0;
};

struct TailOptions {
    /// Minimum expected Gaussian hit count (1 - Phi(x)) N at every x.
    double min_expected_hits = 100.0;
    /// Mark unresolvable points instead of throwing.
    bool mark_unresolved = false;
    double level = 0.95;
};

inline bool tail_resolvable(double x, std::size_t n, double min_expected_hits = 100.0)
{
    return stats::normal_sf(x) * static_cast<double>(n) >= min_expected_hits;
}

/// Throw InsufficientResolution if any x lies beyond Monte Carlo resolution
/// for n samples.
inline void require_tail_resolution(std::span<const double> xs, std::size_t n, double min_expected_hits = 100.0)
{
    for (double x : xs) {
        if (!tail_resolvable(x, n, min_expected_hits)) {
            std::ostringstream msg;
            msg << "x = " << x << " needs (1 - Phi(x)) N >= " << min_expected_hits << " but N = " << n;
            throw Error(ErrorCode::InsufficientResolution, msg.str());
        }
    }
}

/// Rows P(stat > x) / (1 - Phi(x)) for one statistic over an ascending grid.
inline std::vector<TailRow> tail_rows(const std::string& statistic, std::span<const double> samples,
                                      std::span<const double> xs, const TailOptions& opts = {})
{
    std::vector<double> sorted;
    sorted.reserve(samples.size());
    for (double v : samples) {
        if (std::isfinite(v)) {
            sorted.push_back(v);
        }
    }
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    if (n == 0) {
        throw Error(ErrorCode::TooFewSamples, "no finite samples for '" + statistic + "'");
    }
    if (!opts.mark_unresolved) {
        require_tail_resolution(xs, n, opts.min_expected_hits);
    }
    std::vector<TailRow> rows;
    for (double x : xs) {
        TailRow row;
        row.statistic = statistic;
        row.x = x;
        row.n_effective = n;
        row.p_gauss = stats::normal_sf(x);
        row.resolved = tail_resolvable(x, n, opts.min_expected_hits);
        if (!row.resolved) {
            row.p_emp = row.ratio = row.ci_lo = row.ci_hi = kNaN;
            rows.push_back(row);
            continue;
        }
        const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), x);
        row.hits = static_cast<std::size_t>(above);
        row.p_emp = static_cast<double>(row.hits) / static_cast<double>(n);
        row.ratio = row.p_emp / row.p_gauss;
        const auto [lo, hi] = stats::clopper_pearson(row.hits, n, opts.level);
        row.ci_lo = lo / row.p_gauss;
        row.ci_hi = hi / row.p_gauss;
        rows.push_back(row);
    }
    return rows;
}

/// Table over W, -W, S, -S of the successful replicas. `xs` is sorted.
inline TailRatioTable tail_ratio_table(const ReplicaSampleSet& set, std::vector<double> xs,
                                       const TailOptions& opts = {})
{
    std::sort(xs.begin(), xs.end());
    TailRatioTable table;
    table.xs = xs;
    table.excluded_failures = set.failures();
    const auto w = set.column([](const ChainStats& c) { return c.w; });
    const auto s = set.column([](const ChainStats& c) { return c.s; });
    auto neg = [](std::vector<double> v) {
        for (double& e : v) {
            e = -e;
        }
        return v;
    };
    for (const auto& [name, col] : {std::pair{std::string("W"), w}, std::pair{std::string("-W"), neg(w)},
                                    std::pair{std::string("S"), s}, std::pair{std::string("-S"), neg(s)}}) {
        auto rows = tail_rows(name, col, xs, opts);
        table.rows.insert(table.rows.end(), rows.begin(), rows.end());
    }
    return table;
}

// ---------------------------------------------------------------------------
// strong order

struct StrongOrderOptions {
    double horizon = 1.0;
    std::size_t paths = 512;
    std::uint64_t seed = 1;
    /// Reference step; defaults to min(etas) / 16.
    std::optional<double> eta_ref;
    std::vector<double> theta0{0.0};
    std::size_t workers = 1;
};

struct StrongOrderResult {
    std::vector<double> etas;
    double eta_ref = 0.0;
    std::vector<double> error_em;
    std::vector<double> error_milstein;
    std::vector<double> stderr_em;
    std::vector<double> stderr_milstein;
    double slope_em = 0.0;
    double slope_milstein = 0.0;
    /// Every EM endpoint equals the Milstein endpoint bit-for-bit.
    bool identical_paths = false;
};

namespace detail {

inline std::uint64_t exact_ratio(double num, double den, const char* what)
{
    const double r = num / den;
    const double k = std::round(r);
    if (!(k >= 1.0) || std::abs(r - k) > 1e-9 * k) {
        throw Error(ErrorCode::InvalidParams, std::string(what) + " is not an integer multiple");
    }
    return static_cast<std::uint64_t>(k);
}

} // namespace detail

/// Strong error E|X_T^ref - theta_T^eta| for EM and Milstein on coupled
/// paths: the coarse normal of each step is the normalized sum of the
/// reference normals it spans, so all schemes see one Brownian path. The
/// reference is Milstein at eta_ref.
inline StrongOrderResult strong_order_regression(const SdeModel& model, std::vector<double> etas,
                                                 const StrongOrderOptions& opts = {})
{
    if (etas.size() < 2) {
        throw Error(ErrorCode::InsufficientEtaGrid, "strong order needs at least 2 step sizes");
    }
    if (opts.paths == 0) {
        throw Error(ErrorCode::EmptyReplicaSet, "no paths requested");
    }
    std::sort(etas.begin(), etas.end(), std::greater<>());
    const double eta_ref = opts.eta_ref.value_or(etas.back() / 16.0);
    if (!(eta_ref > 0.0) || eta_ref > etas.back() / 16.0) {
        throw Error(ErrorCode::InvalidParams, "reference step must satisfy eta_ref <= min(etas)/16");
    }
    const std::size_t d = model.dimension;
    const std::uint64_t fine_steps = detail::exact_ratio(opts.horizon, eta_ref, "horizon / eta_ref");
    std::vector<std::uint64_t> ratio(etas.size());
    for (std::size_t e = 0; e < etas.size(); ++e) {
        ratio[e] = detail::exact_ratio(etas[e], eta_ref, "eta / eta_ref");
        if ((ratio[e] & (ratio[e] - 1)) != 0) {
            throw Error(ErrorCode::InvalidParams, "step sizes must be dyadic multiples of eta_ref");
        }
        if (fine_steps % ratio[e] != 0) {
            throw Error(ErrorCode::InvalidParams, "horizon is not a whole number of steps");
        }
    }
    InitialCondition ic = InitialCondition::fixed(opts.theta0);
    const auto theta0 = ic.sample(d, opts.seed, 0);

    // err[path][e][scheme]
    const std::size_t ne = etas.size();
    std::vector<double> err(opts.paths * ne * 2);
    std::vector<unsigned char> same(opts.paths, 1);

    parallel_for(opts.paths, opts.workers, [&](std::size_t p) {
        const NoiseStream noise(opts.seed, p, d);
        std::vector<double> fine(fine_steps * d);
        noise.fill_range(0, fine);
        std::vector<double> cur(theta0);
        std::vector<double> next(d);
        std::vector<double> xi(d);
        Stepper ref(model, Scheme::Milstein);
        for (std::uint64_t k = 0; k < fine_steps; ++k) {
            ref.advance(cur, std::span<const double>(fine).subspan(k * d, d), eta_ref, next);
            for (double v : next) {
                if (!std::isfinite(v)) {
                    throw DivergenceError(k, "reference path diverged");
                }
            }
            cur.swap(next);
        }
        const std::vector<double> x_ref = cur;

        for (std::size_t e = 0; e < ne; ++e) {
            const std::uint64_t r = ratio[e];
            const double scale = 1.0 / std::sqrt(static_cast<double>(r));
            std::vector<double> ends[2];
            for (int s = 0; s < 2; ++s) {
                Stepper st(model, s == 0 ? Scheme::EulerMaruyama : Scheme::Milstein);
                cur = theta0;
                for (std::uint64_t k = 0; k < fine_steps / r; ++k) {
                    std::fill(xi.begin(), xi.end(), 0.0);
                    for (std::uint64_t q = 0; q < r; ++q) {
                        for (std::size_t j = 0; j < d; ++j) {
                            xi[j] += fine[(k * r + q) * d + j];
                        }
                    }
                    for (double& v : xi) {
                        v *= scale;
                    }
                    st.advance(cur, xi, etas[e], next);
                    for (double v : next) {
                        if (!std::isfinite(v)) {
                            throw DivergenceError(k, "coarse path diverged");
                        }
                    }
                    cur.swap(next);
                }
                double dist = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    dist += (cur[j] - x_ref[j]) * (cur[j] - x_ref[j]);
                }
                err[(p * ne + e) * 2 + static_cast<std::size_t>(s)] = std::sqrt(dist);
                ends[s] = cur;
            }
            if (ends[0] != ends[1]) {
                same[p] = 0;
            }
        }
    });

    StrongOrderResult out;
    out.etas = etas;
    out.eta_ref = eta_ref;
    out.identical_paths = std::all_of(same.begin(), same.end(), [](unsigned char c) { return c != 0; });
    for (std::size_t e = 0; e < ne; ++e) {
        for (int s = 0; s < 2; ++s) {
            std::vector<double> col(opts.paths);
            for (std::size_t p = 0; p < opts.paths; ++p) {
                col[p] = err[(p * ne + e) * 2 + static_cast<std::size_t>(s)];
            }
            const double mu = stats::mean(col);
            const double se = std::sqrt(stats::variance(col) / static_cast<double>(opts.paths));
            (s == 0 ? out.error_em : out.error_milstein).push_back(mu);
            (s == 0 ? out.stderr_em : out.stderr_milstein).push_back(se);
        }
    }
    out.slope_em = stats::log_log_slope(out.etas, out.error_em);
    out.slope_milstein = stats::log_log_slope(out.etas, out.error_milstein);
    return out;
}

// ---------------------------------------------------------------------------
// Lyapunov drift condition

/// Constants of the one-step drift bound for V(x) = 1 + |x|^2.
struct DriftConstants {
    double c2 = 0.0;
    double c3 = 0.0;
    /// B = {|x|^2 <= 4 C3 / K1 - 1}; this is the right-hand side.
    double b_radius_sq = 0.0;
};

inline DriftConstants drift_constants(const ModelConstants& k)
{
    if (!k.consistent()) {
        throw Error(ErrorCode::ConstantsMissing, "model constants are missing or inconsistent (K1 must be > 0)");
    }
    DriftConstants c;
    const double b0sq = k.b0_norm * k.b0_norm;
    const double ssq = k.sigma_sup * k.sigma_sup;
    c.c2 = k.dissipativity + 2.0 * k.offset + b0sq / k.dissipativity + ssq;
    c.c3 = c.c2 + 2.0 * b0sq + 0.5 * ssq * k.grad_sigma_sup * k.grad_sigma_sup;
    c.b_radius_sq = 4.0 * c.c3 / k.dissipativity - 1.0;
    return c;
}

struct DriftProbe {
    std::vector<double> x;
    double lhs = 0.0;     // Monte Carlo E[V(theta_1) | theta_0 = x]
    double stderr = 0.0;
    double rhs = 0.0;     // (1 - K1 eta / 4) V(x) + C3 eta 1_B(x)
    double margin = 0.0;  // rhs - lhs
    bool in_b = false;
    bool pass = false;
};

struct DriftReport {
    double eta = 0.0;
    std::size_t inner = 0;
    double slack = 3.0;
    DriftConstants constants;
    std::vector<DriftProbe> probes;
    bool pass = false;
};

/// Probe states t (1, ..., 1) for `count` values of t evenly spaced on [lo, hi].
inline std::vector<std::vector<double>> diagonal_probes(std::size_t dim, double lo, double hi, std::size_t count)
{
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < count; ++i) {
        const double t = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
        out.emplace_back(dim, t);
    }
    return out;
}

/// Check E[V(theta_1) | theta_0 = x] <= rhs(x) + slack * stderr at every
/// probe, with `inner` one-step Milstein samples per probe. Probe i draws
/// its normals from the Sampling lane of replica i.
inline DriftReport drift_condition_check(const SdeModel& model, double eta,
                                         const std::vector<std::vector<double>>& states, std::size_t inner,
                                         std::uint64_t seed, double slack = 3.0, std::size_t workers = 1)
{
    DriftReport rep;
    rep.constants = drift_constants(model.constants);
    if (!(eta > 0.0 && eta < 1.0)) {
        throw Error(ErrorCode::InvalidParams, "eta must lie in (0, 1)");
    }
    if (inner < 2) {
        throw Error(ErrorCode::TooFewSamples, "drift check needs at least 2 inner samples");
    }
    rep.eta = eta;
    rep.inner = inner;
    rep.slack = slack;
    const std::size_t d = model.dimension;
    const double k1 = model.constants.dissipativity;
    rep.probes.resize(states.size());
    parallel_for(states.size(), workers, [&](std::size_t i) {
        const auto& x = states[i];
        if (x.size() != d) {
            throw Error(ErrorCode::DimensionMismatch, "probe state has the wrong dimension");
        }
        const NoiseStream noise(seed, i, d, NoiseLane::Sampling);
        Stepper st(model, Scheme::Milstein);
        std::vector<double> xi(d);
        std::vector<double> next(d);
        NeumaierSum s1;
        NeumaierSum s2;
        for (std::size_t n = 0; n < inner; ++n) {
            noise.fill(n, xi);
            st.advance(x, xi, eta, next);
            double v = 1.0;
            for (double e : next) {
                v += e * e;
            }
            if (!std::isfinite(v)) {
                throw Error(ErrorCode::NonFiniteEvaluation, "one-step sample not finite");
            }
            s1.add(v);
            s2.add(v * v);
        }
        const auto nn = static_cast<double>(inner);
        DriftProbe& p = rep.probes[i];
        p.x = x;
        p.lhs = s1.value() / nn;
        const double var = std::max(0.0, (s2.value() - nn * p.lhs * p.lhs) / (nn - 1.0));
        p.stderr = std::sqrt(var / nn);
        double vx = 1.0;
        for (double e : x) {
            vx += e * e;
        }
        p.in_b = vx - 1.0 <= rep.constants.b_radius_sq;
        p.rhs = (1.0 - 0.25 * k1 * eta) * vx + (p.in_b ? rep.constants.c3 * eta : 0.0);
        p.margin = p.rhs - p.lhs;
        p.pass = p.lhs <= p.rhs + slack * p.stderr;
    });
    rep.pass = std::all_of(rep.probes.begin(), rep.probes.end(), [](const DriftProbe& p) { return p.pass; });
    return rep;
}

// ---------------------------------------------------------------------------
// variance bridge between pi and pi_eta

struct BridgeOptions {
    std::uint64_t chain_len = 10'000'000;
    double burn_in = 0.1;
    std::size_t batches = 50;
    std::uint64_t seed = 1;
    std::vector<double> theta0{0.0};
    std::size_t workers = 1;
    /// Add psi'(theta) sigma xi / sqrt(eta) + 1/2 psi''(theta) sigma^2 (xi^2 - 1)
    /// per step, psi solving the Stein equation for (sigma f')^2. Both terms
    /// have zero conditional mean, so pi_eta is unchanged and only the
    /// batch-means error shrinks.
    bool control_variate = true;
};

struct BridgeRow {
    double eta = 0.0;
    double pi_value = 0.0;  // pi((sigma f')^2) by quadrature
    double pi_eta = 0.0;    // long-chain average after burn-in
    double gap = 0.0;
    double stderr = 0.0;    // batch means
    double pi_eta_plain = 0.0;  // without the control variate
    double stderr_plain = 0.0;
    std::uint64_t clamped = 0;
};

struct BridgeResult {
    std::vector<BridgeRow> rows;
    double slope = kNaN;
    bool monotone = false;
    bool slope_skipped = false;
    std::string skip_reason;
    bool control_variate = false;
    double cv_residual = 0.0;  // sup residual of the psi solve
};

/// Gap |pi((sigma f')^2) - pi_eta((sigma f')^2)| per step size, each pi_eta
/// from one long Milstein chain. Every step size reuses the normals of
/// replica 0.
inline BridgeResult variance_bridge(const SdeModel& model, const SteinSolution& stein,
                                    std::vector<double> etas, const BridgeOptions& opts = {})
{
    if (model.dimension != 1) {
        throw Error(ErrorCode::NotOneDimensional, "variance bridge needs d = 1");
    }
    if (etas.size() < 3) {
        throw Error(ErrorCode::InsufficientEtaGrid, "variance bridge needs at least 3 step sizes");
    }
    if (opts.batches < 2 || !(opts.burn_in >= 0.0 && opts.burn_in < 1.0)) {
        throw Error(ErrorCode::InvalidParams, "need >= 2 batches and burn-in in [0, 1)");
    }
    const std::uint64_t skip = static_cast<std::uint64_t>(opts.burn_in * static_cast<double>(opts.chain_len));
    const std::uint64_t kept = opts.chain_len - skip;
    if (kept < opts.batches) {
        throw Error(ErrorCode::TooFewSamples, "chain too short for the batch count");
    }
    std::sort(etas.begin(), etas.end(), std::greater<>());
    BridgeResult out;
    out.rows.resize(etas.size());
    std::vector<double> lo(etas.size());
    std::vector<double> hi(etas.size());
    const std::uint64_t batch_len = kept / opts.batches;

    auto sigma_at = [&](double x) {
        double sg = 0.0;
        model.diffusion(std::span<const double>(&x, 1), std::span<double>(&sg, 1));
        return sg;
    };
    std::optional<SteinSolution> psi;
    std::optional<MonotoneCubic> psi_d2;
    if (opts.control_variate) {
        const DensityGrid dens = invariant_density_1d(model, stein.x.back(), stein.x.size() - 1);
        TestFunction g;
        g.id = "sigma_df_sq";
        g.value = [&](double x) {
            const double v = sigma_at(x) * stein.df_interp(x);
            return v * v;
        };
        psi = solve_stein_1d(model, g, dens, SteinOptions{std::numeric_limits<double>::infinity()});
        psi_d2.emplace(psi->x.front(), psi->x[1] - psi->x[0], psi->d2f);
        out.control_variate = true;
        out.cv_residual = psi->residual_sup;
    }

    parallel_for(etas.size(), opts.workers, [&](std::size_t e) {
        ChainConfig cfg;
        cfg.eta = etas[e];
        cfg.steps = opts.chain_len;
        const NoiseStream noise(opts.seed, 0, 1);
        const double inv_sqrt_eta = 1.0 / std::sqrt(etas[e]);
        std::vector<NeumaierSum> batch(opts.batches);
        std::vector<NeumaierSum> batch_cv(opts.batches);
        NeumaierSum total;
        NeumaierSum total_cv;
        std::uint64_t clamped = 0;
        double gmin = std::numeric_limits<double>::infinity();
        double gmax = -gmin;
        simulate_chain(model, cfg, opts.theta0, noise, [&](const StepView& st) {
            if (st.k < skip) {
                return;
            }
            bool off = false;
            const double g = st.stepper.sigma()[0] * stein.df_interp(st.theta[0], off);
            clamped += off ? 1 : 0;
            const double obs = g * g;
            gmin = std::min(gmin, obs);
            gmax = std::max(gmax, obs);
            const std::uint64_t b = std::min<std::uint64_t>((st.k - skip) / batch_len, opts.batches - 1);
            batch[b].add(obs);
            total.add(obs);
            if (psi) {
                const double x = st.theta[0];
                const double sg = st.stepper.sigma()[0];
                const double xi = st.xi[0];
                bool psi_off = false;
                const double cv = obs + psi->df_interp(x, psi_off) * sg * xi * inv_sqrt_eta
                                  + 0.5 * (*psi_d2)(x) * sg * sg * (xi * xi - 1.0);
                batch_cv[b].add(cv);
                total_cv.add(cv);
            }
        });
        BridgeRow& row = out.rows[e];
        row.eta = etas[e];
        row.pi_value = stein.asymptotic_variance;
        row.clamped = clamped;
        auto batch_stderr = [&](const std::vector<NeumaierSum>& sums) {
            std::vector<double> means(opts.batches);
            for (std::size_t b = 0; b < opts.batches; ++b) {
                const std::uint64_t len = b + 1 == opts.batches ? kept - batch_len * (opts.batches - 1) : batch_len;
                means[b] = sums[b].value() / static_cast<double>(len);
            }
            return std::sqrt(stats::variance(means) / static_cast<double>(opts.batches));
        };
        row.pi_eta_plain = total.value() / static_cast<double>(kept);
        row.stderr_plain = batch_stderr(batch);
        if (psi) {
            row.pi_eta = total_cv.value() / static_cast<double>(kept);
            row.stderr = batch_stderr(batch_cv);
        } else {
            row.pi_eta = row.pi_eta_plain;
            row.stderr = row.stderr_plain;
        }
        row.gap = std::abs(row.pi_value - row.pi_eta);
        lo[e] = gmin;
        hi[e] = gmax;
    });

    out.monotone = true;
    for (std::size_t e = 1; e < etas.size(); ++e) {
        out.monotone = out.monotone && out.rows[e].gap < out.rows[e - 1].gap;
    }
    const double spread = *std::max_element(hi.begin(), hi.end()) - *std::min_element(lo.begin(), lo.end());
    std::vector<double> gaps;
    for (const auto& r : out.rows) {
        gaps.push_back(r.gap);
    }
    if (spread <= 1e-9 * std::max(1.0, std::abs(stein.asymptotic_variance))) {
        out.slope_skipped = true;
        out.skip_reason = "observable (sigma f')^2 is constant on the visited states";
    } else if (std::any_of(gaps.begin(), gaps.end(), [](double g) { return !(g > 0.0); })) {
        out.slope_skipped = true;
        out.skip_reason = "a gap is exactly zero";
    } else {
        out.slope = stats::log_log_slope(etas, gaps);
    }
    return out;
}

// ---------------------------------------------------------------------------
// concentration curves

enum class ConcentrationStatistic { YDev, VYDev, RRem, BEnergy };

inline std::string_view to_string(ConcentrationStatistic s)
{
    switch (s) {
    case ConcentrationStatistic::YDev: return "Y_dev";
    case ConcentrationStatistic::VYDev: return "VY_dev";
    case ConcentrationStatistic::RRem: return "R_rem";
    case ConcentrationStatistic::BEnergy: return "b_energy";
    }
    return "unknown";
}

inline ConcentrationStatistic concentration_statistic_from(const std::string& name)
{
    for (auto s : {ConcentrationStatistic::YDev, ConcentrationStatistic::VYDev, ConcentrationStatistic::RRem,
                   ConcentrationStatistic::BEnergy}) {
        if (to_string(s) == name) {
            return s;
        }
    }
    throw Error(ErrorCode::InvalidParams, "unknown concentration statistic '" + name + "'");
}

/// Non-negative per-replica values whose upper tail is examined:
///   Y_dev = |y - mean y|, VY_dev = |v - y|, R_rem = |r_eta|, b_energy.
inline std::vector<double> concentration_samples(const ReplicaSampleSet& set, ConcentrationStatistic which)
{
    switch (which) {
    case ConcentrationStatistic::YDev: {
        auto y = set.column([](const ChainStats& c) { return c.y; });
        const double mu = stats::mean(y);
        for (double& e : y) {
            e = std::abs(e - mu);
        }
        return y;
    }
    case ConcentrationStatistic::VYDev:
        return set.column([](const ChainStats& c) { return std::abs(c.v - c.y); });
    case ConcentrationStatistic::RRem:
        return set.column([](const ChainStats& c) { return std::abs(c.r_eta); });
    case ConcentrationStatistic::BEnergy:
        return set.column([](const ChainStats& c) { return c.b_energy; });
    }
    return {};
}

/// Grid median + k sd / 2, k = 0 .. count-1, spanning the bulk and the
/// upper tail of `values`.
inline std::vector<double> spread_grid(std::span<const double> values, std::size_t count = 7)
{
    const double med = stats::median(std::vector<double>(values.begin(), values.end()));
    const double sd = std::sqrt(stats::variance(values));
    std::vector<double> ys;
    for (std::size_t k = 0; k < count; ++k) {
        ys.push_back(med + 0.5 * sd * static_cast<double>(k));
    }
    return ys;
}

struct ConcentrationPoint {
    double y = 0.0;
    double tail = 0.0;  // P(stat > y)
    std::size_t hits = 0;
    bool resolved = true;
};

struct ConcentrationCurve {
    std::string statistic;
    std::size_t n = 0;
    std::vector<ConcentrationPoint> points;
    bool degenerate = false;
    bool strictly_decreasing = false;
    double linear_rate = kNaN;     // slope of -log P against y
    double quadratic_rate = kNaN;  // slope of -log P against y^2
    std::string dominant;          // "linear" or "quadratic" by residual
    bool pass = false;
};

struct ConcentrationOptions {
    std::size_t min_hits = 50;
    bool mark_unresolved = false;
};

/// Empirical tail curve of non-negative `values` over the ascending grid
/// `ys`. Only the shape is judged: strict decay over resolved points and
/// positive fitted rates.
inline ConcentrationCurve concentration_curve(const std::string& statistic, std::span<const double> values,
                                              std::vector<double> ys, const ConcentrationOptions& opts = {})
{
    std::sort(ys.begin(), ys.end());
    ConcentrationCurve c;
    c.statistic = statistic;
    std::vector<double> sorted;
    for (double v : values) {
        if (std::isfinite(v)) {
            sorted.push_back(v);
        }
    }
    if (sorted.empty()) {
        throw Error(ErrorCode::TooFewSamples, "no finite samples for '" + statistic + "'");
    }
    std::sort(sorted.begin(), sorted.end());
    c.n = sorted.size();
    c.degenerate = sorted.back() == sorted.front();
    std::vector<double> fy;
    std::vector<double> fy2;
    std::vector<double> flog;
    for (double y : ys) {
        ConcentrationPoint p;
        p.y = y;
        p.hits = static_cast<std::size_t>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), y));
        p.tail = static_cast<double>(p.hits) / static_cast<double>(c.n);
        p.resolved = p.hits >= opts.min_hits;
        if (!p.resolved && !c.degenerate && !opts.mark_unresolved) {
            throw Error(ErrorCode::InsufficientResolution,
                        statistic + ": only " + std::to_string(p.hits) + " samples above y = " + std::to_string(y));
        }
        if (p.resolved && !c.degenerate) {
            fy.push_back(y);
            fy2.push_back(y * y);
            flog.push_back(-std::log(p.tail));
        }
        c.points.push_back(p);
    }
    if (c.degenerate || fy.size() < 2) {
        return c;
    }
    c.strictly_decreasing = true;
    for (std::size_t i = 1; i < flog.size(); ++i) {
        c.strictly_decreasing = c.strictly_decreasing && flog[i] > flog[i - 1];
    }
    const auto lin = stats::fit_line(fy, flog);
    c.linear_rate = lin.slope;
    double quad_sse = kNaN;
    try {
        const auto quad = stats::fit_line(fy2, flog);
        c.quadratic_rate = quad.slope;
        quad_sse = quad.sse;
    } catch (const Error&) {
        // y^2 collapses when the grid is symmetric about 0; keep the linear fit.
    }
    c.dominant = (std::isfinite(quad_sse) && quad_sse < lin.sse) ? "quadratic" : "linear";
    c.pass = c.strictly_decreasing && c.linear_rate > 0.0 &&
             (!std::isfinite(c.quadratic_rate) || c.quadratic_rate > 0.0);
    return c;
}

} // namespace mmdp
