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

// Acceptance suite: one PASS/FAIL line per criterion. Tolerances and seeds
// are fixed here; nothing is read from the environment except the worker
// hint, which does not change any result.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mmdp/mmdp.hpp"

using namespace mmdp;

namespace {

constexpr std::uint64_t kSeed = 1;

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string sci(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

SteinSolution stein(const SdeModel& m, const TestFunction& h, double X = 0.0, std::size_t n = 1u << 16)
{
    return solve_stein_1d(m, h, X > 0.0 ? invariant_density_1d(m, X, n) : invariant_density_1d(m));
}

// Samples shared between criteria.
struct Shared {
    std::size_t workers = 0;
    std::optional<ReplicaSampleSet> clt_set;
    std::optional<ReplicaSampleSet> tail_set;
    std::optional<ReplicaSampleSet> tanh_set;
    std::vector<const ReplicaSampleSet*> all() const
    {
        std::vector<const ReplicaSampleSet*> v;
        for (const auto* s : {&clt_set, &tail_set, &tanh_set}) {
            if (*s) {
                v.push_back(&**s);
            }
        }
        return v;
    }
};

Verdict stein_oracle()
{
    const auto ou = builtin_model("ou");
    const auto s = stein(ou, builtin_test_function("identity"), 10.0);
    double worst = 0.0;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (std::abs(s.x[i]) <= 8.0) {
            worst = std::max(worst, std::abs(s.df[i] + 1.0));
        }
    }
    const double var_err = std::abs(s.asymptotic_variance - 1.0);
    return {worst <= 1e-8 && var_err <= 1e-6,
            "max|f'+1| on [-8,8] = " + sci(worst) + " (<= 1e-8), |pi((sigma f')^2) - 1| = " + sci(var_err) +
                " (<= 1e-6)"};
}

Verdict stein_residuals()
{
    bool pass = true;
    std::ostringstream d;
    for (const auto& mid : {"ou", "tanh1d"}) {
        const auto m = builtin_model(mid);
        const double X = default_truncation(m);
        for (const auto& hid : builtin_test_function_ids()) {
            if (hid == "constant") {
                continue;
            }
            const auto h = builtin_test_function(hid);
            const double at16 = stein(m, h).residual_sup;
            bool halving = true;
            double prev = INFINITY;
            double last = 0.0;
            double floor = 0.0;
            for (std::size_t n = 1u << 12; n <= (1u << 18); n *= 2) {
                const auto s = solve_stein_1d(m, h, invariant_density_1d(m, X, n), SteinOptions{1.0});
                floor = std::max(1e-12, stein_residual_floor(m, s));
                if (prev > floor && s.residual_sup > std::max(prev / 2.0, floor)) {
                    halving = false;
                }
                prev = s.residual_sup;
                last = s.residual_sup;
            }
            const bool ok = at16 <= 1e-6 && halving;
            pass = pass && ok;
            d << ' ' << mid << '/' << hid << '=' << sci(at16) << (ok ? "" : "!");
            if (!halving) {
                d << "(no halving; 2^18 " << sci(last) << ", floor " << sci(floor) << ")";
            }
        }
    }
    return {pass, "residual at 2^16 (<= 1e-6), halving to the rounding floor:" + d.str()};
}

Verdict scheme_degeneracy()
{
    bool pass = true;
    std::size_t compared = 0;
    for (const auto& m : {builtin_model("ou"), builtin_model("tanh1d", {{"s1", 0.0}})}) {
        for (std::uint64_t seed : {kSeed, std::uint64_t{987654321}}) {
            ChainConfig cfg;
            cfg.eta = 0.01;
            cfg.steps = 1'000'000;
            cfg.initial = InitialCondition::fixed({0.5});
            cfg.scheme = Scheme::EulerMaruyama;
            std::vector<double> em;
            em.reserve(*cfg.steps);
            simulate_chain(m, cfg, seed, 0, [&](const StepView& v) { em.push_back(v.next[0]); });
            cfg.scheme = Scheme::Milstein;
            std::size_t same = 0;
            simulate_chain(m, cfg, seed, 0, [&](const StepView& v) {
                same += std::memcmp(&em[v.k], v.next.data(), sizeof(double)) == 0 ? 1 : 0;
            });
            pass = pass && same == em.size();
            compared += em.size();
        }
    }
    return {pass, std::to_string(compared) + " states compared bitwise on ou and constant-sigma tanh1d, 2 seeds each"};
}

Verdict strong_order(const Shared& sh)
{
    StrongOrderOptions opts;
    opts.paths = 512;
    opts.seed = kSeed;
    opts.eta_ref = std::ldexp(1.0, -14);
    opts.workers = sh.workers;
    std::vector<double> etas;
    for (int k = 5; k <= 10; ++k) {
        etas.push_back(std::ldexp(1.0, -k));
    }
    const auto m = builtin_model("tanh1d", {{"c", 0.0}});
    const auto r = strong_order_regression(m, etas, opts);
    const bool mil = r.slope_milstein >= 0.85 && r.slope_milstein <= 1.15;
    const bool em = r.slope_em >= 0.4 && r.slope_em <= 0.65;
    return {mil && em, "slope Milstein = " + sci(r.slope_milstein) + " in [0.85, 1.15], EM = " + sci(r.slope_em) +
                           " in [0.4, 0.65]"};
}

Verdict clt(Shared& sh)
{
    const auto ou = builtin_model("ou");
    const auto s = stein(ou, builtin_test_function("identity"));
    ChainConfig cfg;
    cfg.eta = 0.02;
    sh.clt_set = run_replicas(ou, s, cfg, 2000, kSeed, sh.workers, "clt");
    const auto& set = *sh.clt_set;
    const auto r = clt_check(set.column([](const ChainStats& c) { return c.w; }));
    const double v = stats::variance(set.column([](const ChainStats& c) { return c.centred(); }));
    const bool ks = r.ks_statistic < 1.628 / std::sqrt(2000.0);
    const bool var = v >= 0.85 * s.asymptotic_variance && v <= 1.15 * s.asymptotic_variance;
    return {ks && var && set.m == 2500 && set.failures() == 0,
            "KS = " + sci(r.ks_statistic) + " (< 0.0364), var of centred sum = " + sci(v) + " in [0.85, 1.15] x " +
                sci(s.asymptotic_variance) + ", failures " + std::to_string(set.failures())};
}

Verdict tails(Shared& sh)
{
    const auto ou = builtin_model("ou");
    const auto s = stein(ou, builtin_test_function("identity"));
    ChainConfig cfg;
    cfg.eta = 0.05;
    cfg.initial = InitialCondition::gaussian({0.0}, std::sqrt(0.5));
    sh.tail_set = run_replicas(ou, s, cfg, 100'000, kSeed, sh.workers, "tails");
    const auto table = tail_ratio_table(*sh.tail_set, {1.0, 1.5, 2.0});
    bool pass = sh.tail_set->m == 400;
    std::ostringstream d;
    for (const auto& row : table.rows) {
        const bool ok = row.ratio >= 0.85 && row.ratio <= 1.18;
        pass = pass && ok;
        d << ' ' << row.statistic << '@' << row.x << '=' << sci(row.ratio) << " [" << sci(row.ci_lo) << ','
          << sci(row.ci_hi) << ']' << (ok ? "" : "!");
    }
    return {pass, "ratios in [0.85, 1.18] (95% CI):" + d.str()};
}

Verdict drift()
{
    bool pass = true;
    std::size_t probes = 0;
    double min_margin = INFINITY;
    for (const auto& id : builtin_model_ids()) {
        const auto m = builtin_model(id);
        for (double eta : {0.05, 0.01}) {
            const auto rep = drift_condition_check(m, eta, diagonal_probes(m.dimension, -10.0, 10.0, 50), 100'000,
                                                   kSeed, 3.0);
            pass = pass && rep.pass && rep.probes.size() == 50;
            probes += rep.probes.size();
            for (const auto& p : rep.probes) {
                min_margin = std::min(min_margin, p.margin / std::max(p.stderr, 1e-300));
            }
        }
    }
    const auto origin = drift_condition_check(builtin_model("ou"), 0.01, {{0.0}}, 100'000, kSeed, 3.0);
    const auto& p = origin.probes[0];
    const bool closed = std::abs(p.lhs - 1.01) <= 3.0 * p.stderr;
    return {pass && closed, std::to_string(probes) + " probes pass, min margin " + sci(min_margin) +
                                " stderr; OU origin lhs = " + sci(p.lhs) + " vs 1.01 (" +
                                sci(std::abs(p.lhs - 1.01) / p.stderr) + " stderr)"};
}

Verdict bridge(const Shared& sh)
{
    const auto th = builtin_model("tanh1d");
    const auto s = stein(th, builtin_test_function("gauss"));
    BridgeOptions opts;
    opts.seed = kSeed;
    opts.workers = sh.workers;
    const auto r = variance_bridge(th, s, {0.2, 0.1, 0.05, 0.025}, opts);
    std::ostringstream d;
    for (const auto& row : r.rows) {
        d << ' ' << row.eta << ':' << sci(row.gap) << "+-" << sci(row.stderr);
    }
    const bool slope = !r.slope_skipped && r.slope >= 0.6;
    double plain = 0.0;
    for (const auto& row : r.rows) {
        plain = std::max(plain, row.stderr_plain);
    }
    return {r.monotone && slope,
            std::string("gap monotone ") + (r.monotone ? "yes" : "no") + ", slope = " + sci(r.slope) +
                " (>= 0.6); control-variate gaps" + d.str() + "; plain stderr up to " + sci(plain)};
}

Verdict decomposition(const Shared& sh)
{
    const auto ou = builtin_model("ou");
    const auto s = stein(ou, builtin_test_function("identity"));
    const auto r = decomposition_residual_scaling(ou, s, {0.1, 0.05, 0.025, 0.0125}, 200, kSeed, {}, sh.workers);
    std::ostringstream d;
    for (std::size_t i = 0; i < r.etas.size(); ++i) {
        d << ' ' << r.etas[i] << ':' << sci(r.median_abs_r[i]);
    }
    return {r.slope >= 0.3 && r.slope <= 0.7, "slope = " + sci(r.slope) + " in [0.3, 0.7]; median |R|" + d.str()};
}

Verdict identity_and_determinism(const Shared& sh)
{
    double worst = 0.0;
    std::size_t chains = 0;
    for (const auto* set : sh.all()) {
        for (const auto& c : set->successes()) {
            worst = std::max(worst, std::abs(c.v - c.v_noise) / c.v_noise);
            ++chains;
        }
    }
    // Re-run the CLT experiment on a different worker count.
    const auto ou = builtin_model("ou");
    const auto s = stein(ou, builtin_test_function("identity"));
    ChainConfig cfg;
    cfg.eta = 0.02;
    const auto again = run_replicas(ou, s, cfg, 2000, kSeed, sh.workers == 1 ? 3 : 1, "clt");
    const bool same = sh.clt_set && io::to_csv(again) == io::to_csv(*sh.clt_set);
    return {worst <= 1e-12 && same && chains > 0,
            "max relative V gap " + sci(worst) + " over " + std::to_string(chains) +
                " chains (<= 1e-12); re-run CSV byte-identical: " + (same ? "yes" : "no")};
}

Verdict concentration(Shared& sh)
{
    const auto th = builtin_model("tanh1d");
    const auto s = stein(th, builtin_test_function("gauss"));
    ChainConfig cfg;
    cfg.eta = 0.05;
    sh.tanh_set = run_replicas(th, s, cfg, 100'000, kSeed, sh.workers, "curves");
    bool pass = true;
    std::ostringstream d;
    auto judge = [&](const char* tag, const ReplicaSampleSet& set, ConcentrationStatistic which) {
        const auto values = concentration_samples(set, which);
        ConcentrationOptions opts;
        opts.mark_unresolved = true;
        const auto c = concentration_curve(std::string(to_string(which)), values, spread_grid(values), opts);
        std::size_t resolved = 0;
        for (const auto& p : c.points) {
            resolved += p.resolved ? 1 : 0;
        }
        pass = pass && c.pass;
        d << ' ' << tag << ':' << to_string(which) << (c.pass ? "" : "!") << "(rate " << sci(c.linear_rate) << ", "
          << resolved << " pts)";
    };
    for (auto w : {ConcentrationStatistic::YDev, ConcentrationStatistic::VYDev, ConcentrationStatistic::RRem,
                   ConcentrationStatistic::BEnergy}) {
        judge("tanh1d", *sh.tanh_set, w);
    }
    // Y is constant for the OU pair, so only the other three apply there.
    if (sh.tail_set) {
        for (auto w : {ConcentrationStatistic::VYDev, ConcentrationStatistic::RRem, ConcentrationStatistic::BEnergy}) {
            judge("ou", *sh.tail_set, w);
        }
    } else {
        pass = false;
    }
    return {pass, "strict decay and positive rates:" + d.str()};
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Acceptance suite for the Milstein statistics library"};
    std::size_t workers = 0;
    std::vector<int> only;
    app.add_option("--threads", workers, "worker hint (0 = all cores); results do not depend on it");
    app.add_option("--only", only, "run only these criteria (numbers)");
    CLI11_PARSE(app, argc, argv);

    Shared sh;
    sh.workers = workers;
    struct Criterion {
        int id;
        const char* name;
        double budget_s;
        std::function<Verdict()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "Stein oracle exactness", 1.0, [] { return stein_oracle(); }},
        {2, "Stein residual certification", 5.0, [] { return stein_residuals(); }},
        {3, "scheme degeneracy", 1.0, [] { return scheme_degeneracy(); }},
        {4, "strong order", 60.0, [&] { return strong_order(sh); }},
        {5, "CLT", 30.0, [&] { return clt(sh); }},
        {6, "moderate-deviation ratios", 120.0, [&] { return tails(sh); }},
        {7, "drift condition", 20.0, [] { return drift(); }},
        {8, "variance bridge", 120.0, [&] { return bridge(sh); }},
        {9, "decomposition residual", 60.0, [&] { return decomposition(sh); }},
        {10, "V identity and determinism", 60.0, [&] { return identity_and_determinism(sh); }},
        {11, "concentration shapes", 120.0, [&] { return concentration(sh); }},
    };
    int failed = 0;
    int ran = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) {
            continue;
        }
        ++ran;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.budget_s;
        const bool pass = v.pass && in_time;
        failed += pass ? 0 : 1;
        std::printf("%s %2d %s: %s [%.1f s, budget %.0f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.name,
                    v.detail.c_str(), secs, c.budget_s, in_time ? "" : ", over budget");
        std::fflush(stdout);
    }
    std::printf("%d/%d criteria passed\n", ran - failed, ran);
    return failed == 0 ? 0 : 1;
}
