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
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "config.hpp"

namespace mdp_cli {
namespace {

struct Outcome {
    std::string csv;
    json results = json::object();
    json checks = json::object();
    json plan = json::object();
};

json vec(const std::vector<double>& v)
{
    json a = json::array();
    for (double e : v) {
        a.push_back(std::isfinite(e) ? json(e) : json(nullptr));
    }
    return a;
}

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void require_1d(const Experiment& e, const Reader& r, const std::string& cmd)
{
    if (e.model.dimension != 1) {
        r.fail("model.id", "command '" + cmd + "' needs a one-dimensional model");
    }
}

double single_eta(const Experiment& e, const Reader& r, const std::string& cmd)
{
    if (e.etas.size() != 1) {
        r.fail("eta", "command '" + cmd + "' takes a single eta");
    }
    return e.etas[0];
}

mmdp::SteinSolution build_stein(const Experiment& e)
{
    const auto density = mmdp::invariant_density_1d(e.model, e.density);
    return mmdp::solve_stein_1d(e.model, e.h, density, e.stein);
}

json stein_json(const mmdp::SteinSolution& s)
{
    return {{"pi_h", s.pi_h},
            {"residual_sup", s.residual_sup},
            {"asymptotic_variance", s.asymptotic_variance},
            {"truncation", s.upper()},
            {"grid_intervals", s.x.size() - 1},
            {"h_bounded", s.h_bounded},
            {"caveat", s.h_bounded ? "" : "h is not in C_b^2; theorem hypotheses are not met"}};
}

json plan_chains(const Experiment& e, const std::vector<double>& etas)
{
    json per = json::array();
    double total = 0.0;
    for (double eta : etas) {
        const auto m = e.chain(eta).resolved_steps();
        per.push_back({{"eta", eta}, {"m", m}});
        total += static_cast<double>(m) * static_cast<double>(e.replicas);
    }
    return {{"chains", per}, {"replicas", e.replicas}, {"total_steps", total}};
}

Outcome cmd_validate(const Experiment& e, const Reader& r, bool dry)
{
    mmdp::SamplingSpec spec;
    spec.lower = r.numbers("validate.lower");
    spec.upper = r.numbers("validate.upper");
    spec.points = r.integer("validate.points", 1);
    spec.pairs = r.integer("validate.pairs");
    spec.seed = e.seed;
    Outcome o;
    if (dry) {
        o.plan = {{"points", spec.points}, {"pairs", spec.pairs}, {"dimension", e.model.dimension}};
        return o;
    }
    const auto rep = mmdp::validate_assumptions(e.model, spec);
    const auto& k = e.model.constants;
    std::ostringstream os;
    os << "check,ok,observed,declared,worst_margin\n";
    auto row = [&](const char* name, bool ok, double observed, double declared, double margin) {
        os << name << ',' << (ok ? 1 : 0) << ',' << mmdp::io::fmt(observed) << ',' << mmdp::io::fmt(declared) << ','
           << mmdp::io::fmt(margin) << '\n';
    };
    row("lipschitz", rep.lipschitz_ok, rep.lipschitz_estimate, k.lipschitz, rep.worst_lipschitz.margin);
    row("dissipativity", rep.dissipativity_ok, rep.dissipativity_estimate, k.dissipativity,
        rep.worst_dissipativity.margin);
    row("one_point", rep.one_point_ok, mmdp::kNaN, k.offset, rep.worst_one_point.margin);
    row("positivity", rep.positivity_ok, rep.min_sigma_eigenvalue, 0.0, rep.worst_positivity.margin);
    row("sigma_bound", rep.sigma_bound_ok, rep.max_sigma_norm, k.sigma_sup, k.sigma_sup - rep.max_sigma_norm);
    row("grad_sigma_bound", rep.grad_sigma_bound_ok, rep.max_grad_sigma_norm, k.grad_sigma_sup,
        k.grad_sigma_sup - rep.max_grad_sigma_norm);
    o.csv = os.str();
    o.checks = {{"constants_ok", rep.constants_ok},     {"lipschitz_ok", rep.lipschitz_ok},
                {"dissipativity_ok", rep.dissipativity_ok}, {"one_point_ok", rep.one_point_ok},
                {"positivity_ok", rep.positivity_ok},   {"symmetry_ok", rep.symmetry_ok},
                {"sigma_bound_ok", rep.sigma_bound_ok}, {"grad_sigma_bound_ok", rep.grad_sigma_bound_ok}};
    o.results = {{"multiplicative_noise", rep.multiplicative_noise},
                 {"min_sigma_eigenvalue", num(rep.min_sigma_eigenvalue)},
                 {"lipschitz_estimate", num(rep.lipschitz_estimate)},
                 {"dissipativity_estimate", num(rep.dissipativity_estimate)},
                 {"worst_lipschitz_pair", {vec(rep.worst_lipschitz.x), vec(rep.worst_lipschitz.y)}},
                 {"worst_dissipativity_pair", {vec(rep.worst_dissipativity.x), vec(rep.worst_dissipativity.y)}}};
    return o;
}

Outcome cmd_stein(const Experiment& e, const Reader& r, bool dry)
{
    require_1d(e, r, "stein");
    Outcome o;
    if (dry) {
        o.plan = {{"grid_intervals", e.density.intervals}, {"truncation", e.density.truncation > 0 ? json(e.density.truncation) : json("auto")}};
        return o;
    }
    const auto s = build_stein(e);
    o.csv = mmdp::io::to_csv(s);
    o.results = stein_json(s);
    o.results["derivative_sups"] = {s.derivative_sups[0], s.derivative_sups[1], s.derivative_sups[2]};
    o.checks = {{"residual_within_tolerance", s.residual_sup <= e.stein.tolerance}};
    return o;
}

bool v_identity(const mmdp::ReplicaSampleSet& set, double& worst)
{
    worst = 0.0;
    for (const auto& c : set.successes()) {
        worst = std::max(worst, std::abs(c.v - c.v_noise) / c.v);
    }
    return worst <= 1e-12;
}

json failures_json(const mmdp::ReplicaSampleSet& set)
{
    json a = json::array();
    for (const auto& rep : set.replicas) {
        if (!rep.stats) {
            a.push_back({{"replica", rep.replica}, {"error", std::string(mmdp::to_string(*rep.error))},
                         {"message", rep.message}});
        }
    }
    return a;
}

Outcome cmd_simulate(const Experiment& e, const Reader& r, bool dry)
{
    require_1d(e, r, "simulate");
    Outcome o;
    if (dry) {
        o.plan = plan_chains(e, e.etas);
        return o;
    }
    const auto stein = build_stein(e);
    std::ostringstream os;
    os << mmdp::io::kChainStatsHeader << '\n';
    json per = json::array();
    bool ok_identity = true;
    std::size_t failed = 0;
    for (double eta : e.etas) {
        const auto set = mmdp::run_replicas(e.model, stein, e.chain(eta), e.replicas, e.seed, e.workers);
        mmdp::io::write_csv(os, set, false);
        double worst = 0.0;
        ok_identity = v_identity(set, worst) && ok_identity;
        failed += set.failures();
        per.push_back({{"eta", eta}, {"m", set.m}, {"failures", failures_json(set)}, {"v_identity_worst", worst}});
    }
    o.csv = os.str();
    o.results = {{"stein", stein_json(stein)}, {"runs", per}};
    o.checks = {{"v_identity", ok_identity}, {"no_failures", failed == 0}};
    return o;
}

Outcome cmd_clt(const Experiment& e, const Reader& r, bool dry)
{
    require_1d(e, r, "clt");
    const double eta = single_eta(e, r, "clt");
    const double alpha = r.number("clt.alpha");
    if (alpha != 0.01 && alpha != 0.05) {
        r.fail("clt.alpha", "supported levels are 0.01 and 0.05");
    }
    if (e.replicas < 100) {
        r.fail("replicas", "the KS check needs at least 100 replicas");
    }
    const auto [vlo, vhi] = r.band("clt.variance_band");
    Outcome o;
    if (dry) {
        o.plan = plan_chains(e, e.etas);
        o.plan["ks_critical_value"] = mmdp::stats::ks_critical_constant(alpha) / std::sqrt(static_cast<double>(e.replicas));
        return o;
    }
    const auto stein = build_stein(e);
    const auto set = mmdp::run_replicas(e.model, stein, e.chain(eta), e.replicas, e.seed, e.workers);
    o.csv = mmdp::io::to_csv(set);
    const auto w = set.column([](const mmdp::ChainStats& c) { return c.w; });
    const auto z = set.column([](const mmdp::ChainStats& c) { return c.centred(); });
    const auto k = mmdp::clt_check(w, 1.0, alpha);
    const double ratio = mmdp::stats::variance(z) / stein.asymptotic_variance;
    double worst = 0.0;
    const bool ident = v_identity(set, worst);
    o.results = {{"stein", stein_json(stein)},
                 {"ks_statistic", k.ks_statistic},
                 {"ks_critical_value", k.critical_value},
                 {"w_mean", k.mean},
                 {"w_variance", k.variance},
                 {"centred_variance", mmdp::stats::variance(z)},
                 {"variance_ratio", ratio},
                 {"variance_band", {vlo, vhi}},
                 {"failures", failures_json(set)},
                 {"v_identity_worst", worst}};
    o.checks = {{"ks_pass", k.pass}, {"variance_in_band", ratio >= vlo && ratio <= vhi}, {"v_identity", ident}};
    return o;
}

Outcome cmd_tails(const Experiment& e, const Reader& r, bool dry)
{
    require_1d(e, r, "tails");
    const double eta = single_eta(e, r, "tails");
    auto xs = r.numbers("tails.xs");
    std::sort(xs.begin(), xs.end());
    const double min_hits = r.number_in("tails.min_expected_hits", 0.0, INFINITY, true, true);
    const auto [lo, hi] = r.band("tails.band");
    try {
        mmdp::require_tail_resolution(xs, e.replicas, min_hits);
    } catch (const mmdp::Error& err) {
        r.fail("tails.xs", err.what());
    }
    Outcome o;
    if (dry) {
        o.plan = plan_chains(e, e.etas);
        o.plan["expected_hits_at_max_x"] = mmdp::stats::normal_sf(xs.back()) * static_cast<double>(e.replicas);
        return o;
    }
    const auto stein = build_stein(e);
    const auto set = mmdp::run_replicas(e.model, stein, e.chain(eta), e.replicas, e.seed, e.workers);
    mmdp::TailOptions opts;
    opts.min_expected_hits = min_hits;
    opts.mark_unresolved = true;  // failures can shrink n below the configured count
    const auto table = mmdp::tail_ratio_table(set, xs, opts);
    o.csv = mmdp::io::to_csv(table);
    bool in_band = true;
    bool monotone = true;
    bool covered = true;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        if (!row.resolved) {
            in_band = false;
            continue;
        }
        in_band = in_band && row.ratio >= lo && row.ratio <= hi;
        covered = covered && row.ci_lo <= row.ratio && row.ratio <= row.ci_hi;
        if (i > 0 && table.rows[i - 1].statistic == row.statistic && table.rows[i - 1].resolved) {
            monotone = monotone && row.p_emp <= table.rows[i - 1].p_emp;
        }
    }
    double worst = 0.0;
    // The deviation theorems hold for x >= c |grad sigma|^{3/4} eta^{1/8} with c unknown;
    // report the c = 1 scale and which x fall below it rather than dropping them.
    const double edge = std::pow(e.model.constants.grad_sigma_sup, 0.75) * std::pow(eta, 0.125);
    json below = json::array();
    for (double x : xs) {
        if (x < edge) {
            below.push_back(x);
        }
    }
    o.results = {{"stein", stein_json(stein)},
                 {"band", {lo, hi}},
                 {"edge_scale_c1", edge},
                 {"xs_below_edge_scale", below},
                 {"excluded_failures", table.excluded_failures},
                 {"failures", failures_json(set)}};
    o.checks = {{"ratios_in_band", in_band},
                {"monotone", monotone},
                {"ci_covers_estimate", covered},
                {"v_identity", v_identity(set, worst)}};
    return o;
}

Outcome cmd_order(const Experiment& e, const Reader& r, bool dry)
{
    mmdp::StrongOrderOptions opts;
    auto etas = r.numbers("order.etas", 2);
    opts.horizon = r.number_in("order.horizon", 0.0, INFINITY, true, true);
    opts.paths = r.integer("order.paths", 1);
    if (!r.at("order.eta_ref").is_null()) {
        opts.eta_ref = r.number_in("order.eta_ref", 0.0, 1.0, true, true);
    }
    opts.theta0 = r.numbers("order.theta0");
    opts.seed = e.seed;
    opts.workers = e.workers;
    const auto [mlo, mhi] = r.band("order.milstein_band");
    const auto [elo, ehi] = r.band("order.em_band");
    Outcome o;
    if (dry) {
        const double ref = opts.eta_ref.value_or(*std::min_element(etas.begin(), etas.end()) / 16.0);
        o.plan = {{"paths", opts.paths}, {"eta_ref", ref}, {"reference_steps_per_path", opts.horizon / ref}};
        return o;
    }
    mmdp::StrongOrderResult res;
    try {
        res = mmdp::strong_order_regression(e.model, etas, opts);
    } catch (const mmdp::Error& err) {
        if (err.code() == mmdp::ErrorCode::InvalidParams) {
            r.fail("order", err.what());
        }
        throw;
    }
    o.csv = mmdp::io::to_csv(res);
    o.results = {{"slope_em", res.slope_em},
                 {"slope_milstein", res.slope_milstein},
                 {"eta_ref", res.eta_ref},
                 {"identical_paths", res.identical_paths},
                 {"milstein_band", {mlo, mhi}},
                 {"em_band", {elo, ehi}}};
    o.checks = {{"milstein_slope_in_band", res.slope_milstein >= mlo && res.slope_milstein <= mhi},
                {"em_slope_in_band", res.slope_em >= elo && res.slope_em <= ehi}};
    return o;
}

Outcome cmd_drift(const Experiment& e, const Reader& r, bool dry)
{
    const auto etas = r.numbers("drift.etas");
    std::vector<std::vector<double>> states;
    if (r.at("drift.states").is_null()) {
        const auto count = r.integer("drift.probe_count", 1);
        states = mmdp::diagonal_probes(e.model.dimension, r.number("drift.probe_lower"), r.number("drift.probe_upper"),
                                       count);
    } else {
        const json& s = r.at("drift.states");
        if (!s.is_array()) {
            r.fail("drift.states", "expected an array of states");
        }
        for (const auto& st : s) {
            std::vector<double> x;
            if (st.is_number()) {
                x.assign(e.model.dimension, st.get<double>());
            } else if (st.is_array() && st.size() == e.model.dimension) {
                for (const auto& c : st) {
                    if (!c.is_number()) {
                        r.fail("drift.states", "state entries must be numbers");
                    }
                    x.push_back(c.get<double>());
                }
            } else {
                r.fail("drift.states", "each state is a number or a d-vector");
            }
            states.push_back(x);
        }
    }
    const auto inner = r.integer("drift.inner", 2);
    const double slack = r.number_in("drift.slack", 0.0, INFINITY, false, true);
    for (double eta : etas) {
        if (!(eta > 0.0 && eta < 1.0)) {
            r.fail("drift.etas", "every eta must lie in (0, 1)");
        }
    }
    if (!e.model.constants.consistent()) {
        r.fail("model.params", "model constants are missing (ConstantsMissing)");
    }
    Outcome o;
    if (dry) {
        o.plan = {{"probes", states.size()}, {"inner", inner}, {"one_step_samples", states.size() * inner * etas.size()}};
        return o;
    }
    std::ostringstream os;
    os << mmdp::io::kDriftHeader << '\n';
    bool pass = true;
    json per = json::array();
    for (double eta : etas) {
        const auto rep = mmdp::drift_condition_check(e.model, eta, states, inner, e.seed, slack, e.workers);
        mmdp::io::write_rows(os, rep);
        pass = pass && rep.pass;
        std::size_t failing = 0;
        double min_margin = INFINITY;
        for (const auto& p : rep.probes) {
            failing += p.pass ? 0 : 1;
            min_margin = std::min(min_margin, p.margin);
        }
        per.push_back({{"eta", eta}, {"pass", rep.pass}, {"failing_probes", failing}, {"min_margin", min_margin},
                       {"C2", rep.constants.c2}, {"C3", rep.constants.c3}, {"B_radius_sq", rep.constants.b_radius_sq}});
    }
    o.csv = os.str();
    o.results = {{"per_eta", per}, {"slack_stderr", slack}};
    o.checks = {{"all_probes_pass", pass}};
    return o;
}

Outcome cmd_bridge(const Experiment& e, const Reader& r, bool dry)
{
    require_1d(e, r, "bridge");
    const auto etas = r.numbers("bridge.etas");
    if (etas.size() < 3) {
        r.fail("bridge.etas", "needs at least 3 step sizes (InsufficientEtaGrid)");
    }
    for (double eta : etas) {
        if (!(eta > 0.0 && eta < 1.0)) {
            r.fail("bridge.etas", "every eta must lie in (0, 1)");
        }
    }
    mmdp::BridgeOptions opts;
    opts.chain_len = r.integer("bridge.chain_len", 1);
    opts.burn_in = r.number_in("bridge.burn_in", 0.0, 1.0, false, true);
    opts.batches = r.integer("bridge.batches", 2);
    opts.theta0 = r.numbers("bridge.theta0");
    opts.control_variate = r.boolean("bridge.control_variate");
    opts.seed = e.seed;
    opts.workers = e.workers;
    const double min_slope = r.number("bridge.min_slope");
    Outcome o;
    if (dry) {
        o.plan = {{"chains", etas.size()}, {"chain_len", opts.chain_len}, {"total_steps", static_cast<double>(opts.chain_len) * static_cast<double>(etas.size())}};
        return o;
    }
    const auto stein = build_stein(e);
    const auto res = mmdp::variance_bridge(e.model, stein, etas, opts);
    o.csv = mmdp::io::to_csv(res);
    o.results = {{"stein", stein_json(stein)},
                 {"slope", num(res.slope)},
                 {"monotone", res.monotone},
                 {"slope_skipped", res.slope_skipped},
                 {"skip_reason", res.skip_reason},
                 {"min_slope", min_slope},
                 {"control_variate", res.control_variate},
                 {"cv_residual", num(res.cv_residual)},
                 {"note", "soft check; without the control variate Monte Carlo noise dominates below gap ~ 1e-3"}};
    o.checks = {{"monotone", res.slope_skipped || res.monotone},
                {"slope_at_least_min", res.slope_skipped || res.slope >= min_slope}};
    return o;
}

Outcome cmd_curves(const Experiment& e, const Reader& r, bool dry)
{
    require_1d(e, r, "curves");
    const double eta = single_eta(e, r, "curves");
    const json& names = r.at("curves.statistics");
    if (!names.is_array() || names.empty()) {
        r.fail("curves.statistics", "expected a non-empty array of statistic names");
    }
    std::vector<mmdp::ConcentrationStatistic> which;
    for (const auto& n : names) {
        try {
            which.push_back(mmdp::concentration_statistic_from(n.is_string() ? n.get<std::string>() : ""));
        } catch (const mmdp::Error& err) {
            r.fail("curves.statistics", err.what());
        }
    }
    const json& ys = r.at("curves.ys");
    for (auto it = ys.begin(); it != ys.end(); ++it) {
        try {
            mmdp::concentration_statistic_from(it.key());
        } catch (const mmdp::Error& err) {
            r.fail("curves.ys." + it.key(), err.what());
        }
        r.numbers("curves.ys." + it.key(), 2);
    }
    const auto points = r.integer("curves.points", 2);
    mmdp::ConcentrationOptions copts;
    copts.min_hits = r.integer("curves.min_hits", 1);
    copts.mark_unresolved = r.boolean("curves.mark_unresolved");
    Outcome o;
    if (dry) {
        o.plan = plan_chains(e, e.etas);
        return o;
    }
    const auto stein = build_stein(e);
    const auto set = mmdp::run_replicas(e.model, stein, e.chain(eta), e.replicas, e.seed, e.workers);
    std::ostringstream os;
    os << mmdp::io::kCurveHeader << '\n';
    json per = json::array();
    bool pass = true;
    for (auto s : which) {
        const std::string name(mmdp::to_string(s));
        const auto values = mmdp::concentration_samples(set, s);
        const auto grid = ys.contains(name) ? r.numbers("curves.ys." + name, 2) : mmdp::spread_grid(values, points);
        const auto c = mmdp::concentration_curve(name, values, grid, copts);
        mmdp::io::write_rows(os, c);
        pass = pass && (c.degenerate || c.pass);
        per.push_back({{"statistic", name},
                       {"degenerate", c.degenerate},
                       {"strictly_decreasing", c.strictly_decreasing},
                       {"linear_rate", num(c.linear_rate)},
                       {"quadratic_rate", num(c.quadratic_rate)},
                       {"dominant", c.dominant},
                       {"pass", c.pass}});
    }
    o.csv = os.str();
    o.results = {{"curves", per}, {"failures", failures_json(set)}};
    o.checks = {{"shapes_ok", pass}};
    return o;
}

Outcome dispatch(const std::string& cmd, const Experiment& e, const Reader& r, bool dry)
{
    if (cmd == "validate") return cmd_validate(e, r, dry);
    if (cmd == "stein") return cmd_stein(e, r, dry);
    if (cmd == "simulate") return cmd_simulate(e, r, dry);
    if (cmd == "clt") return cmd_clt(e, r, dry);
    if (cmd == "tails") return cmd_tails(e, r, dry);
    if (cmd == "order") return cmd_order(e, r, dry);
    if (cmd == "drift") return cmd_drift(e, r, dry);
    if (cmd == "bridge") return cmd_bridge(e, r, dry);
    return cmd_curves(e, r, dry);
}

std::string hex(std::uint64_t v)
{
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Config without the keys that cannot change results.
json result_keys(json cfg)
{
    cfg.erase("workers");
    cfg.erase("output_dir");
    return cfg;
}

} // namespace
} // namespace mdp_cli

int main(int argc, char** argv)
{
    using namespace mdp_cli;
    CLI::App app{"Milstein invariant-measure statistics and moderate-deviation diagnostics"};
    app.require_subcommand(1, 1);
    std::string config_path;
    std::vector<std::string> sets;
    int threads = -1;
    bool dry = false;
    const std::map<std::string, std::string> about{
        {"validate", "check model assumptions and declared constants"},
        {"stein", "solve the 1-D Stein equation on a grid"},
        {"simulate", "run replicas and write per-chain statistics"},
        {"clt", "KS and variance check of W_eta against N(0, 1)"},
        {"tails", "moderate-deviation tail ratios with Clopper-Pearson intervals"},
        {"order", "strong-error slopes of Milstein and EM"},
        {"drift", "Lyapunov drift inequality at probe states"},
        {"bridge", "gap between pi and pi_eta of (sigma f')^2 per step size"},
        {"curves", "tail curves of the concentration statistics"}};
    for (const auto& name : commands()) {
        auto* sub = app.add_subcommand(name, about.at(name));
        sub->add_option("--config", config_path, "JSON config file (a summary.json also works)");
        sub->add_option("--set", sets, "override a config key: dotted.key=value")->take_all();
        sub->add_option("--threads", threads, "worker hint; results do not depend on it");
        sub->add_flag("--dry-run", dry, "print the resolved plan and exit");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    const std::string cmd = app.get_subcommands().front()->get_name();

    json cfg = default_config();
    Outcome out;
    std::string csv_path;
    std::string summary_path;
    try {
        std::string text;
        json user = json::object();
        if (!config_path.empty()) {
            user = load_config_file(config_path, text);
        }
        ConfigSource src(text);
        merge_checked(cfg, user, "", src);
        for (const auto& s : sets) {
            apply_override(cfg, s, src);
        }
        if (threads >= 0) {
            cfg["workers"] = threads;
        }
        const Reader reader(cfg, src);
        const Experiment exp = read_experiment(reader);
        if (dry) {
            out = dispatch(cmd, exp, reader, true);
            json plan = {{"command", cmd}, {"model", exp.model.id}, {"dimension", exp.model.dimension},
                         {"plan", out.plan}, {"config", cfg}};
            std::cout << plan.dump(2) << '\n';
            return 0;
        }
        out = dispatch(cmd, exp, reader, false);
        std::filesystem::create_directories(exp.output_dir);
        csv_path = (std::filesystem::path(exp.output_dir) / (cmd + ".csv")).string();
        summary_path = (std::filesystem::path(exp.output_dir) / (cmd + ".summary.json")).string();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const mmdp::Error& e) {
        std::cerr << "runtime failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << '\n';
        return 3;
    }

    bool pass = true;
    for (const auto& [k, v] : out.checks.items()) {
        pass = pass && v.get<bool>();
    }
    json summary = {{"command", cmd},
                    {"pass", pass},
                    {"checks", out.checks},
                    {"results", out.results},
                    {"csv", std::filesystem::path(csv_path).filename().string()},
                    {"config_hash", hex(mmdp::io::fnv1a(result_keys(cfg).dump()))},
                    {"config", cfg}};
    {
        std::ofstream f(csv_path, std::ios::binary);
        f << out.csv;
        std::ofstream s(summary_path);
        s << summary.dump(2) << '\n';
        if (!f || !s) {
            std::cerr << "runtime failure: cannot write outputs to " << csv_path << '\n';
            return 3;
        }
    }
    std::cout << cmd << ": " << (pass ? "PASS" : "FAIL") << "  (" << csv_path << ")\n";
    for (const auto& [k, v] : out.checks.items()) {
        std::cout << "  " << k << " = " << (v.get<bool>() ? "true" : "false") << '\n';
    }
    return pass ? 0 : 1;
}
