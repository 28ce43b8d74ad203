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

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "mmdp/mmdp.hpp"

namespace mdp_cli {

using json = nlohmann::ordered_json;

/// Configuration problem; `key` is the dotted path, `line` is 0 when the
/// value came from the command line.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, int line, const std::string& what)
        : std::runtime_error(what), key_(std::move(key)), line_(line)
    {
    }

    const std::string& key() const noexcept { return key_; }
    int line() const noexcept { return line_; }

private:
    std::string key_;
    int line_;
};

inline const std::vector<std::string>& commands()
{
    static const std::vector<std::string> c{"validate", "stein",  "simulate", "clt",   "tails",
                                            "order",    "drift",  "bridge",   "curves"};
    return c;
}

/// Defaults; every accepted key appears here. Objects named in
/// free_form_keys() take arbitrary members.
inline json default_config()
{
    return json::parse(R"({
  "model": {"id": "ou", "params": {}},
  "h": {"id": "identity", "params": {}},
  "eta": 0.02,
  "steps_override": null,
  "replicas": 2000,
  "master_seed": 1,
  "scheme": "milstein",
  "initial": {"kind": "fixed", "mean": [0.0], "std": 0.0},
  "stein": {"X": 0.0, "N_grid": 65536, "tolerance": 1e-6},
  "output_dir": "out",
  "workers": 0,
  "validate": {"lower": [-10.0], "upper": [10.0], "points": 10000, "pairs": 10000},
  "clt": {"alpha": 0.01, "variance_band": [0.85, 1.15]},
  "tails": {"xs": [0.0, 1.0, 1.5, 2.0], "band": [0.85, 1.18], "min_expected_hits": 100.0},
  "order": {"etas": [0.03125, 0.015625, 0.0078125, 0.00390625, 0.001953125, 0.0009765625],
            "eta_ref": 6.103515625e-05, "horizon": 1.0, "paths": 512, "theta0": [0.0],
            "milstein_band": [0.85, 1.15], "em_band": [0.4, 0.65]},
  "drift": {"etas": [0.05, 0.01], "states": null, "probe_lower": -10.0, "probe_upper": 10.0,
            "probe_count": 50, "inner": 100000, "slack": 3.0},
  "bridge": {"etas": [0.2, 0.1, 0.05, 0.025], "chain_len": 10000000, "burn_in": 0.1, "batches": 50,
             "theta0": [0.0], "min_slope": 0.6,
             "control_variate": true},
  "curves": {"statistics": ["Y_dev", "VY_dev", "R_rem", "b_energy"], "ys": {}, "points": 7,
             "min_hits": 50, "mark_unresolved": true}
})");
}

inline bool free_form(const std::string& path)
{
    return path == "model.params" || path == "h.params" || path == "curves.ys";
}

/// Line of the innermost key of `path` in `text`, searching each component
/// after the previous one; 0 if not found.
inline int locate(const std::string& text, const std::string& path)
{
    if (text.empty()) {
        return 0;
    }
    std::size_t pos = 0;
    std::size_t found = std::string::npos;
    std::stringstream ss(path);
    std::string part;
    while (std::getline(ss, part, '.')) {
        const auto at = text.find('"' + part + '"', pos);
        if (at == std::string::npos) {
            break;
        }
        found = at;
        pos = at + part.size() + 2;
    }
    if (found == std::string::npos) {
        return 0;
    }
    int line = 1;
    for (std::size_t i = 0; i < found; ++i) {
        line += text[i] == '\n' ? 1 : 0;
    }
    return line;
}

class ConfigSource {
public:
    ConfigSource() = default;
    explicit ConfigSource(std::string text) : text_(std::move(text)) {}

    [[noreturn]] void fail(const std::string& path, const std::string& what) const
    {
        const int line = overridden_.count(path) ? 0 : locate(text_, path);
        std::string where = line > 0 ? " (line " + std::to_string(line) + ")" : (overridden_.count(path) ? " (--set)" : "");
        throw ConfigError(path, line, "config key '" + path + "'" + where + ": " + what);
    }

    void mark_override(const std::string& path) { overridden_.insert(path); }

private:
    std::string text_;
    std::set<std::string> overridden_;
};

/// Overlay `user` onto `base`, rejecting keys absent from the defaults.
inline void merge_checked(json& base, const json& user, const std::string& prefix, const ConfigSource& src)
{
    if (!user.is_object()) {
        src.fail(prefix.empty() ? "<root>" : prefix, "expected an object");
    }
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!base.contains(it.key())) {
            src.fail(path, "unknown key");
        }
        json& slot = base[it.key()];
        if (slot.is_object() && !free_form(path)) {
            merge_checked(slot, it.value(), path, src);
        } else {
            slot = it.value();
        }
    }
}

/// Read a config file. A summary.json written by this tool is accepted too:
/// its embedded "config" is used.
inline json load_config_file(const std::string& path, std::string& text)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("--config", 0, "cannot open config file '" + path + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    text = buf.str();
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        int line = 1;
        for (std::size_t i = 0; i < std::min<std::size_t>(e.byte, text.size()); ++i) {
            line += text[i] == '\n' ? 1 : 0;
        }
        throw ConfigError("<parse>", line, "config parse error at line " + std::to_string(line) + ": " + e.what());
    }
    if (doc.is_object() && doc.contains("config") && doc.contains("command") && doc["config"].is_object()) {
        return doc["config"];
    }
    return doc;
}

/// Apply `key=value` with a dotted key. The value is parsed as JSON when it
/// is valid JSON, otherwise taken as a string.
inline void apply_override(json& cfg, const std::string& assignment, ConfigSource& src)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError(assignment, 0, "--set expects key=value, got '" + assignment + "'");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }
    src.mark_override(key);
    json* node = &cfg;
    std::stringstream ss(key);
    std::string part;
    std::string path;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) {
        parts.push_back(part);
    }
    for (std::size_t i = 0; i < parts.size(); ++i) {
        path += (path.empty() ? "" : ".") + parts[i];
        const bool last = i + 1 == parts.size();
        if (!node->is_object()) {
            src.fail(path, "parent is not an object");
        }
        const std::string parent = path.substr(0, path.size() - parts[i].size() - (i == 0 ? 0 : 1));
        if (!node->contains(parts[i]) && !(i > 0 && free_form(parent))) {
            src.fail(path, "unknown key");
        }
        if (last) {
            (*node)[parts[i]] = value;
        } else {
            node = &(*node)[parts[i]];
        }
    }
}

// ---------------------------------------------------------------------------
// typed access

class Reader {
public:
    Reader(const json& cfg, const ConfigSource& src) : cfg_(cfg), src_(src) {}

    const json& at(const std::string& path) const
    {
        const json* node = &cfg_;
        std::stringstream ss(path);
        std::string part;
        while (std::getline(ss, part, '.')) {
            node = &node->at(part);
        }
        return *node;
    }

    double number(const std::string& path) const
    {
        const json& v = at(path);
        if (!v.is_number()) {
            src_.fail(path, "expected a number");
        }
        const double d = v.get<double>();
        if (!std::isfinite(d)) {
            src_.fail(path, "must be finite");
        }
        return d;
    }

    double number_in(const std::string& path, double lo, double hi, bool open_lo, bool open_hi) const
    {
        const double d = number(path);
        if ((open_lo ? !(d > lo) : !(d >= lo)) || (open_hi ? !(d < hi) : !(d <= hi))) {
            src_.fail(path, "value " + mmdp::io::fmt(d) + " outside " + (open_lo ? "(" : "[") + mmdp::io::fmt(lo) +
                                ", " + mmdp::io::fmt(hi) + (open_hi ? ")" : "]"));
        }
        return d;
    }

    std::uint64_t integer(const std::string& path, std::uint64_t min_value = 0) const
    {
        const json& v = at(path);
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
            src_.fail(path, "expected a non-negative integer");
        }
        const auto u = v.get<std::uint64_t>();
        if (u < min_value) {
            src_.fail(path, "must be at least " + std::to_string(min_value));
        }
        return u;
    }

    std::string string(const std::string& path) const
    {
        const json& v = at(path);
        if (!v.is_string()) {
            src_.fail(path, "expected a string");
        }
        return v.get<std::string>();
    }

    bool boolean(const std::string& path) const
    {
        const json& v = at(path);
        if (!v.is_boolean()) {
            src_.fail(path, "expected true or false");
        }
        return v.get<bool>();
    }

    std::vector<double> numbers(const std::string& path, std::size_t min_size = 1) const
    {
        const json& v = at(path);
        std::vector<double> out;
        if (v.is_number()) {
            out.push_back(number(path));
        } else if (v.is_array()) {
            for (const auto& e : v) {
                if (!e.is_number() || !std::isfinite(e.get<double>())) {
                    src_.fail(path, "expected finite numbers");
                }
                out.push_back(e.get<double>());
            }
        } else {
            src_.fail(path, "expected a number or an array of numbers");
        }
        if (out.size() < min_size) {
            src_.fail(path, "needs at least " + std::to_string(min_size) + " entries");
        }
        return out;
    }

    std::pair<double, double> band(const std::string& path) const
    {
        const auto v = numbers(path, 2);
        if (v.size() != 2 || !(v[0] <= v[1])) {
            src_.fail(path, "expected [lower, upper] with lower <= upper");
        }
        return {v[0], v[1]};
    }

    mmdp::ParamMap params(const std::string& path) const
    {
        const json& v = at(path);
        if (!v.is_object()) {
            src_.fail(path, "expected an object of numbers");
        }
        mmdp::ParamMap out;
        for (auto it = v.begin(); it != v.end(); ++it) {
            if (!it.value().is_number()) {
                src_.fail(path + "." + it.key(), "expected a number");
            }
            out[it.key()] = it.value().get<double>();
        }
        return out;
    }

    [[noreturn]] void fail(const std::string& path, const std::string& what) const { src_.fail(path, what); }

private:
    const json& cfg_;
    const ConfigSource& src_;
};

/// Everything every command needs, validated.
struct Experiment {
    mmdp::SdeModel model;
    mmdp::TestFunction h;
    std::vector<double> etas;
    std::optional<std::uint64_t> steps;
    std::uint64_t replicas = 1;
    std::uint64_t seed = 1;
    mmdp::Scheme scheme = mmdp::Scheme::Milstein;
    mmdp::InitialCondition initial;
    mmdp::DensityOptions density;
    mmdp::SteinOptions stein;
    std::string output_dir;
    std::size_t workers = 0;

    mmdp::ChainConfig chain(double eta) const
    {
        mmdp::ChainConfig c;
        c.eta = eta;
        c.steps = steps;
        c.initial = initial;
        c.scheme = scheme;
        return c;
    }
};

inline Experiment read_experiment(const Reader& r)
{
    Experiment e;
    try {
        e.model = mmdp::builtin_model(r.string("model.id"), r.params("model.params"));
    } catch (const mmdp::Error& err) {
        r.fail(err.code() == mmdp::ErrorCode::UnknownModelId ? "model.id" : "model.params", err.what());
    }
    try {
        e.h = mmdp::builtin_test_function(r.string("h.id"), r.params("h.params"));
    } catch (const mmdp::Error& err) {
        r.fail(err.code() == mmdp::ErrorCode::UnknownTestFunctionId ? "h.id" : "h.params", err.what());
    }
    e.etas = r.numbers("eta");
    for (double eta : e.etas) {
        if (!(eta > 0.0 && eta < 1.0)) {
            r.fail("eta", "every eta must lie in (0, 1)");
        }
    }
    if (!r.at("steps_override").is_null()) {
        e.steps = r.integer("steps_override", 1);
    }
    e.replicas = r.integer("replicas", 1);
    e.seed = r.integer("master_seed");
    const std::string scheme = r.string("scheme");
    if (scheme == "milstein") {
        e.scheme = mmdp::Scheme::Milstein;
    } else if (scheme == "em") {
        e.scheme = mmdp::Scheme::EulerMaruyama;
    } else {
        r.fail("scheme", "expected \"milstein\" or \"em\"");
    }
    const std::string kind = r.string("initial.kind");
    const auto mean = r.numbers("initial.mean");
    if (mean.size() != 1 && mean.size() != e.model.dimension) {
        r.fail("initial.mean", "needs 1 or d entries");
    }
    const double sd = r.number_in("initial.std", 0.0, INFINITY, false, true);
    if (kind == "fixed") {
        e.initial = mmdp::InitialCondition::fixed(mean);
    } else if (kind == "gaussian") {
        e.initial = mmdp::InitialCondition::gaussian(mean, sd);
    } else {
        r.fail("initial.kind", "expected \"fixed\" or \"gaussian\"");
    }
    e.density.truncation = r.number_in("stein.X", 0.0, INFINITY, false, true);
    const auto grid = r.integer("stein.N_grid", 16);
    if (grid % 2 != 0) {
        r.fail("stein.N_grid", "must be even");
    }
    e.density.intervals = grid;
    e.stein.tolerance = r.number_in("stein.tolerance", 0.0, INFINITY, true, true);
    e.output_dir = r.string("output_dir");
    if (e.output_dir.empty()) {
        r.fail("output_dir", "must not be empty");
    }
    e.workers = r.integer("workers");
    return e;
}

} // namespace mdp_cli
