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
#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>

#include "mmdp/diagnostics.hpp"
#include "mmdp/montecarlo.hpp"
#include "mmdp/quadrature.hpp"

namespace mmdp::io {

/// Round-trippable decimal form (%.17g); "nan"/"inf" spelled out.
inline std::string fmt(double v)
{
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline constexpr const char* kChainStatsHeader = "eta,m,replica,pi_hat,y,v,h_eta,r_eta,w,s,clamped_steps";

inline void write_row(std::ostream& os, const ChainStats& c)
{
    os << fmt(c.eta) << ',' << c.m << ',' << c.replica << ',' << fmt(c.pi_hat) << ',' << fmt(c.y) << ','
       << fmt(c.v) << ',' << fmt(c.h_eta) << ',' << fmt(c.r_eta) << ',' << fmt(c.w) << ',' << fmt(c.s) << ','
       << c.clamped_steps << '\n';
}

/// Successful replicas in index order; failures are reported elsewhere.
inline void write_csv(std::ostream& os, const ReplicaSampleSet& set, bool header = true)
{
    if (header) {
        os << kChainStatsHeader << '\n';
    }
    for (const auto& r : set.replicas) {
        if (r.stats) {
            write_row(os, *r.stats);
        }
    }
}

inline constexpr const char* kTailHeader = "statistic,x,p_emp,p_gauss,ratio,ci_lo,ci_hi,n_effective";

inline void write_csv(std::ostream& os, const TailRatioTable& t)
{
    os << kTailHeader << '\n';
    for (const auto& r : t.rows) {
        os << r.statistic << ',' << fmt(r.x) << ',' << fmt(r.p_emp) << ',' << fmt(r.p_gauss) << ','
           << fmt(r.ratio) << ',' << fmt(r.ci_lo) << ',' << fmt(r.ci_hi) << ',' << r.n_effective << '\n';
    }
}

inline constexpr const char* kSteinHeader = "x,f,df,d2f,residual";

inline void write_csv(std::ostream& os, const SteinSolution& s)
{
    os << kSteinHeader << '\n';
    for (std::size_t i = 0; i < s.x.size(); ++i) {
        os << fmt(s.x[i]) << ',' << fmt(s.f[i]) << ',' << fmt(s.df[i]) << ',' << fmt(s.d2f[i]) << ','
           << fmt(s.residual[i]) << '\n';
    }
}

inline constexpr const char* kOrderHeader = "eta,error_em,stderr_em,error_milstein,stderr_milstein";

inline void write_csv(std::ostream& os, const StrongOrderResult& r)
{
    os << kOrderHeader << '\n';
    for (std::size_t i = 0; i < r.etas.size(); ++i) {
        os << fmt(r.etas[i]) << ',' << fmt(r.error_em[i]) << ',' << fmt(r.stderr_em[i]) << ','
           << fmt(r.error_milstein[i]) << ',' << fmt(r.stderr_milstein[i]) << '\n';
    }
}

inline constexpr const char* kDriftHeader = "eta,probe,x1,norm_x,lhs,stderr,rhs,margin,in_b,pass";

inline void write_rows(std::ostream& os, const DriftReport& r)
{
    for (std::size_t i = 0; i < r.probes.size(); ++i) {
        const auto& p = r.probes[i];
        double nrm = 0.0;
        for (double e : p.x) {
            nrm += e * e;
        }
        os << fmt(r.eta) << ',' << i << ',' << fmt(p.x.empty() ? 0.0 : p.x[0]) << ',' << fmt(std::sqrt(nrm)) << ','
           << fmt(p.lhs) << ',' << fmt(p.stderr) << ',' << fmt(p.rhs) << ',' << fmt(p.margin) << ','
           << (p.in_b ? 1 : 0) << ',' << (p.pass ? 1 : 0) << '\n';
    }
}

inline constexpr const char* kBridgeHeader = "eta,pi_value,pi_eta,gap,stderr,pi_eta_plain,stderr_plain,clamped";

inline void write_csv(std::ostream& os, const BridgeResult& r)
{
    os << kBridgeHeader << '\n';
    for (const auto& w : r.rows) {
        os << fmt(w.eta) << ',' << fmt(w.pi_value) << ',' << fmt(w.pi_eta) << ',' << fmt(w.gap) << ','
           << fmt(w.stderr) << ',' << fmt(w.pi_eta_plain) << ',' << fmt(w.stderr_plain) << ',' << w.clamped << '\n';
    }
}

inline constexpr const char* kCurveHeader = "statistic,y,tail,hits,resolved";

inline void write_rows(std::ostream& os, const ConcentrationCurve& c)
{
    for (const auto& p : c.points) {
        os << c.statistic << ',' << fmt(p.y) << ',' << fmt(p.tail) << ',' << p.hits << ',' << (p.resolved ? 1 : 0)
           << '\n';
    }
}

template <typename T>
std::string to_csv(const T& value)
{
    std::ostringstream os;
    write_csv(os, value);
    return os.str();
}

/// 64-bit FNV-1a, used to fingerprint resolved configurations.
inline std::uint64_t fnv1a(const std::string& text)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace mmdp::io
