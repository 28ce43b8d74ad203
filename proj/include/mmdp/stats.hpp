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
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/normal.hpp>

#include "mmdp/accumulate.hpp"
#include "mmdp/error.hpp"

namespace mmdp::stats {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// 1 - Phi(x), accurate in the upper tail.
inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

inline double normal_quantile(double p)
{
    return boost::math::quantile(boost::math::normal_distribution<double>{}, p);
}

inline double mean(std::span<const double> v)
{
    NeumaierSum s;
    for (double e : v) {
        s.add(e);
    }
    return v.empty() ? 0.0 : s.value() / static_cast<double>(v.size());
}

/// Unbiased sample variance.
inline double variance(std::span<const double> v)
{
    if (v.size() < 2) {
        return 0.0;
    }
    const double mu = mean(v);
    NeumaierSum s;
    for (double e : v) {
        s.add((e - mu) * (e - mu));
    }
    return s.value() / static_cast<double>(v.size() - 1);
}

inline double median(std::vector<double> v)
{
    if (v.empty()) {
        throw Error(ErrorCode::TooFewSamples, "median of an empty sample");
    }
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) {
        return upper;
    }
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

/// sup_x |F_n(x) - F(x)| for a continuous reference cdf F.
template <typename Cdf>
double ks_statistic(std::vector<double> samples, Cdf&& cdf)
{
    std::sort(samples.begin(), samples.end());
    const auto n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

/// Asymptotic KS critical constant c(alpha); only the two tabulated levels.
inline double ks_critical_constant(double alpha)
{
    if (alpha == 0.01) {
        return 1.628;
    }
    if (alpha == 0.05) {
        return 1.358;
    }
    throw Error(ErrorCode::InvalidParams, "KS level must be 0.01 or 0.05");
}

/// Exact (Clopper-Pearson) two-sided interval for a binomial proportion.
inline std::pair<double, double> clopper_pearson(std::size_t hits, std::size_t n, double level = 0.95)
{
    if (n == 0) {
        throw Error(ErrorCode::TooFewSamples, "binomial interval with n = 0");
    }
    const double a = 1.0 - level;
    const auto k = static_cast<double>(hits);
    const auto nn = static_cast<double>(n);
    const double lo = hits == 0 ? 0.0
        : boost::math::quantile(boost::math::beta_distribution<double>(k, nn - k + 1.0), a / 2.0);
    const double hi = hits == n ? 1.0
        : boost::math::quantile(boost::math::beta_distribution<double>(k + 1.0, nn - k), 1.0 - a / 2.0);
    return {lo, hi};
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double sse = 0.0;
};

/// Ordinary least squares y = intercept + slope x.
inline LineFit fit_line(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 2) {
        throw Error(ErrorCode::InvalidParams, "line fit needs at least two paired points");
    }
    const double mx = mean(x);
    const double my = mean(y);
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) {
        throw Error(ErrorCode::InvalidParams, "line fit needs distinct abscissae");
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - f.intercept - f.slope * x[i];
        f.sse += r * r;
    }
    return f;
}

/// Slope of log y against log x.
inline double log_log_slope(std::span<const double> x, std::span<const double> y)
{
    std::vector<double> lx(x.size());
    std::vector<double> ly(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0 && y[i] > 0.0)) {
            throw Error(ErrorCode::InvalidParams, "log-log fit needs positive values");
        }
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    return fit_line(lx, ly).slope;
}

} // namespace mmdp::stats
