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
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "mmdp/error.hpp"
#include "mmdp/model.hpp"

namespace mmdp {

/// Stationary density of a 1-D diffusion on the uniform grid
/// x_i = -X + i dx, i = 0..N, dx = 2X/N (N even, so x_{N/2} = 0).
///
/// p(x) is proportional to sigma(x)^-2 exp(int_0^x 2b/sigma^2). Everything is
/// held in log space; `log_density_mid` carries the cell midpoints, which the
/// Stein solver needs for its Simpson cells.
struct DensityGrid {
    double truncation = 0.0;
    std::size_t intervals = 0;
    double dx = 0.0;
    std::vector<double> x;
    std::vector<double> log_density;
    std::vector<double> log_density_mid;
    std::vector<double> density;
    double log_normalization = 0.0;
    double floor = 1e-300;

    std::size_t size() const noexcept { return x.size(); }

    /// Midpoint of cell i, on the same symmetric lattice as the nodes.
    double midpoint(std::size_t i) const noexcept
    {
        const auto offset = 2 * static_cast<long long>(i) + 1 - static_cast<long long>(intervals);
        return static_cast<double>(offset) * (0.5 * dx);
    }

    /// Trapezoid weight of node i.
    double weight(std::size_t i) const noexcept
    {
        return (i == 0 || i == intervals) ? 0.5 * dx : dx;
    }

    double mass() const
    {
        double s = 0.0;
        for (std::size_t i = 0; i < size(); ++i) {
            s += weight(i) * density[i];
        }
        return s;
    }
};

struct DensityOptions {
    /// Truncation X; <= 0 selects 10 standard deviations of the density
    /// (found from a pilot grid) with one automatic escalation.
    double truncation = 0.0;
    std::size_t intervals = std::size_t{1} << 16;
    double floor = 1e-300;
    /// p(+-X) must stay below this fraction of max p.
    double boundary_ratio = 1e-12;
};

namespace detail {

struct ScalarCoefficients {
    const SdeModel* model;
    double drift(double x) const
    {
        double out = 0.0;
        model->drift(std::span<const double>(&x, 1), std::span<double>(&out, 1));
        return out;
    }
    double sigma(double x) const
    {
        double out = 0.0;
        model->diffusion(std::span<const double>(&x, 1), std::span<double>(&out, 1));
        return out;
    }
    double sigma_prime(double x) const
    {
        double out = 0.0;
        model->diffusion_gradient(std::span<const double>(&x, 1), std::span<double>(&out, 1));
        return out;
    }
};

inline DensityGrid density_on_grid(const SdeModel& model, double X, std::size_t n, double floor,
                                   double boundary_ratio)
{
    if (model.dimension != 1) {
        throw Error(ErrorCode::NotOneDimensional, "stationary density requires d = 1");
    }
    if (!(X > 0.0) || !std::isfinite(X)) {
        throw Error(ErrorCode::InvalidParams, "truncation must be positive");
    }
    if (n < 4 || n % 2 != 0) {
        throw Error(ErrorCode::InvalidParams, "grid intervals must be even and >= 4");
    }
    const ScalarCoefficients c{&model};
    const double dx = 2.0 * X / static_cast<double>(n);
    const std::size_t centre = n / 2;

    // Fine grid of nodes and midpoints: fine index 2i is node i, 2i+1 the
    // midpoint of cell i. Potential phi(x) = int_0^x 2b/sigma^2 by Simpson on
    // each fine cell, accumulated outward from x = 0 so symmetric models give
    // bitwise symmetric densities.
    const std::size_t nf = 2 * n;
    const double hf = dx / 2.0;
    const std::size_t cf = 2 * centre;
    // Signed offsets from 0 keep the grid exactly symmetric.
    auto xf = [&](std::size_t j) {
        return static_cast<double>(static_cast<long long>(j) - static_cast<long long>(cf)) * hf;
    };
    auto rate = [&](double x) {
        const double s = c.sigma(x);
        return 2.0 * c.drift(x) / (s * s);
    };
    std::vector<double> phi(nf + 1, 0.0);
    for (std::size_t j = cf; j < nf; ++j) {
        const double a = xf(j);
        const double b = xf(j + 1);
        const double simpson = hf / 6.0 * (rate(a) + 4.0 * rate(0.5 * (a + b)) + rate(b));
        phi[j + 1] = phi[j] + simpson;
    }
    for (std::size_t j = cf; j > 0; --j) {
        const double a = xf(j);
        const double b = xf(j - 1);
        const double simpson = hf / 6.0 * (rate(a) + 4.0 * rate(0.5 * (a + b)) + rate(b));
        phi[j - 1] = phi[j] - simpson;
    }

    std::vector<double> lam(nf + 1);
    double lam_max = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j <= nf; ++j) {
        const double s = c.sigma(xf(j));
        lam[j] = phi[j] - 2.0 * std::log(std::abs(s));
        if (!std::isfinite(lam[j])) {
            throw Error(ErrorCode::DensityUnderflow,
                        "log density is not finite at x = " + std::to_string(xf(j)));
        }
        lam_max = std::max(lam_max, lam[j]);
    }

    DensityGrid g;
    g.truncation = X;
    g.intervals = n;
    g.dx = dx;
    g.floor = floor;
    g.x.resize(n + 1);
    g.log_density.resize(n + 1);
    g.log_density_mid.resize(n);
    g.density.resize(n + 1);
    double z = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
        g.x[i] = xf(2 * i);
        const double w = (i == 0 || i == n) ? 0.5 * dx : dx;
        z += w * std::exp(lam[2 * i] - lam_max);
    }
    const double log_z = lam_max + std::log(z);
    g.log_normalization = log_z;
    for (std::size_t i = 0; i <= n; ++i) {
        g.log_density[i] = lam[2 * i] - log_z;
        g.density[i] = std::exp(g.log_density[i]);
    }
    for (std::size_t i = 0; i < n; ++i) {
        g.log_density_mid[i] = lam[2 * i + 1] - log_z;
    }

    const double log_max = lam_max - log_z;
    const double log_ratio = std::log(boundary_ratio);
    if (g.log_density.front() - log_max >= log_ratio || g.log_density.back() - log_max >= log_ratio) {
        throw Error(ErrorCode::TruncationInsufficient,
                    "boundary density above threshold at X = " + std::to_string(X));
    }
    return g;
}

} // namespace detail

/// Moments of a density grid (mean and standard deviation) by trapezoid.
inline std::array<double, 2> density_moments(const DensityGrid& g)
{
    double m1 = 0.0;
    double m2 = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double w = g.weight(i) * g.density[i];
        m1 += w * g.x[i];
        m2 += w * g.x[i] * g.x[i];
    }
    return {m1, std::sqrt(std::max(0.0, m2 - m1 * m1))};
}

/// Default truncation: 10 standard deviations (plus |mean|) measured on a
/// pilot grid sized from the declared constants, which bound pi(x^2) by
/// (2 K2 + |b(0)|^2/K1 + sigma_sup^2) / K1.
inline double default_truncation(const SdeModel& model)
{
    const ModelConstants& k = model.constants;
    double bound = 1.0;
    if (k.dissipativity > 0.0) {
        bound = (2.0 * k.offset + k.b0_norm * k.b0_norm / k.dissipativity + k.sigma_sup * k.sigma_sup) /
                k.dissipativity;
    }
    const double pilot_x = 12.0 * std::sqrt(std::max(bound, 1e-6));
    const auto pilot = detail::density_on_grid(model, pilot_x, 4096, 1e-300, 1.0);
    const auto [mean, sd] = density_moments(pilot);
    return std::abs(mean) + 10.0 * sd;
}

inline DensityGrid invariant_density_1d(const SdeModel& model, const DensityOptions& opts = {})
{
    if (model.dimension != 1) {
        throw Error(ErrorCode::NotOneDimensional, "stationary density requires d = 1");
    }
    if (opts.truncation > 0.0) {
        return detail::density_on_grid(model, opts.truncation, opts.intervals, opts.floor,
                                       opts.boundary_ratio);
    }
    const double x = default_truncation(model);
    try {
        return detail::density_on_grid(model, x, opts.intervals, opts.floor, opts.boundary_ratio);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::TruncationInsufficient) {
            throw;
        }
        return detail::density_on_grid(model, 1.5 * x, opts.intervals, opts.floor, opts.boundary_ratio);
    }
}

inline DensityGrid invariant_density_1d(const SdeModel& model, double truncation, std::size_t intervals)
{
    DensityOptions opts;
    opts.truncation = truncation;
    opts.intervals = intervals;
    return invariant_density_1d(model, opts);
}

/// Trapezoid approximation of int g p dx.
template <typename Fn>
double stationary_expectation(const DensityGrid& density, Fn&& g)
{
    double s = 0.0;
    double comp = 0.0;
    for (std::size_t i = 0; i < density.size(); ++i) {
        const double v = g(density.x[i]);
        if (!std::isfinite(v)) {
            throw Error(ErrorCode::NonFiniteEvaluation,
                        "integrand not finite at x = " + std::to_string(density.x[i]));
        }
        // Neumaier summation.
        const double term = density.weight(i) * density.density[i] * v;
        const double t = s + term;
        comp += std::abs(s) >= std::abs(term) ? (s - t) + term : (term - t) + s;
        s = t;
    }
    return s + comp;
}

/// Generator <b, grad f> + 1/2 <sigma sigma^T, hess f>_HS at x.
/// `hess` is row-major d x d.
inline double generator_apply(const SdeModel& model, std::span<const double> x,
                              std::span<const double> grad, std::span<const double> hess)
{
    const std::size_t d = model.dimension;
    if (x.size() != d || grad.size() != d || hess.size() != d * d) {
        throw Error(ErrorCode::DimensionMismatch, "generator_apply argument sizes");
    }
    std::vector<double> b(d);
    std::vector<double> s(d * d);
    model.drift(x, b);
    model.diffusion(x, s);
    double first = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        first += b[i] * grad[i];
    }
    double second = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            double a = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                a += s[i * d + k] * s[j * d + k];
            }
            second += a * hess[i * d + j];
        }
    }
    const double out = first + 0.5 * second;
    if (!std::isfinite(out)) {
        throw Error(ErrorCode::NonFiniteEvaluation, "generator value not finite");
    }
    return out;
}

/// Scalar form: b(x) f'(x) + 1/2 sigma(x)^2 f''(x).
inline double generator_apply(const SdeModel& model, double x, double f1, double f2)
{
    return generator_apply(model, std::span<const double>(&x, 1), std::span<const double>(&f1, 1),
                           std::span<const double>(&f2, 1));
}

/// Shape-preserving (Fritsch-Carlson / PCHIP) cubic on a uniform grid.
/// Outside the grid the boundary value is returned and the caller is told.
class MonotoneCubic {
public:
    MonotoneCubic() = default;

    MonotoneCubic(double x0, double dx, std::vector<double> values)
        : x0_(x0), dx_(dx), y_(std::move(values)), slope_(y_.size(), 0.0)
    {
        const std::size_t n = y_.size();
        if (n < 3) {
            throw Error(ErrorCode::InvalidParams, "interpolant needs at least 3 nodes");
        }
        std::vector<double> delta(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            delta[i] = (y_[i + 1] - y_[i]) / dx_;
        }
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double a = delta[i - 1];
            const double b = delta[i];
            slope_[i] = (a * b <= 0.0) ? 0.0 : 2.0 * a * b / (a + b);
        }
        slope_[0] = end_slope(delta[0], delta[1]);
        slope_[n - 1] = end_slope(delta[n - 2], delta[n - 3]);
    }

    double lower() const noexcept { return x0_; }
    double upper() const noexcept { return x0_ + dx_ * static_cast<double>(y_.size() - 1); }

    /// Value at x; sets `clamped` when x falls outside the grid.
    double operator()(double x, bool& clamped) const noexcept
    {
        const double t = (x - x0_) / dx_;
        const auto last = static_cast<double>(y_.size() - 1);
        if (!(t >= 0.0)) {
            clamped = true;
            return y_.front();
        }
        if (t >= last) {
            clamped = t > last;
            return y_.back();
        }
        clamped = false;
        const auto i = static_cast<std::size_t>(t);
        const double s = t - static_cast<double>(i);
        const double s2 = s * s;
        const double s3 = s2 * s;
        const double h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        const double h10 = s3 - 2.0 * s2 + s;
        const double h01 = -2.0 * s3 + 3.0 * s2;
        const double h11 = s3 - s2;
        return h00 * y_[i] + h10 * dx_ * slope_[i] + h01 * y_[i + 1] + h11 * dx_ * slope_[i + 1];
    }

    double operator()(double x) const noexcept
    {
        bool clamped = false;
        return (*this)(x, clamped);
    }

private:
    static double end_slope(double d0, double d1)
    {
        double s = 0.5 * (3.0 * d0 - d1);
        if (s * d0 <= 0.0) {
            s = 0.0;
        } else if (d0 * d1 <= 0.0 && std::abs(s) > std::abs(3.0 * d0)) {
            s = 3.0 * d0;
        }
        return s;
    }

    double x0_ = 0.0;
    double dx_ = 1.0;
    std::vector<double> y_;
    std::vector<double> slope_;
};

/// Grid solution of A f = h - pi(h) in one dimension, gauge f(0) = 0.
struct SteinSolution {
    std::vector<double> x;
    std::vector<double> f;
    std::vector<double> df;
    std::vector<double> d2f;
    /// |A f - (h - pi(h))| per node, derivatives of f by finite differences.
    std::vector<double> residual;
    double pi_h = 0.0;
    double residual_sup = 0.0;
    std::array<double, 3> derivative_sups{};
    /// pi((sigma f')^2), the CLT variance of eta^{-1/2}(Pi_eta(h) - pi(h)).
    double asymptotic_variance = 0.0;
    bool h_bounded = true;
    TestFunction h;
    MonotoneCubic df_interp;

    double lower() const { return x.front(); }
    double upper() const { return x.back(); }
};

struct SteinOptions {
    double tolerance = 1e-6;
};

/// Solve the 1-D Stein equation
///
///   b f' + 1/2 sigma^2 f'' = h - pi(h)
///
/// through the integrating-factor form
///
///   f'(x) = 2 / (sigma^2(x) p(x)) * int_{-X}^x (h - pi(h)) p dy,
///
/// evaluated as a stable recursion in log space: left of the density mode
/// from -X upward, right of it through the equivalent upper-tail integral
/// from +X downward. Cells use Simpson's rule with the density's midpoint
/// values. f follows by cumulative integration from 0 and f'' from the
/// equation itself. The residual re-applies the generator with central
/// differences of the returned f and f'.
inline SteinSolution solve_stein_1d(const SdeModel& model, const TestFunction& h,
                                    const DensityGrid& density, const SteinOptions& opts = {})
{
    if (model.dimension != 1) {
        throw Error(ErrorCode::NotOneDimensional, "Stein solver requires d = 1");
    }
    const std::size_t n = density.intervals;
    const double dx = density.dx;
    const detail::ScalarCoefficients c{&model};

    std::vector<double> hv(n + 1);
    std::vector<double> hm(n);
    for (std::size_t i = 0; i <= n; ++i) {
        hv[i] = h.value(density.x[i]);
        if (!std::isfinite(hv[i])) {
            throw Error(ErrorCode::NonFiniteEvaluation, "h not finite on the grid");
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        hm[i] = h.value(density.midpoint(i));
    }
    const bool constant_h = std::all_of(hv.begin(), hv.end(), [&](double v) { return v == hv[0]; }) &&
                            std::all_of(hm.begin(), hm.end(), [&](double v) { return v == hv[0]; });
    // pi(h) by the same composite Simpson rule as the cells below, so the
    // lower and upper recursions meet without a jump at the mode.
    double pi_h = hv[0];
    if (!constant_h) {
        const double ref = *std::max_element(density.log_density.begin(), density.log_density.end());
        double num = 0.0;
        double den = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double w0 = std::exp(density.log_density[i] - ref);
            const double wm = 4.0 * std::exp(density.log_density_mid[i] - ref);
            const double w1 = std::exp(density.log_density[i + 1] - ref);
            num += w0 * hv[i] + wm * hm[i] + w1 * hv[i + 1];
            den += w0 + wm + w1;
        }
        pi_h = num / den;
    }

    SteinSolution sol;
    sol.x = density.x;
    sol.pi_h = pi_h;
    sol.h_bounded = h.bounded;
    sol.h = h;
    sol.f.assign(n + 1, 0.0);
    sol.df.assign(n + 1, 0.0);
    sol.d2f.assign(n + 1, 0.0);
    sol.residual.assign(n + 1, 0.0);

    std::vector<double> sig(n + 1);
    std::vector<double> drift(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        sig[i] = c.sigma(density.x[i]);
        drift[i] = c.drift(density.x[i]);
    }

    // Two-term Laplace expansion of the integral of (h - pi) exp(L(y) - L(x))
    // over the discarded tail beyond x: with u = (h - pi)/L',
    //   lower tail  ~  u - u'/L',   upper tail  ~  -(u - u'/L').
    // Falls back to zero unless the log density is decaying outward.
    auto tail_start = [&](double x, double side) {
        auto log_slope = [&](double y) {
            const double s = c.sigma(y);
            return 2.0 * c.drift(y) / (s * s) - 2.0 * c.sigma_prime(y) / s;
        };
        auto u = [&](double y) { return (h.value(y) - pi_h) / log_slope(y); };
        const double slope = log_slope(x);
        if (!(side * slope > 0.0) || !std::isfinite(slope)) {
            return 0.0;
        }
        const double step = 1e-4 * (1.0 + std::abs(x));
        const double du = (u(x + step) - u(x - step)) / (2.0 * step);
        const double est = u(x) - du / slope;
        return std::isfinite(est) ? side * est : 0.0;
    };

    if (!constant_h) {
        const auto& lp = density.log_density;
        const auto& lm = density.log_density_mid;
        const std::size_t mode =
            static_cast<std::size_t>(std::max_element(lp.begin(), lp.end()) - lp.begin());

        // J_i = int_{-X}^{x_i} (h - pi) exp(L(y) - L(x_i)) dy, started from
        // the Laplace tail estimate of the mass beyond the truncation.
        double acc = tail_start(density.x.front(), +1.0);
        sol.df[0] = 2.0 * acc / (sig[0] * sig[0]);
        for (std::size_t i = 0; i < mode; ++i) {
            const double e0 = std::exp(lp[i] - lp[i + 1]);
            const double em = std::exp(lm[i] - lp[i + 1]);
            acc = acc * e0 + dx / 6.0 * ((hv[i] - pi_h) * e0 + 4.0 * (hm[i] - pi_h) * em + (hv[i + 1] - pi_h));
            sol.df[i + 1] = 2.0 * acc / (sig[i + 1] * sig[i + 1]);
        }
        // K_i = int_{x_i}^{X} (h - pi) exp(L(y) - L(x_i)) dy, f' = -2 K / sigma^2
        acc = tail_start(density.x.back(), -1.0);
        sol.df[n] = -2.0 * acc / (sig[n] * sig[n]);
        for (std::size_t i = n; i > mode + 1; --i) {
            const double e0 = std::exp(lp[i] - lp[i - 1]);
            const double em = std::exp(lm[i - 1] - lp[i - 1]);
            acc = acc * e0 + dx / 6.0 * ((hv[i] - pi_h) * e0 + 4.0 * (hm[i - 1] - pi_h) * em + (hv[i - 1] - pi_h));
            sol.df[i - 1] = -2.0 * acc / (sig[i - 1] * sig[i - 1]);
        }
        if (mode == 0) {
            // Degenerate (density peaked at the boundary); fall back on the
            // upper recursion for node 0 as well.
            const double e0 = std::exp(lp[1] - lp[0]);
            const double em = std::exp(lm[0] - lp[0]);
            const double k0 = acc * e0 + dx / 6.0 * ((hv[1] - pi_h) * e0 + 4.0 * (hm[0] - pi_h) * em + (hv[0] - pi_h));
            sol.df[0] = -2.0 * k0 / (sig[0] * sig[0]);
        }

        for (std::size_t i = 0; i <= n; ++i) {
            sol.d2f[i] = 2.0 * (hv[i] - pi_h - drift[i] * sol.df[i]) / (sig[i] * sig[i]);
        }

        // f by the Hermite-corrected trapezoid (uses f''), outward from x = 0.
        const std::size_t centre = n / 2;
        auto cell = [&](std::size_t i) {
            return 0.5 * dx * (sol.df[i] + sol.df[i + 1]) - dx * dx / 12.0 * (sol.d2f[i + 1] - sol.d2f[i]);
        };
        for (std::size_t i = centre; i < n; ++i) {
            sol.f[i + 1] = sol.f[i] + cell(i);
        }
        for (std::size_t i = centre; i > 0; --i) {
            sol.f[i - 1] = sol.f[i] - cell(i - 1);
        }

        // Certification with second-order differences.
        for (std::size_t i = 0; i <= n; ++i) {
            double f1 = 0.0;
            double g1 = 0.0;
            if (i == 0) {
                f1 = (-3.0 * sol.f[0] + 4.0 * sol.f[1] - sol.f[2]) / (2.0 * dx);
                g1 = (-3.0 * sol.df[0] + 4.0 * sol.df[1] - sol.df[2]) / (2.0 * dx);
            } else if (i == n) {
                f1 = (3.0 * sol.f[n] - 4.0 * sol.f[n - 1] + sol.f[n - 2]) / (2.0 * dx);
                g1 = (3.0 * sol.df[n] - 4.0 * sol.df[n - 1] + sol.df[n - 2]) / (2.0 * dx);
            } else {
                f1 = (sol.f[i + 1] - sol.f[i - 1]) / (2.0 * dx);
                g1 = (sol.df[i + 1] - sol.df[i - 1]) / (2.0 * dx);
            }
            sol.residual[i] = std::abs(drift[i] * f1 + 0.5 * sig[i] * sig[i] * g1 - (hv[i] - pi_h));
        }
    }

    for (std::size_t i = 0; i <= n; ++i) {
        const double vals[3] = {sol.f[i], sol.df[i], sol.d2f[i]};
        for (std::size_t k = 0; k < 3; ++k) {
            if (!std::isfinite(vals[k])) {
                throw Error(ErrorCode::NonFiniteEvaluation, "Stein solution not finite on the grid");
            }
            sol.derivative_sups[k] = std::max(sol.derivative_sups[k], std::abs(vals[k]));
        }
        sol.residual_sup = std::max(sol.residual_sup, sol.residual[i]);
    }

    double var = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
        const double sg = sig[i] * sol.df[i];
        var += density.weight(i) * density.density[i] * sg * sg;
    }
    sol.asymptotic_variance = var;
    sol.df_interp = MonotoneCubic(density.x.front(), dx, sol.df);

    if (sol.residual_sup > opts.tolerance) {
        throw Error(ErrorCode::ResidualTooLarge,
                    "Stein residual " + std::to_string(sol.residual_sup) + " exceeds tolerance " +
                        std::to_string(opts.tolerance));
    }
    return sol;
}

/// Size of the rounding error in the certified residual: eps-level errors in
/// f and f' amplified by 1/dx through the centred differences. Residuals at
/// or below this value carry no information about discretization error.
inline double stein_residual_floor(const SdeModel& model, const SteinSolution& sol)
{
    constexpr double eps = std::numeric_limits<double>::epsilon();
    const double dx = sol.x[1] - sol.x[0];
    double floor = 0.0;
    for (std::size_t i = 0; i < sol.x.size(); ++i) {
        double b = 0.0;
        double sg = 0.0;
        model.drift(std::span(&sol.x[i], 1), std::span(&b, 1));
        model.diffusion(std::span(&sol.x[i], 1), std::span(&sg, 1));
        floor = std::max(floor, 16.0 * eps * (std::abs(b * sol.f[i]) + sg * sg * std::abs(sol.df[i])) / dx);
    }
    return floor;
}

} // namespace mmdp
