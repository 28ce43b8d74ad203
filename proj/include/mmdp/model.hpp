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
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mmdp/error.hpp"
#include "mmdp/noise.hpp"

namespace mmdp {

using ParamMap = std::map<std::string, double>;

/// Declared model constants. These are inputs supplied by the model author;
/// validation only checks them against samples, it never rewrites them.
struct ModelConstants {
    double lipschitz = 0.0;       // L
    double dissipativity = 0.0;   // K1
    double offset = 0.0;          // K2
    double sigma_sup = 0.0;       // sup ||sigma(x)|| (operator norm)
    double grad_sigma_sup = 0.0;  // sup ||grad sigma(x)||
    double b0_norm = 0.0;         // ||b(0)||_2

    bool consistent() const
    {
        return lipschitz > 0.0 && dissipativity > 0.0 && offset >= 0.0 && sigma_sup > 0.0 &&
               grad_sigma_sup >= 0.0 && b0_norm >= 0.0;
    }
};

/// dX = b(X) dt + sigma(X) dB on R^d.
///
/// Callbacks write into caller-provided buffers so that steppers run without
/// allocation. Layouts:
///   drift:              out[i]               = b_i(x)
///   diffusion:          out[i*d + j]         = sigma_{i,j}(x)
///   diffusion_gradient: out[(i*d + j)*d + l] = d sigma_{i,j} / d x^l
/// All callbacks must be pure (they are called concurrently from workers).
struct SdeModel {
    using Field = std::function<void(std::span<const double>, std::span<double>)>;

    std::string id;
    ParamMap params;
    std::size_t dimension = 1;
    Field drift;
    Field diffusion;
    Field diffusion_gradient;
    /// Optional fused (drift, diffusion, diffusion_gradient) evaluation for
    /// models whose coefficients share work. Must agree bitwise with the
    /// three separate callbacks.
    std::function<void(std::span<const double>, std::span<double>, std::span<double>, std::span<double>)>
        coefficients;
    ModelConstants constants;
    /// sigma is diagonal; multi-d Milstein is only exercised on such models.
    bool diagonal_diffusion = true;
    /// grad sigma is identically zero (Milstein coincides with Euler-Maruyama).
    bool additive_noise = false;
};

/// Scalar test function h with its first two derivatives.
struct TestFunction {
    std::string id;
    ParamMap params;
    std::function<double(double)> value;
    std::function<double(double)> first;
    std::function<double(double)> second;
    /// h is claimed to lie in C_b^2 (bounded with bounded derivatives).
    bool bounded = true;
};

// ---------------------------------------------------------------------------
// builtin registries

namespace detail {

inline double take_param(ParamMap& remaining, const std::string& key, double fallback)
{
    auto it = remaining.find(key);
    if (it == remaining.end()) {
        return fallback;
    }
    const double v = it->second;
    remaining.erase(it);
    if (!std::isfinite(v)) {
        throw Error(ErrorCode::InvalidParams, "parameter '" + key + "' is not finite");
    }
    return v;
}

inline void reject_leftovers(const ParamMap& remaining, const std::string& owner)
{
    if (!remaining.empty()) {
        throw Error(ErrorCode::InvalidParams,
                    "unknown parameter '" + remaining.begin()->first + "' for '" + owner + "'");
    }
}

inline std::size_t take_dimension(ParamMap& remaining, double fallback)
{
    const double d = take_param(remaining, "dim", fallback);
    if (d < 1.0 || d != std::floor(d) || d > 64.0) {
        throw Error(ErrorCode::InvalidParams, "dim must be an integer in [1, 64]");
    }
    return static_cast<std::size_t>(d);
}

/// {tanh x, sech^2 x} from one exp and one division. u = e^{-2|x|} <= 1
/// never overflows; sech^2 = 4u/(1+u)^2 keeps full relative accuracy in the
/// tails, and tanh carries absolute error ~1e-16 near 0.
inline std::array<double, 2> tanh_sech2(double x) noexcept
{
    const double u = std::exp(-2.0 * std::abs(x));
    const double inv = 1.0 / (1.0 + u);
    return {std::copysign((1.0 - u) * inv, x), 4.0 * u * inv * inv};
}

/// Diagonal model with b_i(x) = -kappa x_i + c sin x_i and
/// sigma_ii(x) = s0 + s1 tanh x_i.
inline SdeModel make_tanh_model(std::string id, ParamMap params, std::size_t dim, double kappa,
                                double c, double s0, double s1)
{
    if (!(kappa > 0.0)) {
        throw Error(ErrorCode::InvalidParams, "kappa must be positive");
    }
    if (std::abs(c) >= kappa) {
        throw Error(ErrorCode::InvalidParams, "|c| >= kappa breaks dissipativity");
    }
    if (s0 <= std::abs(s1)) {
        throw Error(ErrorCode::InvalidParams, "s0 <= |s1| breaks positivity of sigma");
    }
    SdeModel m;
    m.id = std::move(id);
    m.params = std::move(params);
    m.dimension = dim;
    m.drift = [kappa, c, dim](std::span<const double> x, std::span<double> out) {
        for (std::size_t i = 0; i < dim; ++i) {
            out[i] = -kappa * x[i] + c * std::sin(x[i]);
        }
    };
    m.diffusion = [s0, s1, dim](std::span<const double> x, std::span<double> out) {
        std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(dim * dim), 0.0);
        for (std::size_t i = 0; i < dim; ++i) {
            out[i * dim + i] = s0 + s1 * detail::tanh_sech2(x[i])[0];
        }
    };
    m.diffusion_gradient = [s1, dim](std::span<const double> x, std::span<double> out) {
        std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(dim * dim * dim), 0.0);
        for (std::size_t i = 0; i < dim; ++i) {
            out[(i * dim + i) * dim + i] = s1 * detail::tanh_sech2(x[i])[1];
        }
    };
    m.coefficients = [kappa, c, s0, s1, dim](std::span<const double> x, std::span<double> b,
                                             std::span<double> sig, std::span<double> grad) {
        if (dim > 1) {
            std::fill(sig.begin(), sig.begin() + static_cast<std::ptrdiff_t>(dim * dim), 0.0);
            std::fill(grad.begin(), grad.begin() + static_cast<std::ptrdiff_t>(dim * dim * dim), 0.0);
        }
        for (std::size_t i = 0; i < dim; ++i) {
            const auto [t, sech2] = detail::tanh_sech2(x[i]);
            b[i] = -kappa * x[i] + c * std::sin(x[i]);
            sig[i * dim + i] = s0 + s1 * t;
            grad[(i * dim + i) * dim + i] = s1 * sech2;
        }
    };
    // |b'| <= kappa + |c|, |sigma'| <= |s1|; (sin x - sin y)(x - y) <= (x - y)^2.
    m.constants.lipschitz = std::max(kappa + std::abs(c), std::abs(s1));
    m.constants.dissipativity = kappa - std::abs(c);
    m.constants.offset = 0.0;
    m.constants.sigma_sup = s0 + std::abs(s1);
    m.constants.grad_sigma_sup = std::abs(s1);
    m.constants.b0_norm = 0.0;
    m.diagonal_diffusion = true;
    m.additive_noise = (s1 == 0.0);
    return m;
}

} // namespace detail

inline std::vector<std::string> builtin_model_ids() { return {"ou", "tanh1d", "tanhNd"}; }

/// Build a registered model. Parameters (defaults in brackets):
///   ou:     kappa [1], s [1], dim [1]          b = -kappa x, sigma = s I
///   tanh1d: kappa [1], c [0.5], s0 [1], s1 [0.5]
///   tanhNd: same as tanh1d plus dim [2], applied coordinatewise
inline SdeModel builtin_model(const std::string& id, const ParamMap& params = {})
{
    ParamMap rest = params;
    if (id == "ou") {
        const double kappa = detail::take_param(rest, "kappa", 1.0);
        const double s = detail::take_param(rest, "s", 1.0);
        const std::size_t dim = detail::take_dimension(rest, 1.0);
        detail::reject_leftovers(rest, id);
        if (!(kappa > 0.0)) {
            throw Error(ErrorCode::InvalidParams, "kappa must be positive");
        }
        if (!(s > 0.0)) {
            throw Error(ErrorCode::InvalidParams, "s must be positive");
        }
        SdeModel m;
        m.id = id;
        m.params = params;
        m.dimension = dim;
        m.drift = [kappa, dim](std::span<const double> x, std::span<double> out) {
            for (std::size_t i = 0; i < dim; ++i) {
                out[i] = -kappa * x[i];
            }
        };
        m.diffusion = [s, dim](std::span<const double>, std::span<double> out) {
            std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(dim * dim), 0.0);
            for (std::size_t i = 0; i < dim; ++i) {
                out[i * dim + i] = s;
            }
        };
        m.diffusion_gradient = [dim](std::span<const double>, std::span<double> out) {
            std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(dim * dim * dim), 0.0);
        };
        m.constants = {kappa, kappa, 0.0, s, 0.0, 0.0};
        m.diagonal_diffusion = true;
        m.additive_noise = true;
        return m;
    }
    if (id == "tanh1d" || id == "tanhNd") {
        const double kappa = detail::take_param(rest, "kappa", 1.0);
        const double c = detail::take_param(rest, "c", 0.5);
        const double s0 = detail::take_param(rest, "s0", 1.0);
        const double s1 = detail::take_param(rest, "s1", 0.5);
        const std::size_t dim = id == "tanh1d" ? 1 : detail::take_dimension(rest, 2.0);
        detail::reject_leftovers(rest, id);
        return detail::make_tanh_model(id, params, dim, kappa, c, s0, s1);
    }
    throw Error(ErrorCode::UnknownModelId, "no builtin model '" + id + "'");
}

inline std::vector<std::string> builtin_test_function_ids()
{
    return {"identity", "gauss", "tanh", "cos", "constant"};
}

/// Registered test functions:
///   identity: h = x (unbounded, not C_b^2)
///   gauss:    h = exp(-(x - center)^2 / (2 width^2)), center [0], width [1]
///   tanh:     h = tanh(scale x), scale [1]
///   cos:      h = cos(omega x), omega [1]
///   constant: h = value, value [1]
inline TestFunction builtin_test_function(const std::string& id, const ParamMap& params = {})
{
    ParamMap rest = params;
    TestFunction h;
    h.id = id;
    h.params = params;
    if (id == "identity") {
        detail::reject_leftovers(rest, id);
        h.value = [](double x) { return x; };
        h.first = [](double) { return 1.0; };
        h.second = [](double) { return 0.0; };
        h.bounded = false;
        return h;
    }
    if (id == "gauss") {
        const double a = detail::take_param(rest, "center", 0.0);
        const double w = detail::take_param(rest, "width", 1.0);
        detail::reject_leftovers(rest, id);
        if (!(w > 0.0)) {
            throw Error(ErrorCode::InvalidParams, "width must be positive");
        }
        const double iw2 = 1.0 / (w * w);
        h.value = [a, iw2](double x) { return std::exp(-0.5 * (x - a) * (x - a) * iw2); };
        h.first = [a, iw2](double x) {
            return -(x - a) * iw2 * std::exp(-0.5 * (x - a) * (x - a) * iw2);
        };
        h.second = [a, iw2](double x) {
            const double u = (x - a) * (x - a) * iw2;
            return (u - 1.0) * iw2 * std::exp(-0.5 * u);
        };
        return h;
    }
    if (id == "tanh") {
        const double s = detail::take_param(rest, "scale", 1.0);
        detail::reject_leftovers(rest, id);
        h.value = [s](double x) { return std::tanh(s * x); };
        h.first = [s](double x) {
            const double t = std::tanh(s * x);
            return s * (1.0 - t * t);
        };
        h.second = [s](double x) {
            const double t = std::tanh(s * x);
            return -2.0 * s * s * t * (1.0 - t * t);
        };
        return h;
    }
    if (id == "cos") {
        const double w = detail::take_param(rest, "omega", 1.0);
        detail::reject_leftovers(rest, id);
        h.value = [w](double x) { return std::cos(w * x); };
        h.first = [w](double x) { return -w * std::sin(w * x); };
        h.second = [w](double x) { return -w * w * std::cos(w * x); };
        return h;
    }
    if (id == "constant") {
        const double v = detail::take_param(rest, "value", 1.0);
        detail::reject_leftovers(rest, id);
        h.value = [v](double) { return v; };
        h.first = [](double) { return 0.0; };
        h.second = [](double) { return 0.0; };
        return h;
    }
    throw Error(ErrorCode::UnknownTestFunctionId, "no builtin test function '" + id + "'");
}

/// lambda * h.
inline TestFunction scaled(const TestFunction& h, double lambda)
{
    TestFunction out = h;
    out.id = h.id + "*" + std::to_string(lambda);
    out.value = [f = h.value, lambda](double x) { return lambda * f(x); };
    out.first = [f = h.first, lambda](double x) { return lambda * f(x); };
    out.second = [f = h.second, lambda](double x) { return lambda * f(x); };
    return out;
}

// ---------------------------------------------------------------------------
// assumption validation

/// Sampling box for validate_assumptions. `lower`/`upper` hold one entry
/// (applied to every coordinate) or one per coordinate.
struct SamplingSpec {
    std::vector<double> lower{-10.0};
    std::vector<double> upper{10.0};
    std::size_t points = 10000;
    std::size_t pairs = 10000;
    std::uint64_t seed = 1;
};

struct Offender {
    double margin = 0.0;  // slack of the inequality; negative means violated
    std::vector<double> x;
    std::vector<double> y;  // empty for one-point checks
};

struct ValidationReport {
    bool constants_ok = false;
    bool lipschitz_ok = true;
    bool dissipativity_ok = true;
    bool one_point_ok = true;
    bool positivity_ok = true;
    bool symmetry_ok = true;
    bool sigma_bound_ok = true;
    bool grad_sigma_bound_ok = true;
    /// max ||grad sigma|| > 0 on the grid (Milstein differs from EM).
    bool multiplicative_noise = false;

    double min_sigma_eigenvalue = 0.0;
    double max_sigma_norm = 0.0;
    double max_grad_sigma_norm = 0.0;
    /// Estimates from samples; reported only, never fed back.
    double lipschitz_estimate = 0.0;
    double dissipativity_estimate = 0.0;

    Offender worst_lipschitz;
    Offender worst_dissipativity;
    Offender worst_one_point;
    Offender worst_positivity;

    bool ok() const
    {
        return constants_ok && lipschitz_ok && dissipativity_ok && one_point_ok && positivity_ok &&
               symmetry_ok && sigma_bound_ok && grad_sigma_bound_ok;
    }
};

namespace detail {

using MatX = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline double operator_norm(const MatX& a)
{
    if (a.rows() == 1) {
        return std::abs(a(0, 0));
    }
    Eigen::JacobiSVD<MatX> svd(a);
    return svd.singularValues()(0);
}

inline void require_finite(std::span<const double> v, const char* what)
{
    for (double e : v) {
        if (!std::isfinite(e)) {
            throw Error(ErrorCode::NonFiniteEvaluation, std::string(what) + " returned a non-finite value");
        }
    }
}

inline double norm2(std::span<const double> v)
{
    double s = 0.0;
    for (double e : v) {
        s += e * e;
    }
    return std::sqrt(s);
}

/// Lower estimate of sup_{|v|=1} ||sum_l v_l d sigma / d x^l|| from the
/// coordinate directions plus a handful of fixed diagonal directions.
inline double grad_sigma_norm(std::span<const double> grad, std::size_t d)
{
    MatX slice(d, d);
    double best = 0.0;
    auto directional = [&](std::span<const double> v) {
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                double s = 0.0;
                for (std::size_t l = 0; l < d; ++l) {
                    s += v[l] * grad[(i * d + j) * d + l];
                }
                slice(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s;
            }
        }
        best = std::max(best, operator_norm(slice));
    };
    std::vector<double> v(d, 0.0);
    for (std::size_t l = 0; l < d; ++l) {
        std::fill(v.begin(), v.end(), 0.0);
        v[l] = 1.0;
        directional(v);
    }
    if (d > 1) {
        const double inv = 1.0 / std::sqrt(static_cast<double>(d));
        std::fill(v.begin(), v.end(), inv);
        directional(v);
        for (std::size_t l = 0; l < d; l += 2) {
            v[l] = -inv;
        }
        directional(v);
    }
    return best;
}

} // namespace detail

/// Certify the standing assumptions of `model` on a sampled box: Lipschitz
/// continuity of b and sigma, dissipativity of b, the derived one-point
/// bound <x, b(x)> <= -(K1/2)|x|^2 + K2 + |b(0)|^2/(2 K1), and positive
/// definiteness / boundedness of sigma. Verdicts use the declared constants.
inline ValidationReport validate_assumptions(const SdeModel& model, const SamplingSpec& grid)
{
    const std::size_t d = model.dimension;
    if (grid.points == 0 || grid.pairs == 0) {
        throw Error(ErrorCode::EmptyGrid, "validation grid needs at least one point and one pair");
    }
    auto bound = [&](const std::vector<double>& v, std::size_t i) {
        if (v.size() == 1) {
            return v[0];
        }
        if (v.size() != d) {
            throw Error(ErrorCode::DimensionMismatch, "box bounds must have 1 or d entries");
        }
        return v[i];
    };
    for (std::size_t i = 0; i < d; ++i) {
        if (!(bound(grid.lower, i) < bound(grid.upper, i))) {
            throw Error(ErrorCode::EmptyGrid, "box has empty extent in coordinate " + std::to_string(i));
        }
    }

    const ModelConstants& k = model.constants;
    ValidationReport rep;
    rep.constants_ok = k.consistent();

    const NoiseStream uniforms(grid.seed, 0, 1, NoiseLane::Sampling);
    std::uint64_t counter = 0;
    auto sample_point = [&](std::vector<double>& x) {
        for (std::size_t i = 0; i < d; ++i) {
            const double lo = bound(grid.lower, i);
            const double hi = bound(grid.upper, i);
            x[i] = lo + (hi - lo) * uniforms.uniform_at(counter++);
        }
    };

    std::vector<double> x(d), y(d), bx(d), by(d), sx(d * d), sy(d * d), gx(d * d * d);
    const double tol = 1e-10;

    // One-point checks: positivity, bounds, and the derived drift bound.
    rep.min_sigma_eigenvalue = std::numeric_limits<double>::infinity();
    rep.worst_one_point.margin = std::numeric_limits<double>::infinity();
    rep.worst_positivity.margin = std::numeric_limits<double>::infinity();
    const double one_point_const =
        k.dissipativity > 0.0 ? k.offset + k.b0_norm * k.b0_norm / (2.0 * k.dissipativity)
                              : std::numeric_limits<double>::infinity();
    detail::MatX sig(d, d);
    for (std::size_t p = 0; p < grid.points; ++p) {
        sample_point(x);
        model.drift(x, bx);
        model.diffusion(x, sx);
        model.diffusion_gradient(x, gx);
        detail::require_finite(bx, "drift");
        detail::require_finite(sx, "diffusion");
        detail::require_finite(gx, "diffusion_gradient");

        double xb = 0.0;
        double xx = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            xb += x[i] * bx[i];
            xx += x[i] * x[i];
        }
        const double margin = -0.5 * k.dissipativity * xx + one_point_const - xb;
        if (margin < rep.worst_one_point.margin) {
            rep.worst_one_point = {margin, x, {}};
        }
        if (margin < -tol * (1.0 + std::abs(xb))) {
            rep.one_point_ok = false;
        }

        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                sig(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = sx[i * d + j];
            }
        }
        const double asym = (sig - sig.transpose()).cwiseAbs().maxCoeff();
        if (asym > 1e-12 * (1.0 + sig.cwiseAbs().maxCoeff())) {
            rep.symmetry_ok = false;
        }
        const detail::MatX sym = 0.5 * (sig + sig.transpose());
        const double min_eig = d == 1 ? sym(0, 0)
                                      : Eigen::SelfAdjointEigenSolver<detail::MatX>(sym).eigenvalues()(0);
        rep.min_sigma_eigenvalue = std::min(rep.min_sigma_eigenvalue, min_eig);
        if (min_eig < rep.worst_positivity.margin) {
            rep.worst_positivity = {min_eig, x, {}};
        }
        if (!(min_eig > 0.0)) {
            rep.positivity_ok = false;
        }
        const double snorm = detail::operator_norm(sig);
        rep.max_sigma_norm = std::max(rep.max_sigma_norm, snorm);
        if (snorm > k.sigma_sup * (1.0 + tol) + tol) {
            rep.sigma_bound_ok = false;
        }
        const double gnorm = detail::grad_sigma_norm(gx, d);
        rep.max_grad_sigma_norm = std::max(rep.max_grad_sigma_norm, gnorm);
        if (gnorm > k.grad_sigma_sup * (1.0 + tol) + tol) {
            rep.grad_sigma_bound_ok = false;
        }
    }
    rep.multiplicative_noise = rep.max_grad_sigma_norm > 0.0;

    // Pair checks: Lipschitz and dissipativity.
    rep.worst_lipschitz.margin = std::numeric_limits<double>::infinity();
    rep.worst_dissipativity.margin = std::numeric_limits<double>::infinity();
    rep.dissipativity_estimate = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < grid.pairs; ++p) {
        sample_point(x);
        sample_point(y);
        model.drift(x, bx);
        model.drift(y, by);
        model.diffusion(x, sx);
        model.diffusion(y, sy);
        detail::require_finite(bx, "drift");
        detail::require_finite(by, "drift");
        detail::require_finite(sx, "diffusion");
        detail::require_finite(sy, "diffusion");

        double dxx = 0.0;
        double dbb = 0.0;
        double inner = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double dx = x[i] - y[i];
            const double db = bx[i] - by[i];
            dxx += dx * dx;
            dbb += db * db;
            inner += db * dx;
        }
        if (dxx == 0.0) {
            continue;
        }
        for (std::size_t i = 0; i < d * d; ++i) {
            sig.data()[i] = sx[i] - sy[i];
        }
        const double dist = std::sqrt(dxx);
        const double lhs = std::max(std::sqrt(dbb), detail::operator_norm(sig));
        const double lip_margin = k.lipschitz * dist - lhs;
        rep.lipschitz_estimate = std::max(rep.lipschitz_estimate, lhs / dist);
        if (lip_margin < rep.worst_lipschitz.margin) {
            rep.worst_lipschitz = {lip_margin, x, y};
        }
        if (lip_margin < -tol * (1.0 + lhs)) {
            rep.lipschitz_ok = false;
        }

        const double dis_margin = -k.dissipativity * dxx + k.offset - inner;
        rep.dissipativity_estimate = std::min(rep.dissipativity_estimate, -inner / dxx);
        if (dis_margin < rep.worst_dissipativity.margin) {
            rep.worst_dissipativity = {dis_margin, x, y};
        }
        if (dis_margin < -tol * (1.0 + std::abs(inner))) {
            rep.dissipativity_ok = false;
        }
    }
    return rep;
}

} // namespace mmdp
