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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmdp/error.hpp"
#include "mmdp/model.hpp"
#include "mmdp/noise.hpp"

namespace mmdp {

enum class Scheme { EulerMaruyama, Milstein };

inline std::string_view to_string(Scheme s)
{
    return s == Scheme::Milstein ? "milstein" : "em";
}

/// Number of steps m = [eta^-2]. The small guard absorbs representation
/// error so that e.g. eta = 0.1 gives 100, not 99.
inline std::uint64_t default_steps(double eta)
{
    return static_cast<std::uint64_t>(std::floor(1.0 / (eta * eta) + 1e-9));
}

/// theta_0: a fixed point, or Gaussian N(mean, std^2 I) drawn from the
/// InitialState lane of the replica's stream.
struct InitialCondition {
    enum class Kind { Fixed, Gaussian };
    Kind kind = Kind::Fixed;
    std::vector<double> mean{0.0};  // 1 entry (broadcast) or d entries
    double std_dev = 0.0;

    static InitialCondition fixed(std::vector<double> x) { return {Kind::Fixed, std::move(x), 0.0}; }
    static InitialCondition gaussian(std::vector<double> mean, double std_dev)
    {
        return {Kind::Gaussian, std::move(mean), std_dev};
    }

    std::vector<double> sample(std::size_t dim, std::uint64_t master_seed, std::uint64_t replica) const
    {
        if (mean.size() != 1 && mean.size() != dim) {
            throw Error(ErrorCode::DimensionMismatch, "initial state must have 1 or d entries");
        }
        std::vector<double> x(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            x[i] = mean.size() == 1 ? mean[0] : mean[i];
        }
        if (kind == Kind::Gaussian) {
            if (!(std_dev >= 0.0)) {
                throw Error(ErrorCode::InvalidParams, "initial std must be non-negative");
            }
            const NoiseStream draw(master_seed, replica, dim, NoiseLane::InitialState);
            for (std::size_t i = 0; i < dim; ++i) {
                x[i] += std_dev * draw.normal_at(i);
            }
        }
        return x;
    }
};

struct ChainConfig {
    double eta = 0.01;
    std::optional<std::uint64_t> steps;  // unset means [eta^-2]
    InitialCondition initial;
    Scheme scheme = Scheme::Milstein;

    std::uint64_t resolved_steps() const { return steps ? *steps : default_steps(eta); }

    void validate() const
    {
        if (!(eta > 0.0 && eta < 1.0)) {
            throw Error(ErrorCode::InvalidParams, "eta must lie in (0, 1)");
        }
    }
};

/// Allocation-free one-step integrator bound to a model. After `advance`
/// the coefficients evaluated at the pre-step state stay readable, which the
/// estimator uses to assemble its statistics without re-evaluating.
class Stepper {
public:
    Stepper(const SdeModel& model, Scheme scheme)
        : model_(&model),
          scheme_(scheme),
          d_(model.dimension),
          drift_(d_),
          sigma_(d_ * d_),
          grad_(d_ * d_ * d_),
          sigma_xi_(d_),
          correction_(d_, 0.0)
    {
    }

    std::size_t dimension() const noexcept { return d_; }
    Scheme scheme() const noexcept { return scheme_; }

    /// out = theta + eta b + sqrt(eta) sigma xi [+ (eta/2) R(theta, xi)].
    /// `out` must not alias `theta`.
    void advance(std::span<const double> theta, std::span<const double> xi, double eta,
                 std::span<double> out)
    {
        const bool milstein = scheme_ == Scheme::Milstein && !model_->additive_noise;
        if (milstein && model_->coefficients) {
            model_->coefficients(theta, drift_, sigma_, grad_);
        } else {
            model_->drift(theta, drift_);
            model_->diffusion(theta, sigma_);
            if (milstein) {
                model_->diffusion_gradient(theta, grad_);
            }
        }
        const double sqrt_eta = std::sqrt(eta);
        if (d_ == 1) {
            // Same operation order as the general loops below, so both paths
            // agree bitwise.
            double s = 0.0;
            s += sigma_[0] * xi[0];
            sigma_xi_[0] = s;
            out[0] = theta[0] + eta * drift_[0] + sqrt_eta * s;
            double r = 0.0;
            if (milstein) {
                const double g = grad_[0];
                double dir = 0.0;
                double centre = 0.0;
                dir += s * g;
                centre += sigma_[0] * g;
                double quad = 0.0;
                double mean = 0.0;
                quad += dir * xi[0];
                mean += centre;
                r = quad - mean;
                if (r != 0.0) {
                    out[0] += 0.5 * eta * r;
                }
            }
            correction_[0] = r;
            return;
        }
        for (std::size_t i = 0; i < d_; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < d_; ++j) {
                s += sigma_[i * d_ + j] * xi[j];
            }
            sigma_xi_[i] = s;
            out[i] = theta[i] + eta * drift_[i] + sqrt_eta * s;
        }
        if (milstein) {
            correction_from_coefficients(xi, correction_);
            for (std::size_t i = 0; i < d_; ++i) {
                // Adding an exact zero could still flip -0.0; skip it.
                if (correction_[i] != 0.0) {
                    out[i] += 0.5 * eta * correction_[i];
                }
            }
        } else {
            std::fill(correction_.begin(), correction_.end(), 0.0);
        }
    }

    /// Milstein correction R(theta, xi) computed from freshly evaluated coefficients.
    void correction(std::span<const double> theta, std::span<const double> xi, std::span<double> out)
    {
        model_->diffusion(theta, sigma_);
        model_->diffusion_gradient(theta, grad_);
        for (std::size_t i = 0; i < d_; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < d_; ++j) {
                s += sigma_[i * d_ + j] * xi[j];
            }
            sigma_xi_[i] = s;
        }
        correction_from_coefficients(xi, out);
    }

    std::span<const double> drift() const noexcept { return drift_; }
    std::span<const double> sigma() const noexcept { return sigma_; }
    /// sigma(theta) xi from the last advance.
    std::span<const double> sigma_xi() const noexcept { return sigma_xi_; }
    /// Correction actually applied in the last advance (zero for EM).
    std::span<const double> applied_correction() const noexcept { return correction_; }

private:
    // R_i = sum_{j1,j2,l} sigma_{l,j1} d_l sigma_{i,j2} xi_j1 xi_j2
    //     - sum_{j,l} sigma_{l,j} d_l sigma_{i,j}
    // using (sigma xi)_l = sum_j1 sigma_{l,j1} xi_j1 already in sigma_xi_.
    void correction_from_coefficients(std::span<const double> xi, std::span<double> out) const
    {
        const std::size_t d = d_;
        for (std::size_t i = 0; i < d; ++i) {
            double quad = 0.0;
            double mean = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                double dir = 0.0;
                double centre = 0.0;
                for (std::size_t l = 0; l < d; ++l) {
                    const double g = grad_[(i * d + j) * d + l];
                    dir += sigma_xi_[l] * g;
                    centre += sigma_[l * d + j] * g;
                }
                quad += dir * xi[j];
                mean += centre;
            }
            out[i] = quad - mean;
        }
    }

    const SdeModel* model_;
    Scheme scheme_;
    std::size_t d_;
    std::vector<double> drift_;
    std::vector<double> sigma_;
    std::vector<double> grad_;
    std::vector<double> sigma_xi_;
    std::vector<double> correction_;
};

namespace detail {

inline void check_dims(const SdeModel& model, std::span<const double> theta, std::span<const double> xi)
{
    if (theta.size() != model.dimension || xi.size() != model.dimension) {
        throw Error(ErrorCode::DimensionMismatch, "state/noise dimension differs from model dimension");
    }
}

inline void check_finite_state(std::span<const double> v)
{
    for (double e : v) {
        if (!std::isfinite(e)) {
            throw Error(ErrorCode::NonFiniteEvaluation, "step produced a non-finite state");
        }
    }
}

} // namespace detail

/// Euler-Maruyama step theta + eta b(theta) + sqrt(eta) sigma(theta) xi.
inline std::vector<double> em_step(const SdeModel& model, std::span<const double> theta,
                                   std::span<const double> xi, double eta)
{
    detail::check_dims(model, theta, xi);
    Stepper stepper(model, Scheme::EulerMaruyama);
    std::vector<double> out(model.dimension);
    stepper.advance(theta, xi, eta, out);
    detail::check_finite_state(out);
    return out;
}

/// R(theta, xi); reduces to sigma sigma' (xi^2 - 1) in one dimension.
inline std::vector<double> milstein_correction(const SdeModel& model, std::span<const double> theta,
                                               std::span<const double> xi)
{
    detail::check_dims(model, theta, xi);
    Stepper stepper(model, Scheme::Milstein);
    std::vector<double> out(model.dimension);
    stepper.correction(theta, xi, out);
    detail::check_finite_state(out);
    return out;
}

inline std::vector<double> milstein_step(const SdeModel& model, std::span<const double> theta,
                                         std::span<const double> xi, double eta)
{
    detail::check_dims(model, theta, xi);
    Stepper stepper(model, Scheme::Milstein);
    std::vector<double> out(model.dimension);
    stepper.advance(theta, xi, eta, out);
    detail::check_finite_state(out);
    return out;
}

/// Per-step view handed to simulate_chain observers.
struct StepView {
    std::uint64_t k;
    std::span<const double> theta;       // theta_k
    std::span<const double> xi;          // xi_{k+1}
    std::span<const double> next;        // theta_{k+1}
    const Stepper& stepper;              // coefficients at theta_k
};

/// Run `config.resolved_steps()` steps from `theta0`, streaming each
/// transition to `observer(const StepView&)`. Nothing is stored.
template <typename Observer>
std::vector<double> simulate_chain(const SdeModel& model, const ChainConfig& config,
                                   std::span<const double> theta0, const NoiseStream& noise,
                                   Observer&& observer)
{
    config.validate();
    const std::size_t d = model.dimension;
    if (theta0.size() != d || noise.dim() != d) {
        throw Error(ErrorCode::DimensionMismatch, "initial state / noise dimension mismatch");
    }
    Stepper stepper(model, config.scheme);
    std::vector<double> cur(theta0.begin(), theta0.end());
    std::vector<double> next(d);
    const std::uint64_t m = config.resolved_steps();
    // Noise is generated a block of steps ahead; independent of the state,
    // it pipelines better than one draw per step.
    constexpr std::uint64_t block = 256;
    std::vector<double> buffer(block * d);
    std::uint64_t block_start = 0;
    for (std::uint64_t k = 0; k < m; ++k) {
        if (k % block == 0) {
            block_start = k;
            const std::uint64_t steps = std::min(block, m - k);
            noise.fill_range(k * d, std::span(buffer).first(steps * d));
        }
        const std::span<const double> xi(buffer.data() + (k - block_start) * d, d);
        stepper.advance(cur, xi, config.eta, next);
        for (std::size_t i = 0; i < d; ++i) {
            if (!std::isfinite(next[i])) {
                throw DivergenceError(k, "non-finite state in chain");
            }
        }
        observer(StepView{k, cur, xi, next, stepper});
        cur.swap(next);
    }
    return cur;
}

/// Convenience overload drawing theta_0 from the config's initial condition.
template <typename Observer>
std::vector<double> simulate_chain(const SdeModel& model, const ChainConfig& config,
                                   std::uint64_t master_seed, std::uint64_t replica,
                                   Observer&& observer)
{
    const auto theta0 = config.initial.sample(model.dimension, master_seed, replica);
    const NoiseStream noise(master_seed, replica, model.dimension);
    return simulate_chain(model, config, theta0, noise, std::forward<Observer>(observer));
}

inline std::vector<double> simulate_chain(const SdeModel& model, const ChainConfig& config,
                                          std::uint64_t master_seed, std::uint64_t replica)
{
    return simulate_chain(model, config, master_seed, replica, [](const StepView&) {});
}

} // namespace mmdp
