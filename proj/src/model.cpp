/*
 Copyright 2026 The quadform Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#include "quadform/model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace quadform
{
    namespace
    {
        // SplitMix64 finalizer; a bijective 64-bit mixer.
        std::uint64_t mix64(std::uint64_t x)
        {
            x += 0x9e3779b97f4a7c15ULL;
            x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
            x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
            return x ^ (x >> 31);
        }

        // Uniform in (0, 1), never exactly 0 so the logarithm below stays finite.
        double counter_uniform(std::uint64_t seed, std::uint64_t counter)
        {
            const std::uint64_t bits = mix64(seed ^ mix64(counter));
            return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
        }

        void require_finite_positive(double value, const char *name)
        {
            if (!std::isfinite(value) || value <= 0.0)
            {
                throw std::invalid_argument(std::string(name) + " must be finite and positive, got " +
                                            std::to_string(value));
            }
        }
    } // namespace

    void QuadParams::validate() const
    {
        require_finite_positive(mass, "mass");
        require_finite_positive(inertia_xx, "inertia_xx");
        require_finite_positive(gravity, "gravity");
    }

    void NoiseSpec::validate() const
    {
        if (!std::isfinite(mean))
            throw std::invalid_argument("noise mean must be finite");
        if (!std::isfinite(std_dev) || std_dev < 0.0)
            throw std::invalid_argument("noise std_dev must be finite and non-negative");
        if (!gain.allFinite())
            throw std::invalid_argument("noise gain entries must be finite");
    }

    StateSpaceModel build_state_space(const QuadParams &params)
    {
        params.validate();
        StateSpaceModel model;
        model.params = params;

        // Position derivatives are the velocities.
        model.a_matrix(kY, kYDot) = 1.0;
        model.a_matrix(kZ, kZDot) = 1.0;
        model.a_matrix(kPhi, kPhiDot) = 1.0;
        // y_ddot = -g phi
        model.a_matrix(kYDot, kPhi) = -params.gravity;

        model.b_matrix(kZDot, 0) = 1.0 / params.mass;
        model.b_matrix(kPhiDot, 1) = 1.0 / params.inertia_xx;

        model.gravity_vector(kZDot) = -params.gravity;
        return model;
    }

    Vector6d derivative(const StateSpaceModel &model, const AgentState &state, const ControlInput &input,
                        const Vector6d &noise_sample)
    {
        Vector6d xdot = model.a_matrix * state.values + model.b_matrix * input.values + model.gravity_vector;
        if (!noise_sample.isZero(0.0))
            xdot.noalias() += model.noise_gain * noise_sample;
        if (!xdot.allFinite())
            throw std::domain_error("non-finite state derivative");
        return xdot;
    }

    AgentState step_rk4(const StateSpaceModel &model, const AgentState &state, const ControlInput &input,
                        const Vector6d &noise_sample, double dt)
    {
        return step_rk4(model, state, InputProfile([&input](double) { return input; }), noise_sample, dt);
    }

    AgentState step_rk4(const StateSpaceModel &model, const AgentState &state, const InputProfile &input,
                        const Vector6d &noise_sample, double dt)
    {
        if (!(dt > 0.0) || !std::isfinite(dt))
            throw std::invalid_argument("integration step must be positive, got " + std::to_string(dt));

        const ControlInput u0 = input(0.0);
        const ControlInput um = input(0.5 * dt);
        const ControlInput u1 = input(dt);

        const Vector6d &x = state.values;
        const Vector6d k1 = derivative(model, state, u0, noise_sample);
        const Vector6d k2 = derivative(model, AgentState(x + 0.5 * dt * k1), um, noise_sample);
        const Vector6d k3 = derivative(model, AgentState(x + 0.5 * dt * k2), um, noise_sample);
        const Vector6d k4 = derivative(model, AgentState(x + dt * k3), u1, noise_sample);
        return AgentState(x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
    }

    Vector6d sample_noise(const NoiseSpec &spec, std::uint64_t stream_position)
    {
        Vector6d w = Vector6d::Zero();
        if (spec.std_dev == 0.0 && spec.mean == 0.0)
            return w;

        // Box-Muller on two counter-derived uniforms per channel.
        constexpr int rows[3] = {kYDot, kZDot, kPhiDot};
        const std::uint64_t base = stream_position * 8;
        for (int c = 0; c < 3; ++c)
        {
            const double u1 = counter_uniform(spec.seed, base + 2 * c);
            const double u2 = counter_uniform(spec.seed, base + 2 * c + 1);
            const double normal = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
            w(rows[c]) = spec.mean + spec.std_dev * normal;
        }
        return w;
    }

    std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t agent_index, std::uint64_t trial_index)
    {
        return mix64(mix64(seed) ^ mix64(0x5a17ULL + agent_index) ^ mix64(0xc0ffee00ULL + (trial_index << 20)));
    }

} // namespace quadform
