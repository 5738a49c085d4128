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
#ifndef QUADFORM_MODEL_HPP
#define QUADFORM_MODEL_HPP

#include <cstdint>
#include <functional>

#include <Eigen/Dense>

namespace quadform
{
    using Vector6d = Eigen::Matrix<double, 6, 1>;
    using Matrix6d = Eigen::Matrix<double, 6, 6>;
    using Matrix62d = Eigen::Matrix<double, 6, 2>;
    using Position = Eigen::Vector2d;

    inline constexpr int kStateDim = 6;
    inline constexpr int kControlDim = 2;

    // State ordering is fixed: [y, y_dot, z, z_dot, phi, phi_dot].
    enum StateIndex : int
    {
        kY = 0,
        kYDot = 1,
        kZ = 2,
        kZDot = 3,
        kPhi = 4,
        kPhiDot = 5,
    };

    struct QuadParams
    {
        double mass = 0.028;           // kg
        double inertia_xx = 6.4893e-6; // kg m^2
        double gravity = 9.81;         // m/s^2

        /// Throws std::invalid_argument on non-positive or non-finite values.
        void validate() const;
        bool operator==(const QuadParams &) const = default;
    };

    /// Planar quadrotor state.
    struct AgentState
    {
        Vector6d values = Vector6d::Zero();

        AgentState() = default;
        explicit AgentState(const Vector6d &v) : values(v) {}
        static AgentState from(double y, double y_dot, double z, double z_dot, double phi, double phi_dot)
        {
            Vector6d v;
            v << y, y_dot, z, z_dot, phi, phi_dot;
            return AgentState(v);
        }

        double y() const { return values(kY); }
        double y_dot() const { return values(kYDot); }
        double z() const { return values(kZ); }
        double z_dot() const { return values(kZDot); }
        double phi() const { return values(kPhi); }
        double phi_dot() const { return values(kPhiDot); }

        /// Projection onto the YZ-plane position.
        Position position() const { return {values(kY), values(kZ)}; }
        bool is_finite() const { return values.allFinite(); }
    };

    /// Collective thrust u1 [N] and roll torque u2 [N m].
    struct ControlInput
    {
        Eigen::Vector2d values = Eigen::Vector2d::Zero();

        ControlInput() = default;
        explicit ControlInput(const Eigen::Vector2d &v) : values(v) {}
        ControlInput(double thrust, double torque) : values(thrust, torque) {}

        double u1() const { return values(0); }
        double u2() const { return values(1); }
    };

    /// Additive white Gaussian disturbance on the y, z and phi accelerations.
    struct NoiseSpec
    {
        double mean = 0.0;
        double std_dev = 0.2;
        std::uint64_t seed = 0;
        Matrix6d gain = Matrix6d::Identity();

        void validate() const;
    };

    /// x_dot = A x + B u + G_c g + K w, linearized at hover.
    struct StateSpaceModel
    {
        Matrix6d a_matrix = Matrix6d::Zero();
        Matrix62d b_matrix = Matrix62d::Zero();
        Vector6d gravity_vector = Vector6d::Zero(); // G_c * g
        Matrix6d noise_gain = Matrix6d::Identity();
        QuadParams params;

        ControlInput hover_input() const { return {params.mass * params.gravity, 0.0}; }
    };

    StateSpaceModel build_state_space(const QuadParams &params);

    /// Evaluates A x + B u + G_c g + K w.
    Vector6d derivative(const StateSpaceModel &model, const AgentState &state, const ControlInput &input,
                        const Vector6d &noise_sample = Vector6d::Zero());

    /// Control as a function of the offset into the current step, tau in [0, dt].
    using InputProfile = std::function<ControlInput(double tau)>;

    /// Classical RK4 step with the input and the noise sample held constant over the step.
    AgentState step_rk4(const StateSpaceModel &model, const AgentState &state, const ControlInput &input,
                        const Vector6d &noise_sample, double dt);

    /// RK4 step evaluating the input profile at the stage times (0, dt/2, dt/2, dt).
    /// The noise sample is held constant over the step.
    AgentState step_rk4(const StateSpaceModel &model, const AgentState &state, const InputProfile &input,
                        const Vector6d &noise_sample, double dt);

    /// Structured noise vector [0, w1, 0, w2, 0, w3] with w_j ~ N(mean, std_dev^2).
    /// Pure function of (spec.seed, stream_position); the gain is not applied here.
    Vector6d sample_noise(const NoiseSpec &spec, std::uint64_t stream_position);

    /// Independent sub-seed for one agent within one Monte-Carlo trial.
    std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t agent_index, std::uint64_t trial_index);

} // namespace quadform

#endif // QUADFORM_MODEL_HPP
