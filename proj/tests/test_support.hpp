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
#ifndef QUADFORM_TEST_SUPPORT_HPP
#define QUADFORM_TEST_SUPPORT_HPP

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "quadform/coordinator.hpp"
#include "quadform/ocp.hpp"
#include "quadform/scenario.hpp"
#include "quadform/solver.hpp"

namespace quadform::testkit
{
    /// The leader problem of the default scenario, built the same way the planner builds it.
    inline OcpProblem default_leader_problem(const ScenarioConfig &config = ScenarioConfig{})
    {
        const FormationSpec spec = make_formation(config);
        const LeaderReference reference = make_leader_reference(config);
        const auto initial = make_initial_states(config);
        std::vector<std::vector<Position>> partners(spec.agent_count());
        return build_agent_problem(spec, spec.leader_index(), reference, initial, partners, reference.terminal_state,
                                   make_fleet_settings(config));
    }

    /// A follower problem of the default scenario with partners at their nominal offsets from the reference.
    inline OcpProblem default_follower_problem(int follower, const ScenarioConfig &config = ScenarioConfig{})
    {
        const FormationSpec spec = make_formation(config);
        const LeaderReference reference = make_leader_reference(config);
        const auto initial = make_initial_states(config);
        std::vector<std::vector<Position>> partners(spec.agent_count());
        for (int a = 0; a < spec.agent_count(); ++a)
            for (const auto &p : reference.positions)
                partners[a].push_back(p + spec.offset(a));
        AgentState target = reference.terminal_state;
        target.values(kY) += spec.offset(follower)(0);
        target.values(kZ) += spec.offset(follower)(1);
        return build_agent_problem(spec, follower, reference, initial, partners, target, make_fleet_settings(config));
    }

    /// Random plan on the problem's grid: node 0 at the initial state, states O(scale), controls inside their boxes.
    inline TrajectoryPlan random_plan(const OcpProblem &problem, std::mt19937_64 &rng, double scale = 0.5)
    {
        std::normal_distribution<double> normal(0.0, scale);
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        TrajectoryPlan plan;
        plan.times = problem.times();
        for (int k = 0; k < problem.node_count; ++k)
        {
            Vector6d x;
            for (int i = 0; i < kStateDim; ++i)
                x(i) = normal(rng);
            plan.states.emplace_back(k == 0 ? problem.initial_state.values : x);
            plan.controls.emplace_back(problem.u1_bound * unit(rng), problem.u2_bound * unit(rng));
        }
        return plan;
    }

    /// Exact affine LTI flow x' = M x + c over time t, via the augmented matrix exponential.
    template <int N>
    Eigen::Matrix<double, N, 1> exact_affine_flow(const Eigen::Matrix<double, N, N> &M,
                                                  const Eigen::Matrix<double, N, 1> &c,
                                                  const Eigen::Matrix<double, N, 1> &x0, double t)
    {
        Eigen::Matrix<double, N + 1, N + 1> aug = Eigen::Matrix<double, N + 1, N + 1>::Zero();
        aug.template topLeftCorner<N, N>() = M * t;
        aug.template topRightCorner<N, 1>() = c * t;
        const Eigen::Matrix<double, N + 1, N + 1> flow = aug.exp();
        return flow.template topLeftCorner<N, N>() * x0 + flow.template topRightCorner<N, 1>();
    }

    inline double max_abs(const Eigen::VectorXd &v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

    /// Max over coordinates of |g - fd| / max(|g|, |fd|, 1) with central differences of step h.
    inline double gradient_fd_error(const OcpProblem &problem, const Eigen::VectorXd &z, double h = 1e-6)
    {
        const Eigen::VectorXd g = objective_gradient(problem, z);
        double worst = 0.0;
        Eigen::VectorXd probe = z;
        for (Eigen::Index i = 0; i < z.size(); ++i)
        {
            probe(i) = z(i) + h;
            const double up = objective(problem, probe);
            probe(i) = z(i) - h;
            const double down = objective(problem, probe);
            probe(i) = z(i);
            const double fd = (up - down) / (2.0 * h);
            worst = std::max(worst, std::abs(g(i) - fd) / std::max({std::abs(g(i)), std::abs(fd), 1.0}));
        }
        return worst;
    }

    /// Max abs entry of (J - central-difference Jacobian) of the defects.
    inline double jacobian_fd_error(const OcpProblem &problem, const Eigen::VectorXd &z, double h = 1e-6)
    {
        const Eigen::MatrixXd J = Eigen::MatrixXd(defect_jacobian(problem, unflatten(problem, z)));
        double worst = 0.0;
        Eigen::VectorXd probe = z;
        for (Eigen::Index i = 0; i < z.size(); ++i)
        {
            probe(i) = z(i) + h;
            const Eigen::VectorXd up = defect_constraints(problem, probe);
            probe(i) = z(i) - h;
            const Eigen::VectorXd down = defect_constraints(problem, probe);
            probe(i) = z(i);
            const Eigen::VectorXd fd = (up - down) / (2.0 * h);
            worst = std::max(worst, (J.col(i) - fd).cwiseAbs().maxCoeff());
        }
        return worst;
    }

    /**
     * Sinusoidal input u(t) = base + amplitude sin(omega t). The exact flow is
     * obtained by appending an oscillator [s; c] = [sin; cos] to the state so
     * that the whole system stays linear time-invariant.
     */
    struct OscillatingInput
    {
        ControlInput base;
        Eigen::Vector2d amplitude = Eigen::Vector2d::Zero();
        double omega = 1.0;

        ControlInput at(double t) const { return ControlInput(base.values + amplitude * std::sin(omega * t)); }
    };

    inline Vector6d exact_oscillating_flow(const StateSpaceModel &model, const OscillatingInput &input,
                                           const Vector6d &x0, double t)
    {
        using Mat8 = Eigen::Matrix<double, 8, 8>;
        using Vec8 = Eigen::Matrix<double, 8, 1>;
        Mat8 M = Mat8::Zero();
        M.topLeftCorner<6, 6>() = model.a_matrix;
        M.block<6, 1>(0, 6) = model.b_matrix * input.amplitude;
        M(6, 7) = input.omega;
        M(7, 6) = -input.omega;
        Vec8 c = Vec8::Zero();
        c.head<6>() = model.b_matrix * input.base.values + model.gravity_vector;
        Vec8 z0;
        z0 << x0, 0.0, 1.0;
        return exact_affine_flow<8>(M, c, z0, t).head<6>();
    }

    /// Least-squares slope of log(error) against log(step) for RK4 under the oscillating input.
    inline double rk4_convergence_slope(const StateSpaceModel &model, const OscillatingInput &input,
                                        const Vector6d &x0, double horizon, const std::vector<int> &step_counts)
    {
        const Vector6d exact = exact_oscillating_flow(model, input, x0, horizon);
        std::vector<double> log_h;
        std::vector<double> log_e;
        for (int steps : step_counts)
        {
            const double dt = horizon / steps;
            AgentState x(x0);
            for (int k = 0; k < steps; ++k)
            {
                const double t0 = k * dt;
                x = step_rk4(model, x, [&](double tau) { return input.at(t0 + tau); }, Vector6d::Zero(), dt);
            }
            log_h.push_back(std::log(dt));
            log_e.push_back(std::log((x.values - exact).cwiseAbs().maxCoeff()));
        }
        double mean_h = 0.0;
        double mean_e = 0.0;
        for (std::size_t i = 0; i < log_h.size(); ++i)
        {
            mean_h += log_h[i] / log_h.size();
            mean_e += log_e[i] / log_e.size();
        }
        double num = 0.0;
        double den = 0.0;
        for (std::size_t i = 0; i < log_h.size(); ++i)
        {
            num += (log_h[i] - mean_h) * (log_e[i] - mean_e);
            den += (log_h[i] - mean_h) * (log_h[i] - mean_h);
        }
        return num / den;
    }

    /**
     * Leader-only instance with random reference, weights and vertical start.
     * The start is on the reference laterally: a lateral offset makes the
     * unconstrained optimum use large torques, which would activate the input
     * boxes. Callers still check that the optimum is interior.
     */
    inline OcpProblem random_leader_instance(std::mt19937_64 &rng)
    {
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        auto between = [&](double lo, double hi) { return lo + (hi - lo) * uni(rng); };

        OcpProblem problem;
        const QuadParams params;
        problem.model = build_state_space(params);
        SinusoidReference ref;
        ref.amplitude = between(0.2, 0.6);
        ref.angular_frequency = between(0.3, 1.0);
        ref.forward_speed = between(0.0, 0.2);
        ref.base_altitude = between(0.5, 1.5);
        problem.reference_trajectory = ref.sample(problem.times());
        problem.initial_state = ref.state(0.0);
        problem.initial_state.values(kZ) += between(-0.05, 0.05);
        problem.initial_state.values(kZDot) += between(-0.05, 0.05);
        problem.terminal_reference = ref.state(problem.horizon);
        problem.weights.control_weight = Eigen::Vector2d(between(0.5, 2), between(0.5, 2)).asDiagonal();
        problem.weights.tracking_weight = Eigen::Vector2d(between(0.5, 2), between(0.5, 2)).asDiagonal();
        Vector6d p;
        for (int i = 0; i < kStateDim; ++i)
            p(i) = between(0.5, 2.0);
        problem.weights.terminal_weight = p.asDiagonal();
        problem.u1_bound = 1.2 * params.mass * params.gravity;
        problem.u2_bound = 0.1 * params.inertia_xx * M_PI;
        return problem;
    }

    struct OracleSolution
    {
        Eigen::VectorXd z; // node-major [x_k, u_k]
        double objective = 0.0;
    };

    /**
     * Dense equality-constrained quadratic program for a penalty-free problem,
     * assembled here from the problem data alone: trapezoidal running cost,
     * terminal deviation cost, trapezoidal dynamics and the initial condition.
     * Input bounds are ignored, so the caller must check they are inactive.
     */
    inline OracleSolution dense_qp_oracle(const OcpProblem &problem)
    {
        const int n = problem.node_count;
        const int w = kStateDim + kControlDim;
        const int dim = w * n;
        const int rows = kStateDim + kStateDim * (n - 1);
        const double dt = problem.horizon / (n - 1);
        const auto &A = problem.model.a_matrix;
        const auto &B = problem.model.b_matrix;
        const auto &R = problem.weights.control_weight;
        const auto &Q = problem.weights.tracking_weight;
        const auto &P = problem.weights.terminal_weight;

        // cost = 1/2 z'Hz + h'z + c0
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
        Eigen::VectorXd h = Eigen::VectorXd::Zero(dim);
        double c0 = 0.0;
        for (int k = 0; k < n; ++k)
        {
            const double wk = (k == 0 || k == n - 1) ? 0.5 * dt : dt;
            const int u = w * k + kStateDim;
            H.block<2, 2>(u, u) += 2.0 * wk * R;
            const int pos[2] = {w * k + kY, w * k + kZ};
            const Position r = problem.reference_trajectory[k];
            for (int a = 0; a < 2; ++a)
            {
                for (int b = 0; b < 2; ++b)
                    H(pos[a], pos[b]) += 2.0 * wk * Q(a, b);
                h(pos[a]) -= 2.0 * wk * (Q.row(a) * r)(0);
            }
            c0 += wk * r.dot(Q * r);
        }
        const int last = w * (n - 1);
        const Vector6d xt = problem.terminal_reference.values;
        H.block<6, 6>(last, last) += 2.0 * P;
        h.segment<6>(last) -= 2.0 * P * xt;
        c0 += xt.dot(P * xt);

        // C z = d
        Eigen::MatrixXd C = Eigen::MatrixXd::Zero(rows, dim);
        Eigen::VectorXd d = Eigen::VectorXd::Zero(rows);
        C.block<6, 6>(0, 0).setIdentity();
        d.head<6>() = problem.initial_state.values;
        for (int k = 0; k + 1 < n; ++k)
        {
            const int r0 = kStateDim * (k + 1);
            const Matrix6d I = Matrix6d::Identity();
            C.block<6, 6>(r0, w * k) = -I - 0.5 * dt * A;
            C.block<6, 2>(r0, w * k + kStateDim) = -0.5 * dt * B;
            C.block<6, 6>(r0, w * (k + 1)) = I - 0.5 * dt * A;
            C.block<6, 2>(r0, w * (k + 1) + kStateDim) = -0.5 * dt * B;
            d.segment<6>(r0) = dt * problem.model.gravity_vector;
        }

        // Column scaling by the physical input magnitudes keeps the KKT system well conditioned.
        Eigen::VectorXd s = Eigen::VectorXd::Ones(dim);
        for (int k = 0; k < n; ++k)
        {
            s(w * k + kStateDim) = problem.model.params.mass;
            s(w * k + kStateDim + 1) = problem.model.params.inertia_xx;
        }
        const Eigen::MatrixXd Hs = s.asDiagonal() * H * s.asDiagonal();
        const Eigen::MatrixXd Cs = C * s.asDiagonal();

        Eigen::MatrixXd K = Eigen::MatrixXd::Zero(dim + rows, dim + rows);
        K.topLeftCorner(dim, dim) = Hs;
        K.topRightCorner(dim, rows) = Cs.transpose();
        K.bottomLeftCorner(rows, dim) = Cs;
        Eigen::VectorXd rhs(dim + rows);
        rhs << -(s.asDiagonal() * h), d;
        const Eigen::PartialPivLU<Eigen::MatrixXd> lu(K);
        Eigen::VectorXd sol = lu.solve(rhs);
        sol += lu.solve(rhs - K * sol); // one step of iterative refinement

        OracleSolution out;
        out.z = s.asDiagonal() * sol.head(dim);
        out.objective = 0.5 * out.z.dot(H * out.z) + h.dot(out.z) + c0;
        return out;
    }

} // namespace quadform::testkit

#endif // QUADFORM_TEST_SUPPORT_HPP
