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
#include "quadform/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace quadform
{
    namespace
    {
        constexpr int W = DecisionLayout::kNodeWidth;
        constexpr double kCoincidentTol = 1e-9;

        bool is_symmetric(const Eigen::MatrixXd &m)
        {
            return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff());
        }

        bool is_positive_definite(const Eigen::MatrixXd &m)
        {
            Eigen::LLT<Eigen::MatrixXd> llt(m);
            return llt.info() == Eigen::Success;
        }

        bool is_positive_semidefinite(const Eigen::MatrixXd &m)
        {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
            return es.eigenvalues().minCoeff() >= -1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff());
        }

        double trapezoid_weight(int k, int n, double dt) { return (k == 0 || k == n - 1) ? 0.5 * dt : dt; }

        void check_dimension(const OcpProblem &problem, const Eigen::VectorXd &z)
        {
            if (z.size() != static_cast<Eigen::Index>(W) * problem.node_count)
            {
                throw std::invalid_argument("decision vector has size " + std::to_string(z.size()) + ", expected " +
                                            std::to_string(W * problem.node_count));
            }
        }

        Position position_at(const Eigen::VectorXd &z, int k)
        {
            return {z(W * k + kY), z(W * k + kZ)};
        }

        bool tracking_active(const OcpProblem &problem) { return !problem.weights.tracking_weight.isZero(0.0); }
    } // namespace

    void CostWeights::validate() const
    {
        if (!is_symmetric(control_weight) || !is_positive_definite(control_weight))
            throw std::invalid_argument("control weight R must be symmetric positive definite");
        if (!is_symmetric(terminal_weight) || !is_positive_definite(terminal_weight))
            throw std::invalid_argument("terminal weight P must be symmetric positive definite");
        if (!is_symmetric(tracking_weight) || !is_positive_semidefinite(tracking_weight))
            throw std::invalid_argument("tracking weight Q must be symmetric positive semidefinite");
    }

    std::vector<double> OcpProblem::times() const
    {
        std::vector<double> t(node_count);
        const double h = dt();
        for (int k = 0; k < node_count; ++k)
            t[k] = h * k;
        t.back() = horizon;
        return t;
    }

    void OcpProblem::validate() const
    {
        if (node_count < 2)
            throw std::invalid_argument("node_count must be at least 2");
        if (!(horizon > 0.0) || !std::isfinite(horizon))
            throw std::invalid_argument("horizon must be positive");
        if (!(u1_bound > 0.0) || !(u2_bound > 0.0))
            throw std::invalid_argument("control bounds must be positive");
        if (!initial_state.is_finite() || !terminal_reference.is_finite())
            throw std::invalid_argument("initial and terminal states must be finite");
        weights.validate();
        if (tracking_active(*this) && static_cast<int>(reference_trajectory.size()) != node_count)
        {
            throw std::invalid_argument("reference trajectory has " + std::to_string(reference_trajectory.size()) +
                                        " points, expected " + std::to_string(node_count));
        }
        for (const auto &p : penalties)
        {
            if (static_cast<int>(p.partner_trajectory.size()) != node_count)
                throw std::invalid_argument("penalty partner trajectory length must equal node_count");
            if (!(p.weight >= 0.0) || !(p.desired_distance > 0.0))
                throw std::invalid_argument("penalty weight must be non-negative and distance positive");
        }
        if (!disturbance.empty() && static_cast<int>(disturbance.size()) != node_count - 1)
            throw std::invalid_argument("disturbance must have one entry per interval");
    }

    std::vector<Position> TrajectoryPlan::positions() const
    {
        std::vector<Position> out;
        out.reserve(states.size());
        for (const auto &s : states)
            out.push_back(s.position());
        return out;
    }

    DecisionLayout transcribe(const OcpProblem &problem)
    {
        problem.validate();
        DecisionLayout layout;
        layout.node_count = problem.node_count;
        layout.dimension = W * problem.node_count;
        layout.dt = problem.dt();
        const double inf = std::numeric_limits<double>::infinity();
        layout.lower = Eigen::VectorXd::Constant(layout.dimension, -inf);
        layout.upper = Eigen::VectorXd::Constant(layout.dimension, inf);
        for (int k = 0; k < problem.node_count; ++k)
        {
            layout.lower(DecisionLayout::control_index(k, 0)) = -problem.u1_bound;
            layout.upper(DecisionLayout::control_index(k, 0)) = problem.u1_bound;
            layout.lower(DecisionLayout::control_index(k, 1)) = -problem.u2_bound;
            layout.upper(DecisionLayout::control_index(k, 1)) = problem.u2_bound;
        }
        layout.pinned_values = problem.initial_state.values;
        for (int i = 0; i < kStateDim; ++i)
        {
            layout.pinned.push_back(i);
            layout.lower(i) = layout.upper(i) = problem.initial_state.values(i);
        }
        return layout;
    }

    Eigen::VectorXd flatten(const TrajectoryPlan &plan)
    {
        const int n = plan.node_count();
        if (static_cast<int>(plan.controls.size()) != n)
            throw std::invalid_argument("plan has mismatched state and control counts");
        Eigen::VectorXd z(static_cast<Eigen::Index>(W) * n);
        for (int k = 0; k < n; ++k)
        {
            z.segment<kStateDim>(W * k) = plan.states[k].values;
            z.segment<kControlDim>(W * k + kStateDim) = plan.controls[k].values;
        }
        return z;
    }

    TrajectoryPlan unflatten(const OcpProblem &problem, const Eigen::VectorXd &z)
    {
        check_dimension(problem, z);
        TrajectoryPlan plan;
        plan.times = problem.times();
        plan.states.reserve(problem.node_count);
        plan.controls.reserve(problem.node_count);
        for (int k = 0; k < problem.node_count; ++k)
        {
            plan.states.emplace_back(Vector6d(z.segment<kStateDim>(W * k)));
            plan.controls.emplace_back(Eigen::Vector2d(z.segment<kControlDim>(W * k + kStateDim)));
        }
        return plan;
    }

    double penalty_cost(const OcpProblem &problem, const Eigen::VectorXd &z)
    {
        check_dimension(problem, z);
        const double dt = problem.dt();
        double cost = 0.0;
        for (const auto &term : problem.penalties)
        {
            if (term.weight == 0.0)
                continue;
            for (int k = 0; k < problem.node_count; ++k)
            {
                const double gap = term.desired_distance - (position_at(z, k) - term.partner_trajectory[k]).norm();
                cost += term.weight * dt * (problem.penalty_form == PenaltyForm::kSquared ? gap * gap : gap);
            }
        }
        return cost;
    }

    double objective(const OcpProblem &problem, const Eigen::VectorXd &z)
    {
        check_dimension(problem, z);
        const int n = problem.node_count;
        const double dt = problem.dt();
        const auto &R = problem.weights.control_weight;
        const auto &Q = problem.weights.tracking_weight;
        const bool tracking = tracking_active(problem);

        double running = 0.0;
        for (int k = 0; k < n; ++k)
        {
            const Eigen::Vector2d u = z.segment<kControlDim>(W * k + kStateDim);
            double integrand = u.dot(R * u);
            if (tracking)
            {
                const Position e = position_at(z, k) - problem.reference_trajectory[k];
                integrand += e.dot(Q * e);
            }
            running += trapezoid_weight(k, n, dt) * integrand;
        }

        const Vector6d terminal = z.segment<kStateDim>(W * (n - 1)) - problem.terminal_reference.values;
        const double mayer = terminal.dot(problem.weights.terminal_weight * terminal);
        return running + mayer + penalty_cost(problem, z);
    }

    double objective(const OcpProblem &problem, const TrajectoryPlan &plan) { return objective(problem, flatten(plan)); }

    Eigen::VectorXd objective_gradient(const OcpProblem &problem, const Eigen::VectorXd &z)
    {
        check_dimension(problem, z);
        const int n = problem.node_count;
        const double dt = problem.dt();
        const auto &R = problem.weights.control_weight;
        const auto &Q = problem.weights.tracking_weight;
        const bool tracking = tracking_active(problem);

        Eigen::VectorXd grad = Eigen::VectorXd::Zero(z.size());
        for (int k = 0; k < n; ++k)
        {
            const double w = trapezoid_weight(k, n, dt);
            const Eigen::Vector2d u = z.segment<kControlDim>(W * k + kStateDim);
            grad.segment<kControlDim>(W * k + kStateDim) += w * (R + R.transpose()) * u;
            if (tracking)
            {
                const Position e = position_at(z, k) - problem.reference_trajectory[k];
                const Eigen::Vector2d ge = w * (Q + Q.transpose()) * e;
                grad(W * k + kY) += ge(0);
                grad(W * k + kZ) += ge(1);
            }
        }

        const auto &P = problem.weights.terminal_weight;
        const Vector6d terminal = z.segment<kStateDim>(W * (n - 1)) - problem.terminal_reference.values;
        grad.segment<kStateDim>(W * (n - 1)) += (P + P.transpose()) * terminal;

        for (const auto &term : problem.penalties)
        {
            if (term.weight == 0.0)
                continue;
            const double c = term.weight * dt;
            for (int k = 0; k < n; ++k)
            {
                const Position r = position_at(z, k) - term.partner_trajectory[k];
                const double dist = r.norm();
                if (dist < kCoincidentTol)
                {
                    throw DegenerateGeometryError("coincident positions at node " + std::to_string(k) +
                                                  " (partner " + std::to_string(term.partner_index) + ")");
                }
                const Position unit = r / dist;
                const double gap = term.desired_distance - dist;
                const Position g = problem.penalty_form == PenaltyForm::kSquared ? Position(-2.0 * c * gap * unit)
                                                                                 : Position(-c * unit);
                grad(W * k + kY) += g(0);
                grad(W * k + kZ) += g(1);
            }
        }
        return grad;
    }

    Eigen::VectorXd objective_gradient(const OcpProblem &problem, const TrajectoryPlan &plan)
    {
        return objective_gradient(problem, flatten(plan));
    }

    SparseMatrix objective_hessian_approx(const OcpProblem &problem, const Eigen::VectorXd &z)
    {
        check_dimension(problem, z);
        const int n = problem.node_count;
        const double dt = problem.dt();
        const Eigen::Matrix2d R2 = problem.weights.control_weight + problem.weights.control_weight.transpose();
        const Eigen::Matrix2d Q2 = problem.weights.tracking_weight + problem.weights.tracking_weight.transpose();
        const Matrix6d P2 = problem.weights.terminal_weight + problem.weights.terminal_weight.transpose();
        const bool tracking = tracking_active(problem);
        const bool gauss_newton = problem.penalty_form == PenaltyForm::kSquared;

        std::vector<Eigen::Triplet<double>> triplets;
        triplets.reserve(static_cast<std::size_t>(n) * 12 + 36);
        const int pos[2] = {kY, kZ};
        for (int k = 0; k < n; ++k)
        {
            const double w = trapezoid_weight(k, n, dt);
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b)
                    triplets.emplace_back(W * k + kStateDim + a, W * k + kStateDim + b, w * R2(a, b));

            Eigen::Matrix2d block = Eigen::Matrix2d::Zero();
            if (tracking)
                block += w * Q2;
            if (gauss_newton)
            {
                for (const auto &term : problem.penalties)
                {
                    if (term.weight == 0.0)
                        continue;
                    const Position r = position_at(z, k) - term.partner_trajectory[k];
                    const double dist = r.norm();
                    if (dist < kCoincidentTol)
                        continue;
                    const Position unit = r / dist;
                    block += 2.0 * term.weight * dt * unit * unit.transpose();
                }
            }
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b)
                    if (block(a, b) != 0.0)
                        triplets.emplace_back(W * k + pos[a], W * k + pos[b], block(a, b));
        }
        for (int a = 0; a < kStateDim; ++a)
            for (int b = 0; b < kStateDim; ++b)
                if (P2(a, b) != 0.0)
                    triplets.emplace_back(W * (n - 1) + a, W * (n - 1) + b, P2(a, b));

        SparseMatrix h(z.size(), z.size());
        h.setFromTriplets(triplets.begin(), triplets.end());
        return h;
    }

    Eigen::VectorXd defect_constraints(const OcpProblem &problem, const Eigen::VectorXd &z)
    {
        check_dimension(problem, z);
        const int n = problem.node_count;
        const double dt = problem.dt();
        const auto &A = problem.model.a_matrix;
        const auto &B = problem.model.b_matrix;
        const Vector6d &g = problem.model.gravity_vector;

        Eigen::VectorXd defects(static_cast<Eigen::Index>(kStateDim) * (n - 1));
        Vector6d f_prev = A * z.segment<kStateDim>(0) + B * z.segment<kControlDim>(kStateDim) + g;
        for (int k = 0; k + 1 < n; ++k)
        {
            const auto x0 = z.segment<kStateDim>(W * k);
            const auto x1 = z.segment<kStateDim>(W * (k + 1));
            const Vector6d f_next = A * x1 + B * z.segment<kControlDim>(W * (k + 1) + kStateDim) + g;
            Vector6d d = x1 - x0 - 0.5 * dt * (f_prev + f_next);
            if (!problem.disturbance.empty())
                d -= dt * problem.disturbance[k];
            defects.segment<kStateDim>(kStateDim * k) = d;
            f_prev = f_next;
        }
        return defects;
    }

    Eigen::VectorXd defect_constraints(const OcpProblem &problem, const TrajectoryPlan &plan)
    {
        return defect_constraints(problem, flatten(plan));
    }

    SparseMatrix defect_jacobian(const OcpProblem &problem)
    {
        const int n = problem.node_count;
        const double dt = problem.dt();
        const Matrix6d lhs = -Matrix6d::Identity() - 0.5 * dt * problem.model.a_matrix;
        const Matrix6d rhs = Matrix6d::Identity() - 0.5 * dt * problem.model.a_matrix;
        const Matrix62d bu = -0.5 * dt * problem.model.b_matrix;

        std::vector<Eigen::Triplet<double>> triplets;
        triplets.reserve(static_cast<std::size_t>(n) * 6 * 16);
        auto add_block = [&](int row, int col, const auto &block) {
            for (int i = 0; i < block.rows(); ++i)
                for (int j = 0; j < block.cols(); ++j)
                    if (block(i, j) != 0.0)
                        triplets.emplace_back(row + i, col + j, block(i, j));
        };
        for (int k = 0; k + 1 < n; ++k)
        {
            const int row = kStateDim * k;
            add_block(row, W * k, lhs);
            add_block(row, W * k + kStateDim, bu);
            add_block(row, W * (k + 1), rhs);
            add_block(row, W * (k + 1) + kStateDim, bu);
        }
        SparseMatrix jac(static_cast<Eigen::Index>(kStateDim) * (n - 1), static_cast<Eigen::Index>(W) * n);
        jac.setFromTriplets(triplets.begin(), triplets.end());
        return jac;
    }

    SparseMatrix defect_jacobian(const OcpProblem &problem, const TrajectoryPlan &plan)
    {
        if (plan.node_count() != problem.node_count)
            throw std::invalid_argument("plan node count does not match problem");
        return defect_jacobian(problem);
    }

    Position SinusoidReference::position(double t) const
    {
        return {forward_speed * t, base_altitude + amplitude * std::sin(angular_frequency * t)};
    }

    Position SinusoidReference::velocity(double t) const
    {
        return {forward_speed, amplitude * angular_frequency * std::cos(angular_frequency * t)};
    }

    AgentState SinusoidReference::state(double t) const
    {
        const Position p = position(t);
        const Position v = velocity(t);
        return AgentState::from(p(0), v(0), p(1), v(1), 0.0, 0.0);
    }

    std::vector<Position> SinusoidReference::sample(const std::vector<double> &times) const
    {
        std::vector<Position> out;
        out.reserve(times.size());
        for (double t : times)
            out.push_back(position(t));
        return out;
    }

    TrajectoryPlan initial_guess(const OcpProblem &problem)
    {
        problem.validate();
        TrajectoryPlan plan;
        plan.times = problem.times();
        const int n = problem.node_count;
        const ControlInput hover = problem.model.hover_input();
        const Eigen::Vector2d u(std::clamp(hover.u1(), -problem.u1_bound, problem.u1_bound),
                                std::clamp(hover.u2(), -problem.u2_bound, problem.u2_bound));
        for (int k = 0; k < n; ++k)
        {
            const double s = static_cast<double>(k) / (n - 1);
            plan.states.emplace_back(Vector6d((1.0 - s) * problem.initial_state.values +
                                              s * problem.terminal_reference.values));
            plan.controls.emplace_back(u);
        }
        return plan;
    }

} // namespace quadform
