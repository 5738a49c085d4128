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
#ifndef QUADFORM_OCP_HPP
#define QUADFORM_OCP_HPP

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "quadform/model.hpp"

namespace quadform
{
    /// Raised when a distance penalty is evaluated with coincident agent positions.
    class DegenerateGeometryError : public std::domain_error
    {
    public:
        using std::domain_error::domain_error;
    };

    using SparseMatrix = Eigen::SparseMatrix<double>;

    struct CostWeights
    {
        Eigen::Matrix2d control_weight = Eigen::Matrix2d::Identity();  // R
        Eigen::Matrix2d tracking_weight = Eigen::Matrix2d::Identity(); // Q, zero for followers
        Matrix6d terminal_weight = Matrix6d::Identity();               // P

        void validate() const;
    };

    enum class PenaltyForm
    {
        kSquared, // weight * (d - |p_i - p_j|)^2 * dt per node
        kLinear,  // weight * (d - |p_i - p_j|) * dt per node
    };

    struct PenaltyTerm
    {
        std::vector<Position> partner_trajectory;
        double desired_distance = 0.0;
        double weight = 0.0;
        int partner_index = -1; // informational
    };

    struct OcpProblem
    {
        StateSpaceModel model;
        AgentState initial_state;
        double horizon = 10.0;
        int node_count = 101;
        std::vector<Position> reference_trajectory; // used when tracking_weight != 0
        CostWeights weights;
        std::vector<PenaltyTerm> penalties;
        PenaltyForm penalty_form = PenaltyForm::kSquared;
        double u1_bound = 0.0;
        double u2_bound = 0.0;
        /// Target state of the Mayer term.
        AgentState terminal_reference;
        /// Optional K w per interval (node_count - 1 entries) carried in the dynamics; empty means nominal.
        std::vector<Vector6d> disturbance;

        double dt() const { return horizon / (node_count - 1); }
        std::vector<double> times() const;
        /// Throws std::invalid_argument describing the first violated precondition.
        void validate() const;
    };

    struct TrajectoryPlan
    {
        std::vector<double> times;
        std::vector<AgentState> states;
        std::vector<ControlInput> controls; // one per node

        int node_count() const { return static_cast<int>(states.size()); }
        std::vector<Position> positions() const;
    };

    /**
     * Flat decision vector: node k occupies [8k, 8k+8) as
     * [y, y_dot, z, z_dot, phi, phi_dot, u1, u2]. The six entries of node 0's
     * state are pinned to the initial condition.
     */
    struct DecisionLayout
    {
        static constexpr int kNodeWidth = kStateDim + kControlDim;

        int node_count = 0;
        int dimension = 0;
        double dt = 0.0;
        std::vector<int> pinned;
        Eigen::VectorXd lower;
        Eigen::VectorXd upper;
        Eigen::VectorXd pinned_values;

        static int state_index(int node, int component) { return kNodeWidth * node + component; }
        static int control_index(int node, int component) { return kNodeWidth * node + kStateDim + component; }
        bool is_pinned(int index) const { return index < kStateDim; }
    };

    DecisionLayout transcribe(const OcpProblem &problem);

    Eigen::VectorXd flatten(const TrajectoryPlan &plan);
    TrajectoryPlan unflatten(const OcpProblem &problem, const Eigen::VectorXd &z);

    /// Trapezoidal running cost + Mayer cost + distance penalties.
    double objective(const OcpProblem &problem, const Eigen::VectorXd &z);
    double objective(const OcpProblem &problem, const TrajectoryPlan &plan);

    /// Distance-penalty part of the objective alone.
    double penalty_cost(const OcpProblem &problem, const Eigen::VectorXd &z);

    /// Exact gradient over the full decision vector (pinned entries included).
    Eigen::VectorXd objective_gradient(const OcpProblem &problem, const Eigen::VectorXd &z);
    Eigen::VectorXd objective_gradient(const OcpProblem &problem, const TrajectoryPlan &plan);

    /// Hessian of the quadratic terms plus the Gauss-Newton part of the squared distance penalty.
    /// Positive semidefinite; exact when the problem carries no penalties.
    SparseMatrix objective_hessian_approx(const OcpProblem &problem, const Eigen::VectorXd &z);

    /// Trapezoidal collocation defects, 6 per interval, interval-major.
    Eigen::VectorXd defect_constraints(const OcpProblem &problem, const Eigen::VectorXd &z);
    Eigen::VectorXd defect_constraints(const OcpProblem &problem, const TrajectoryPlan &plan);

    /// Jacobian of the defects; constant for the LTI model.
    SparseMatrix defect_jacobian(const OcpProblem &problem);
    SparseMatrix defect_jacobian(const OcpProblem &problem, const TrajectoryPlan &plan);

    /// Sinusoidal reference (y, z) = (v t, z0 + A sin(w t)).
    struct SinusoidReference
    {
        double amplitude = 0.5;
        double angular_frequency = 0.6283185307179586; // 2 pi / T for T = 10
        double forward_speed = 0.1;
        double base_altitude = 1.0;

        Position position(double t) const;
        Position velocity(double t) const;
        /// Position and velocity with level attitude.
        AgentState state(double t) const;
        std::vector<Position> sample(const std::vector<double> &times) const;
    };

    /// Linear interpolation of the state from x0 to the terminal reference, hover input everywhere.
    TrajectoryPlan initial_guess(const OcpProblem &problem);

} // namespace quadform

#endif // QUADFORM_OCP_HPP
