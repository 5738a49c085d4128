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
#ifndef QUADFORM_COORDINATOR_HPP
#define QUADFORM_COORDINATOR_HPP

#include <stdexcept>
#include <string>
#include <vector>

#include "quadform/formation.hpp"
#include "quadform/ocp.hpp"
#include "quadform/solver.hpp"

namespace quadform
{
    struct AgentRole
    {
        int index = 0;
        bool is_leader = false;
    };

    enum class CouplingOrder
    {
        kGaussSeidel, // followers re-solved in index order against the latest partner plans
        kJacobi,      // followers re-solved against the previous sweep's plans
    };

    /// Leader reference positions on the plan grid plus the target state of the leader's Mayer term.
    struct LeaderReference
    {
        std::vector<Position> positions;
        AgentState terminal_state;
    };

    struct FleetSettings
    {
        StateSpaceModel model;
        double horizon = 10.0;
        int node_count = 101;
        Eigen::Matrix2d control_weight = Eigen::Matrix2d::Identity();
        Eigen::Matrix2d leader_tracking_weight = Eigen::Matrix2d::Identity();
        Matrix6d terminal_weight = Matrix6d::Identity();
        double penalty_weight = 1.0; // beta
        PenaltyForm penalty_form = PenaltyForm::kSquared;
        double u1_bound = 0.0;
        double u2_bound = 0.0;
        SolverConfig solver;
        int sweeps = 2;
        CouplingOrder coupling = CouplingOrder::kGaussSeidel;
        /// Optional per-agent, per-interval disturbance carried into every agent's dynamics.
        std::vector<std::vector<Vector6d>> disturbances;
    };

    struct FleetPlan
    {
        std::vector<TrajectoryPlan> plans;
        int sweep_count = 0;
        std::vector<SolveReport> per_agent_reports;
        /// Total follower distance-penalty cost after each sweep.
        std::vector<double> sweep_penalty_cost;
        /// Sweeps whose follower penalty cost rose by more than 1e-9.
        std::vector<int> non_monotone_sweeps;

        bool all_converged() const;
    };

    /**
     * Leader-follower planning: the leader solves its tracking problem with no
     * distance penalty; its plan is broadcast; each follower then solves with
     * zero tracking weight and distance penalties against the leader plan and
     * the other followers' current plans. Followers start from offset-shifted
     * copies of the leader plan and are refined for `settings.sweeps` sweeps.
     */
    FleetPlan plan_fleet(const FormationSpec &spec, const LeaderReference &leader_reference,
                         const std::vector<AgentState> &initial_states, const FleetSettings &settings);

    /// The per-agent problem exactly as plan_fleet builds it, given the current partner plans.
    OcpProblem build_agent_problem(const FormationSpec &spec, int agent, const LeaderReference &leader_reference,
                                   const std::vector<AgentState> &initial_states,
                                   const std::vector<std::vector<Position>> &partner_positions,
                                   const AgentState &terminal_reference, const FleetSettings &settings);

    /// Default starting states: the leader on the reference's initial state, followers shifted by their offsets.
    std::vector<AgentState> formation_initial_states(const FormationSpec &spec, const AgentState &leader_start);

    // Leader-state broadcast.

    class MessageFormatError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    struct LeaderStateMessage
    {
        int agent_index = 0;
        std::vector<double> times;
        std::vector<Position> positions;
    };

    /**
     * Text encoding, one record per line:
     *
     *     quadform-leader-state 1
     *     agent <index>
     *     nodes <N>
     *     <t> <y> <z>        (N lines)
     *     end
     *
     * Numbers use the shortest decimal form that round-trips to the same double.
     */
    std::string broadcast_message(const TrajectoryPlan &plan, const AgentRole &agent);

    /// Throws MessageFormatError on any framing, count, or number error.
    LeaderStateMessage parse_message(const std::string &text);

} // namespace quadform

#endif // QUADFORM_COORDINATOR_HPP
