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
#include "quadform/coordinator.hpp"

#include <charconv>
#include <future>
#include <sstream>

#include <fmt/format.h>

namespace quadform
{
    namespace
    {
        constexpr const char *kMessageTag = "quadform-leader-state";
        constexpr int kMessageVersion = 1;
        constexpr double kSweepMonotoneTol = 1e-9;

        std::vector<Position> shifted(const std::vector<Position> &positions, const Position &offset)
        {
            std::vector<Position> out;
            out.reserve(positions.size());
            for (const auto &p : positions)
                out.push_back(p + offset);
            return out;
        }

        double parse_double(std::string_view token, int line)
        {
            double value = 0.0;
            const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
            if (ec != std::errc() || ptr != token.data() + token.size())
                throw MessageFormatError("line " + std::to_string(line) + ": bad number '" + std::string(token) + "'");
            return value;
        }

        long parse_integer(std::string_view token, int line)
        {
            long value = 0;
            const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
            if (ec != std::errc() || ptr != token.data() + token.size())
                throw MessageFormatError("line " + std::to_string(line) + ": bad integer '" + std::string(token) + "'");
            return value;
        }

        std::vector<std::string_view> split(std::string_view line)
        {
            std::vector<std::string_view> out;
            std::size_t pos = 0;
            while (pos < line.size())
            {
                const std::size_t next = line.find(' ', pos);
                const std::size_t end = next == std::string_view::npos ? line.size() : next;
                if (end > pos)
                    out.push_back(line.substr(pos, end - pos));
                pos = end + 1;
            }
            return out;
        }

        double follower_penalty_total(const FormationSpec &spec, const LeaderReference &reference,
                                      const std::vector<AgentState> &initial_states,
                                      const std::vector<std::vector<Position>> &positions,
                                      const std::vector<AgentState> &terminal_refs, const FleetSettings &settings,
                                      const std::vector<TrajectoryPlan> &plans)
        {
            double total = 0.0;
            for (int a = 0; a < spec.agent_count(); ++a)
            {
                if (spec.is_leader(a))
                    continue;
                const OcpProblem problem =
                    build_agent_problem(spec, a, reference, initial_states, positions, terminal_refs[a], settings);
                total += penalty_cost(problem, flatten(plans[a]));
            }
            return total;
        }
    } // namespace

    bool FleetPlan::all_converged() const
    {
        for (const auto &r : per_agent_reports)
            if (!r.converged)
                return false;
        return true;
    }

    std::vector<AgentState> formation_initial_states(const FormationSpec &spec, const AgentState &leader_start)
    {
        std::vector<AgentState> out;
        for (int a = 0; a < spec.agent_count(); ++a)
        {
            AgentState s = leader_start;
            s.values(kY) += spec.offset(a)(0);
            s.values(kZ) += spec.offset(a)(1);
            out.push_back(s);
        }
        return out;
    }

    OcpProblem build_agent_problem(const FormationSpec &spec, int agent, const LeaderReference &leader_reference,
                                   const std::vector<AgentState> &initial_states,
                                   const std::vector<std::vector<Position>> &partner_positions,
                                   const AgentState &terminal_reference, const FleetSettings &settings)
    {
        OcpProblem problem;
        problem.model = settings.model;
        problem.horizon = settings.horizon;
        problem.node_count = settings.node_count;
        problem.initial_state = initial_states.at(agent);
        problem.terminal_reference = terminal_reference;
        problem.weights.control_weight = settings.control_weight;
        problem.weights.terminal_weight = settings.terminal_weight;
        problem.penalty_form = settings.penalty_form;
        problem.u1_bound = settings.u1_bound;
        problem.u2_bound = settings.u2_bound;
        if (!settings.disturbances.empty())
            problem.disturbance = settings.disturbances.at(agent);

        if (spec.is_leader(agent))
        {
            problem.weights.tracking_weight = settings.leader_tracking_weight;
            problem.reference_trajectory = leader_reference.positions;
        }
        else
        {
            problem.weights.tracking_weight.setZero();
            for (const auto &edge : spec.edges_of(agent))
            {
                const int partner = edge.first == agent ? edge.second : edge.first;
                PenaltyTerm term;
                term.partner_trajectory = partner_positions.at(partner);
                term.desired_distance = edge.distance;
                term.weight = settings.penalty_weight;
                term.partner_index = partner;
                problem.penalties.push_back(std::move(term));
            }
        }
        return problem;
    }

    FleetPlan plan_fleet(const FormationSpec &spec, const LeaderReference &leader_reference,
                         const std::vector<AgentState> &initial_states, const FleetSettings &settings)
    {
        const int n_agents = spec.agent_count();
        if (static_cast<int>(initial_states.size()) != n_agents)
            throw std::invalid_argument("expected one initial state per agent");
        if (settings.sweeps < 1)
            throw std::invalid_argument("sweeps must be at least 1");
        if (!(settings.penalty_weight > 0.0))
            throw std::invalid_argument("follower penalty weight must be positive");
        if (!settings.disturbances.empty() && static_cast<int>(settings.disturbances.size()) != n_agents)
            throw std::invalid_argument("disturbances must be given for every agent or none");

        const int leader = spec.leader_index();
        FleetPlan fleet;
        fleet.plans.resize(n_agents);
        fleet.per_agent_reports.resize(n_agents);

        std::vector<std::vector<Position>> positions(n_agents);
        std::vector<AgentState> terminal_refs(n_agents);

        // Leader first; it never sees the followers.
        terminal_refs[leader] = leader_reference.terminal_state;
        const OcpProblem leader_problem =
            build_agent_problem(spec, leader, leader_reference, initial_states, positions, terminal_refs[leader], settings);
        fleet.per_agent_reports[leader] = solve(leader_problem, settings.solver, initial_guess(leader_problem));
        fleet.plans[leader] = fleet.per_agent_reports[leader].plan;

        const LeaderStateMessage received =
            parse_message(broadcast_message(fleet.plans[leader], AgentRole{leader, true}));
        positions[leader] = received.positions;

        const AgentState &leader_final = fleet.plans[leader].states.back();
        for (int a = 0; a < n_agents; ++a)
        {
            if (a == leader)
                continue;
            positions[a] = shifted(received.positions, spec.offset(a));
            AgentState target = leader_final;
            target.values(kY) += spec.offset(a)(0);
            target.values(kZ) += spec.offset(a)(1);
            target.values(kPhi) = 0.0;
            target.values(kPhiDot) = 0.0;
            terminal_refs[a] = target;
        }

        auto solve_follower = [&](int a, const std::vector<std::vector<Position>> &partners, int sweep) {
            const OcpProblem problem =
                build_agent_problem(spec, a, leader_reference, initial_states, partners, terminal_refs[a], settings);
            const TrajectoryPlan guess = sweep == 0 ? initial_guess(problem) : fleet.plans[a];
            return solve(problem, settings.solver, guess);
        };

        for (int sweep = 0; sweep < settings.sweeps; ++sweep)
        {
            if (settings.coupling == CouplingOrder::kGaussSeidel)
            {
                for (int a = 0; a < n_agents; ++a)
                {
                    if (a == leader)
                        continue;
                    fleet.per_agent_reports[a] = solve_follower(a, positions, sweep);
                    fleet.plans[a] = fleet.per_agent_reports[a].plan;
                    positions[a] = fleet.plans[a].positions();
                }
            }
            else
            {
                const auto snapshot = positions;
                std::vector<std::pair<int, std::future<SolveReport>>> jobs;
                for (int a = 0; a < n_agents; ++a)
                    if (a != leader)
                        jobs.emplace_back(a, std::async(std::launch::async, solve_follower, a, std::cref(snapshot), sweep));
                for (auto &[a, job] : jobs)
                {
                    fleet.per_agent_reports[a] = job.get();
                    fleet.plans[a] = fleet.per_agent_reports[a].plan;
                    positions[a] = fleet.plans[a].positions();
                }
            }
            ++fleet.sweep_count;

            const double cost = follower_penalty_total(spec, leader_reference, initial_states, positions, terminal_refs,
                                                       settings, fleet.plans);
            if (!fleet.sweep_penalty_cost.empty() && cost > fleet.sweep_penalty_cost.back() + kSweepMonotoneTol)
                fleet.non_monotone_sweeps.push_back(sweep);
            fleet.sweep_penalty_cost.push_back(cost);
        }
        return fleet;
    }

    std::string broadcast_message(const TrajectoryPlan &plan, const AgentRole &agent)
    {
        if (plan.times.size() != plan.states.size())
            throw std::invalid_argument("plan time grid and state sequence differ in length");
        std::string out = fmt::format("{} {}\nagent {}\nnodes {}\n", kMessageTag, kMessageVersion, agent.index,
                                      plan.states.size());
        for (std::size_t k = 0; k < plan.states.size(); ++k)
            out += fmt::format("{} {} {}\n", plan.times[k], plan.states[k].y(), plan.states[k].z());
        out += "end\n";
        return out;
    }

    LeaderStateMessage parse_message(const std::string &text)
    {
        std::istringstream in(text);
        std::string line;
        int line_no = 0;
        auto next_line = [&]() -> std::vector<std::string_view> {
            if (!std::getline(in, line))
                throw MessageFormatError("truncated message after line " + std::to_string(line_no));
            ++line_no;
            return split(line);
        };

        auto header = next_line();
        if (header.size() != 2 || header[0] != kMessageTag)
            throw MessageFormatError("line 1: missing message tag");
        if (parse_integer(header[1], line_no) != kMessageVersion)
            throw MessageFormatError("line 1: unsupported version");

        LeaderStateMessage msg;
        auto agent = next_line();
        if (agent.size() != 2 || agent[0] != "agent")
            throw MessageFormatError("line 2: expected 'agent <index>'");
        msg.agent_index = static_cast<int>(parse_integer(agent[1], line_no));

        auto nodes = next_line();
        if (nodes.size() != 2 || nodes[0] != "nodes")
            throw MessageFormatError("line 3: expected 'nodes <count>'");
        const long count = parse_integer(nodes[1], line_no);
        if (count < 0)
            throw MessageFormatError("line 3: negative node count");

        msg.times.reserve(count);
        msg.positions.reserve(count);
        for (long k = 0; k < count; ++k)
        {
            auto row = next_line();
            if (row.size() != 3)
                throw MessageFormatError("line " + std::to_string(line_no) + ": expected 3 fields");
            msg.times.push_back(parse_double(row[0], line_no));
            msg.positions.emplace_back(parse_double(row[1], line_no), parse_double(row[2], line_no));
        }
        auto end = next_line();
        if (end.size() != 1 || end[0] != "end")
            throw MessageFormatError("line " + std::to_string(line_no) + ": expected 'end'");
        return msg;
    }

} // namespace quadform
