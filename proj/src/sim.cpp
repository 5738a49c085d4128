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
#include "quadform/sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace quadform
{
    namespace
    {
        constexpr double kGridTol = 1e-9;

        void accumulate_metrics(RolloutReport &report, const EvaluationTargets &targets, int leader)
        {
            const int trials = static_cast<int>(report.trials.size());
            const auto &spec = targets.formation;
            const std::size_t nodes = targets.leader_reference.size();
            report.leader_error_series.assign(nodes, 0.0);
            report.pair_error_series.assign(spec.edges().size(), std::vector<double>(nodes, 0.0));

            std::vector<double> pair_sum(spec.edges().size(), 0.0);
            for (const auto &trial : report.trials)
            {
                std::vector<std::vector<Position>> positions;
                for (int a = 0; a < spec.agent_count(); ++a)
                    positions.push_back(trial.positions(a));

                report.trial_leader_rmse.push_back(tracking_rmse(positions[leader], targets.leader_reference));
                report.trial_distance_rmse.push_back(formation_rmse(positions, spec));
                for (std::size_t e = 0; e < spec.edges().size(); ++e)
                    pair_sum[e] += report.trial_distance_rmse.back()[e].rmse;

                for (std::size_t k = 0; k < nodes; ++k)
                {
                    report.leader_error_series[k] += (positions[leader][k] - targets.leader_reference[k]).norm();
                    for (std::size_t e = 0; e < spec.edges().size(); ++e)
                    {
                        const auto &edge = spec.edges()[e];
                        report.pair_error_series[e][k] +=
                            std::abs((positions[edge.first][k] - positions[edge.second][k]).norm() - edge.distance);
                    }
                }
            }

            // Fixed trial order keeps the reduction identical however trials were produced.
            double leader_sum = 0.0;
            for (double v : report.trial_leader_rmse)
                leader_sum += v;
            report.leader_tracking_rmse = leader_sum / trials;
            for (std::size_t e = 0; e < spec.edges().size(); ++e)
            {
                const auto &edge = spec.edges()[e];
                report.distance_rmse.push_back({edge.first, edge.second, pair_sum[e] / trials});
            }
            for (auto &v : report.leader_error_series)
                v /= trials;
            for (auto &series : report.pair_error_series)
                for (auto &v : series)
                    v /= trials;
        }
    } // namespace

    void RolloutConfig::validate() const
    {
        noise.validate();
        if (trial_count < 1)
            throw std::invalid_argument("trial_count must be at least 1");
        if (!(dt > 0.0))
            throw std::invalid_argument("rollout dt must be positive");
    }

    std::vector<Position> TrialHistory::positions(int agent) const
    {
        std::vector<Position> out;
        out.reserve(agents.at(agent).size());
        for (const auto &s : agents[agent])
            out.push_back(s.position());
        return out;
    }

    std::vector<Vector6d> disturbance_sequence(const NoiseSpec &noise, int agent, int trial, int intervals)
    {
        NoiseSpec stream = noise;
        stream.seed = sub_seed(noise.seed, static_cast<std::uint64_t>(agent), static_cast<std::uint64_t>(trial));
        std::vector<Vector6d> out;
        out.reserve(intervals);
        for (int k = 0; k < intervals; ++k)
            out.push_back(noise.gain * sample_noise(stream, static_cast<std::uint64_t>(k)));
        return out;
    }

    RolloutReport rollout(const FleetPlan &fleet, const StateSpaceModel &model, const RolloutConfig &config,
                          const EvaluationTargets &targets)
    {
        config.validate();
        const auto &spec = targets.formation;
        if (static_cast<int>(fleet.plans.size()) != spec.agent_count())
            throw std::invalid_argument("fleet plan and formation disagree on agent count");

        const std::size_t nodes = fleet.plans.front().times.size();
        for (const auto &plan : fleet.plans)
        {
            if (plan.times.size() != nodes || plan.states.size() != nodes || plan.controls.size() != nodes)
                throw std::invalid_argument("rollout: plans do not share one grid");
            for (std::size_t k = 0; k + 1 < nodes; ++k)
            {
                if (std::abs((plan.times[k + 1] - plan.times[k]) - config.dt) > kGridTol)
                    throw std::invalid_argument("rollout: plan grid spacing does not match dt");
            }
        }
        if (targets.leader_reference.size() != nodes)
            throw std::invalid_argument("rollout: reference length does not match the plan grid");

        // The gain is applied when the sequence is drawn; the integrator sees K w directly.
        StateSpaceModel plant = model;
        plant.noise_gain = Matrix6d::Identity();

        RolloutReport report;
        report.trials.resize(config.trial_count);
        const int intervals = static_cast<int>(nodes) - 1;
        for (int trial = 0; trial < config.trial_count; ++trial)
        {
            auto &history = report.trials[trial];
            history.agents.resize(fleet.plans.size());
            for (std::size_t a = 0; a < fleet.plans.size(); ++a)
            {
                const auto &plan = fleet.plans[a];
                const auto noise = disturbance_sequence(config.noise, static_cast<int>(a), trial, intervals);
                auto &states = history.agents[a];
                states.reserve(nodes);
                AgentState x = plan.states.front();
                states.push_back(x);
                for (int k = 0; k < intervals; ++k)
                {
                    const Eigen::Vector2d u0 = plan.controls[k].values;
                    const Eigen::Vector2d u1 = plan.controls[k + 1].values;
                    const double h = config.dt;
                    const InputProfile profile = [&](double tau) { return ControlInput(u0 + (tau / h) * (u1 - u0)); };
                    x = step_rk4(plant, x, profile, noise[k], h);
                    states.push_back(x);
                }
            }
        }
        accumulate_metrics(report, targets, spec.leader_index());
        return report;
    }

    RolloutReport resolve_trials(const FormationSpec &spec, const LeaderReference &leader_reference,
                                 const std::vector<AgentState> &initial_states, const FleetSettings &settings,
                                 const RolloutConfig &config)
    {
        config.validate();
        RolloutReport report;
        const int intervals = settings.node_count - 1;
        for (int trial = 0; trial < config.trial_count; ++trial)
        {
            FleetSettings noisy = settings;
            noisy.disturbances.clear();
            for (int a = 0; a < spec.agent_count(); ++a)
                noisy.disturbances.push_back(disturbance_sequence(config.noise, a, trial, intervals));
            const FleetPlan fleet = plan_fleet(spec, leader_reference, initial_states, noisy);

            TrialHistory history;
            for (const auto &plan : fleet.plans)
                history.agents.push_back(plan.states);
            report.trials.push_back(std::move(history));
        }
        accumulate_metrics(report, EvaluationTargets{spec, leader_reference.positions}, spec.leader_index());
        return report;
    }

    double tracking_rmse(const std::vector<Position> &history, const std::vector<Position> &reference)
    {
        if (history.size() != reference.size())
            throw std::invalid_argument("tracking_rmse: history and reference lengths differ");
        if (history.empty())
            return 0.0;
        double sum = 0.0;
        for (std::size_t k = 0; k < history.size(); ++k)
            sum += (history[k] - reference[k]).squaredNorm();
        return std::sqrt(sum / history.size());
    }

    std::vector<PairRmse> formation_rmse(const std::vector<std::vector<Position>> &histories, const FormationSpec &spec)
    {
        if (static_cast<int>(histories.size()) != spec.agent_count())
            throw std::invalid_argument("formation_rmse: one history per agent required");
        const std::size_t nodes = histories.front().size();
        for (const auto &h : histories)
            if (h.size() != nodes)
                throw std::invalid_argument("formation_rmse: histories differ in length");

        std::vector<PairRmse> out;
        for (const auto &edge : spec.edges())
        {
            double sum = 0.0;
            for (std::size_t k = 0; k < nodes; ++k)
            {
                const double gap = (histories[edge.first][k] - histories[edge.second][k]).norm() - edge.distance;
                sum += gap * gap;
            }
            out.push_back({edge.first, edge.second, nodes ? std::sqrt(sum / nodes) : 0.0});
        }
        return out;
    }

    MeanInterval bootstrap_mean(const std::vector<double> &values, double confidence, int resamples,
                                std::uint64_t seed)
    {
        if (values.empty())
            throw std::invalid_argument("bootstrap_mean: no values");
        MeanInterval out;
        for (double v : values)
            out.mean += v;
        out.mean /= values.size();

        std::mt19937_64 rng(seed);
        std::vector<double> means(resamples);
        for (int r = 0; r < resamples; ++r)
        {
            double sum = 0.0;
            for (std::size_t i = 0; i < values.size(); ++i)
                sum += values[rng() % values.size()];
            means[r] = sum / values.size();
        }
        std::sort(means.begin(), means.end());
        const double tail = 0.5 * (1.0 - confidence);
        const auto lo = static_cast<std::size_t>(std::floor(tail * (resamples - 1)));
        const auto hi = static_cast<std::size_t>(std::ceil((1.0 - tail) * (resamples - 1)));
        out.lower = means[lo];
        out.upper = means[hi];
        return out;
    }

    OrderingCheck check_monotone(const std::vector<MeanInterval> &levels)
    {
        OrderingCheck out;
        for (std::size_t i = 0; i + 1 < levels.size(); ++i)
        {
            if (levels[i + 1].mean < levels[i].mean)
            {
                ++out.inversions;
                if (levels[i + 1].upper < levels[i].lower)
                    ++out.non_overlapping_inversions;
            }
        }
        return out;
    }

} // namespace quadform
