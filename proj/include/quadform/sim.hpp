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
#ifndef QUADFORM_SIM_HPP
#define QUADFORM_SIM_HPP

#include <cstdint>
#include <vector>

#include "quadform/coordinator.hpp"
#include "quadform/formation.hpp"
#include "quadform/model.hpp"

namespace quadform
{
    struct RolloutConfig
    {
        NoiseSpec noise;
        int trial_count = 20;
        double dt = 0.1;

        void validate() const;
    };

    /// What the rollout metrics are measured against.
    struct EvaluationTargets
    {
        const FormationSpec &formation;
        std::vector<Position> leader_reference;
    };

    /// One trial: per agent, the state at every plan node.
    struct TrialHistory
    {
        std::vector<std::vector<AgentState>> agents;

        std::vector<Position> positions(int agent) const;
    };

    struct PairRmse
    {
        int first = 0;
        int second = 0;
        double rmse = 0.0;
    };

    struct RolloutReport
    {
        std::vector<TrialHistory> trials;
        std::vector<double> trial_leader_rmse;
        double leader_tracking_rmse = 0.0;              // mean over trials
        std::vector<PairRmse> distance_rmse;            // per pair, mean over trials
        std::vector<std::vector<PairRmse>> trial_distance_rmse;
        std::vector<double> leader_error_series;        // per node, mean over trials of |p - p_ref|
        std::vector<std::vector<double>> pair_error_series; // per pair, per node, mean of |dist - d|
    };

    /**
     * Replays every agent's planned controls open loop through the noisy
     * dynamics. Controls are interpolated linearly between nodes and evaluated
     * at the RK4 stage times; one noise sample per agent and step is held over
     * the step. Noise streams are keyed by (seed, agent, trial, step).
     */
    RolloutReport rollout(const FleetPlan &fleet, const StateSpaceModel &model, const RolloutConfig &config,
                          const EvaluationTargets &targets);

    /**
     * Alternative noisy evaluation: for each trial the sampled disturbance
     * sequence of every agent is placed in that agent's dynamics and the fleet
     * is re-planned; the trial history is the re-planned trajectory.
     */
    RolloutReport resolve_trials(const FormationSpec &spec, const LeaderReference &leader_reference,
                                 const std::vector<AgentState> &initial_states, const FleetSettings &settings,
                                 const RolloutConfig &config);

    /// Per-interval disturbance K w for one agent and trial, matching what rollout draws.
    std::vector<Vector6d> disturbance_sequence(const NoiseSpec &noise, int agent, int trial, int intervals);

    /// sqrt(mean_k |p_k - r_k|^2).
    double tracking_rmse(const std::vector<Position> &history, const std::vector<Position> &reference);

    /// Per specified pair: sqrt(mean_k (|p_i - p_j| - d_ij)^2).
    std::vector<PairRmse> formation_rmse(const std::vector<std::vector<Position>> &histories, const FormationSpec &spec);

    struct MeanInterval
    {
        double mean = 0.0;
        double lower = 0.0;
        double upper = 0.0;
    };

    /// Percentile bootstrap interval of the mean; deterministic in `seed`.
    MeanInterval bootstrap_mean(const std::vector<double> &values, double confidence = 0.95, int resamples = 2000,
                                std::uint64_t seed = 1);

    struct OrderingCheck
    {
        int inversions = 0;            // consecutive levels whose mean decreased
        int non_overlapping_inversions = 0; // ... with disjoint bootstrap intervals
    };

    /// Checks that means are non-decreasing along `levels` (ordered by noise level).
    OrderingCheck check_monotone(const std::vector<MeanInterval> &levels);

} // namespace quadform

#endif // QUADFORM_SIM_HPP
