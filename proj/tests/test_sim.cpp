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
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "quadform/sim.hpp"
#include "test_support.hpp"

using namespace quadform;

namespace
{
    const FleetPlan &default_fleet()
    {
        static const FleetPlan fleet = plan_scenario(ScenarioConfig{});
        return fleet;
    }

    bool same_histories(const RolloutReport &a, const RolloutReport &b)
    {
        if (a.trials.size() != b.trials.size())
            return false;
        for (std::size_t t = 0; t < a.trials.size(); ++t)
            for (std::size_t i = 0; i < a.trials[t].agents.size(); ++i)
                for (std::size_t k = 0; k < a.trials[t].agents[i].size(); ++k)
                    if (a.trials[t].agents[i][k].values != b.trials[t].agents[i][k].values)
                        return false;
        return a.leader_tracking_rmse == b.leader_tracking_rmse;
    }
} // namespace

TEST(TrackingRmse, ElementaryCases)
{
    const std::vector<Position> ref = {Position(0, 1), Position(1, 2), Position(2, 3), Position(3, 4)};
    EXPECT_EQ(tracking_rmse(ref, ref), 0.0);

    std::vector<Position> shifted = ref;
    std::vector<Position> alternating = ref;
    for (std::size_t k = 0; k < ref.size(); ++k)
    {
        shifted[k](0) += 0.1;
        alternating[k](0) += (k % 2 ? -0.1 : 0.1);
    }
    EXPECT_NEAR(tracking_rmse(shifted, ref), 0.1, 1e-15);
    EXPECT_NEAR(tracking_rmse(alternating, ref), 0.1, 1e-15);

    EXPECT_THROW(tracking_rmse({Position::Zero()}, ref), std::invalid_argument);
}

TEST(TrackingRmse, ConcatenationAggregates)
{
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<Position> h1, r1, h2, r2;
    for (int k = 0; k < 50; ++k)
    {
        h1.emplace_back(n(rng), n(rng));
        r1.emplace_back(n(rng), n(rng));
        h2.emplace_back(n(rng), n(rng));
        r2.emplace_back(n(rng), n(rng));
    }
    auto h = h1;
    auto r = r1;
    h.insert(h.end(), h2.begin(), h2.end());
    r.insert(r.end(), r2.begin(), r2.end());
    const double a = tracking_rmse(h1, r1);
    const double b = tracking_rmse(h2, r2);
    EXPECT_NEAR(tracking_rmse(h, r), std::sqrt(0.5 * (a * a + b * b)), 1e-14);
}

TEST(FormationRmse, ExactAndDisplacedFormations)
{
    const FormationSpec spec = triangular_spec(0.5, 0.5);
    std::vector<std::vector<Position>> histories(3);
    for (int k = 0; k < 20; ++k)
    {
        const auto p = spec.nominal_positions(Position(0.1 * k, 1.0));
        for (int a = 0; a < 3; ++a)
            histories[a].push_back(p[a]);
    }
    for (const auto &pair : formation_rmse(histories, spec))
        EXPECT_LT(pair.rmse, 1e-15);

    // Push follower 1 radially away from the leader by 0.05 m.
    for (int k = 0; k < 20; ++k)
    {
        const Position dir = (histories[1][k] - histories[0][k]).normalized();
        histories[1][k] += 0.05 * dir;
    }
    for (const auto &pair : formation_rmse(histories, spec))
        if (pair.first == 0 && pair.second == 1)
            EXPECT_NEAR(pair.rmse, 0.05, 1e-14);

    histories[2].pop_back();
    EXPECT_THROW(formation_rmse(histories, spec), std::invalid_argument);
}

TEST(Metrics, InvariantUnderCommonPlanarMotion)
{
    const FormationSpec spec = triangular_spec(0.5, 0.5);
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n(0.0, 0.3);
    std::uniform_real_distribution<double> angle(-M_PI, M_PI);

    std::vector<std::vector<Position>> histories(3);
    std::vector<Position> reference;
    for (int k = 0; k < 30; ++k)
    {
        const auto p = spec.nominal_positions(Position(0.1 * k, std::sin(0.2 * k)));
        for (int a = 0; a < 3; ++a)
            histories[a].push_back(p[a] + 0.05 * Position(n(rng), n(rng)));
        reference.push_back(p[0]);
    }
    const double tracking = tracking_rmse(histories[0], reference);
    const auto pairs = formation_rmse(histories, spec);

    for (int trial = 0; trial < 100; ++trial)
    {
        const PlanarTransform t{angle(rng), Position(10 * n(rng), 10 * n(rng))};
        std::vector<std::vector<Position>> moved;
        for (const auto &h : histories)
            moved.push_back(apply_transform(t, h));
        EXPECT_NEAR(tracking_rmse(moved[0], apply_transform(t, reference)), tracking, 1e-9);
        const auto moved_pairs = formation_rmse(moved, spec);
        for (std::size_t i = 0; i < pairs.size(); ++i)
            EXPECT_NEAR(moved_pairs[i].rmse, pairs[i].rmse, 1e-9);
    }
}

TEST(Rollout, HoverPlanStaysPut)
{
    const ScenarioConfig config;
    const FormationSpec spec = make_formation(config);
    FleetPlan fleet;
    const auto model = make_fleet_settings(config).model;
    const auto start = spec.nominal_positions(Position(0.0, 1.0));
    std::vector<Position> reference;
    OcpProblem grid;
    for (int a = 0; a < 3; ++a)
    {
        TrajectoryPlan plan;
        plan.times = grid.times();
        for (int k = 0; k < grid.node_count; ++k)
        {
            plan.states.push_back(AgentState::from(start[a](0), 0, start[a](1), 0, 0, 0));
            plan.controls.push_back(model.hover_input());
        }
        fleet.plans.push_back(plan);
    }
    for (int k = 0; k < grid.node_count; ++k)
        reference.push_back(start[0]);

    RolloutConfig rc;
    rc.noise.std_dev = 0.0;
    rc.trial_count = 1;
    const RolloutReport report = rollout(fleet, model, rc, EvaluationTargets{spec, reference});
    for (const auto &agent : report.trials[0].agents)
        for (const auto &s : agent)
            ASSERT_LT((s.values - agent.front().values).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(report.leader_tracking_rmse, 1e-12);
}

TEST(Rollout, NominalReplayReproducesThePlan)
{
    const ScenarioConfig config;
    const FleetPlan &fleet = default_fleet();
    const SimulationResult result = simulate_scenario(config, fleet);
    // Trapezoidal collocation and RK4 under linear input interpolation differ at O(dt^3) per step,
    // which on the default grid leaves a few 1e-4 of drift by the final node.
    for (std::size_t a = 0; a < fleet.plans.size(); ++a)
    {
        const auto &plan = fleet.plans[a].states;
        const auto &replayed = result.nominal.trials[0].agents[a];
        ASSERT_EQ(replayed.size(), plan.size());
        EXPECT_LT((replayed.back().values - plan.back().values).cwiseAbs().maxCoeff(), 1e-3) << a;
    }
    EXPECT_LE(result.nominal.leader_tracking_rmse, 1e-2);
}

TEST(Rollout, NominalIsIndependentOfSeedAndNoisyIsReproducible)
{
    ScenarioConfig a;
    ScenarioConfig b;
    b.seed = a.seed + 1;
    const FleetPlan &fleet = default_fleet();
    const SimulationResult ra = simulate_scenario(a, fleet);
    const SimulationResult rb = simulate_scenario(b, fleet);
    EXPECT_TRUE(same_histories(ra.nominal, rb.nominal));
    EXPECT_FALSE(same_histories(ra.noisy, rb.noisy));
    EXPECT_TRUE(same_histories(ra.noisy, simulate_scenario(a, fleet).noisy));
    EXPECT_EQ(ra.noisy.trials.size(), 20u);
    for (double v : ra.noisy.trial_leader_rmse)
        EXPECT_GE(v, 0.0);
}

TEST(Rollout, GridMismatchIsRejected)
{
    const ScenarioConfig config;
    const FormationSpec spec = make_formation(config);
    RolloutConfig rc;
    rc.dt = 0.05;
    const LeaderReference ref = make_leader_reference(config);
    EXPECT_THROW(rollout(default_fleet(), make_fleet_settings(config).model, rc, EvaluationTargets{spec, ref.positions}),
                 std::invalid_argument);
    rc = RolloutConfig{};
    rc.trial_count = 0;
    EXPECT_THROW(rc.validate(), std::invalid_argument);
}

TEST(Resolve, ZeroNoiseReproducesTheNominalFleet)
{
    ScenarioConfig config;
    config.noise_evaluation = NoiseEvaluation::kResolve;
    config.noise_std_dev = 0.0;
    config.trials = 1;
    const SimulationResult result = simulate_scenario(config, default_fleet());
    const auto &leader = result.noisy.trials[0].agents[0];
    for (std::size_t k = 0; k < leader.size(); ++k)
        ASSERT_EQ(leader[k].values, default_fleet().plans[0].states[k].values);
}

TEST(Disturbance, SequenceIsGainTimesSample)
{
    NoiseSpec noise;
    noise.seed = 5;
    noise.gain = 3.0 * Matrix6d::Identity();
    const auto seq = disturbance_sequence(noise, 1, 2, 4);
    ASSERT_EQ(seq.size(), 4u);
    NoiseSpec stream = noise;
    stream.seed = sub_seed(5, 1, 2);
    EXPECT_EQ(seq[3], 3.0 * sample_noise(stream, 3));
}

TEST(Statistics, BootstrapIntervalBracketsTheMean)
{
    const std::vector<double> values = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
    const MeanInterval m = bootstrap_mean(values, 0.95, 2000, 3);
    EXPECT_DOUBLE_EQ(m.mean, 3.5);
    EXPECT_LE(m.lower, m.mean);
    EXPECT_GE(m.upper, m.mean);
    EXPECT_EQ(bootstrap_mean(values, 0.95, 2000, 3).lower, m.lower);
    EXPECT_THROW(bootstrap_mean({}), std::invalid_argument);
}

TEST(Statistics, MonotoneCheckCountsInversions)
{
    const std::vector<MeanInterval> rising = {{1, 0.5, 1.5}, {2, 1.5, 2.5}, {3, 2.5, 3.5}};
    EXPECT_EQ(check_monotone(rising).inversions, 0);
    const std::vector<MeanInterval> overlap = {{1, 0.5, 1.5}, {0.9, 0.4, 1.4}, {3, 2.5, 3.5}};
    EXPECT_EQ(check_monotone(overlap).inversions, 1);
    EXPECT_EQ(check_monotone(overlap).non_overlapping_inversions, 0);
    const std::vector<MeanInterval> disjoint = {{3, 2.9, 3.1}, {1, 0.9, 1.1}};
    EXPECT_EQ(check_monotone(disjoint).non_overlapping_inversions, 1);
}
