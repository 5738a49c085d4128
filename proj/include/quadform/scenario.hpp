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
#ifndef QUADFORM_SCENARIO_HPP
#define QUADFORM_SCENARIO_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "quadform/coordinator.hpp"
#include "quadform/formation.hpp"
#include "quadform/sim.hpp"

namespace quadform
{
    /// A configuration problem, anchored to the line of the offending key when one is known.
    class ConfigError : public std::runtime_error
    {
    public:
        ConfigError(const std::string &message, int line = 0);
        int line() const { return line_; }

    private:
        int line_;
    };

    /// Reading or writing an artifact failed, or an artifact is missing or malformed.
    class ArtifactError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    enum class NoiseEvaluation
    {
        kReplay,  // planned controls replayed open loop through the noisy plant
        kResolve, // fleet re-planned with each sampled disturbance sequence
    };

    /**
     * Every knob of a single scenario. The YAML file is a flat mapping whose
     * keys match the member names below; unknown keys are rejected.
     */
    struct ScenarioConfig
    {
        // Vehicle.
        double mass = 0.028;
        double inertia_xx = 6.4893e-6;
        double gravity = 9.81;

        // Formation.
        double leader_follower_distance = 0.5;
        double follower_follower_distance = 0.5;
        int leader_index = 0;

        // Leader reference.
        double reference_amplitude = 0.5;
        double reference_angular_frequency = 0.6283185307179586;
        double reference_forward_speed = 0.1;
        double reference_base_altitude = 1.0;

        // Cost.
        std::array<double, 2> control_weight = {1.0, 1.0};
        std::array<double, 2> tracking_weight = {1.0, 1.0};
        std::array<double, 6> terminal_weight = {1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
        double penalty_weight = 1.0;
        PenaltyForm penalty_form = PenaltyForm::kSquared;

        // Input bounds: u1_max = factor * m * g, u2_max = factor * I_xx * pi.
        double u1_bound_mg_factor = 1.2;
        double u2_bound_ixx_pi_factor = 0.1;

        // Grid.
        double horizon = 10.0;
        int node_count = 101;

        // Noise.
        double noise_mean = 0.0;
        double noise_std_dev = 0.2;
        std::array<double, 6> noise_gain = {1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
        std::uint64_t seed = 20240531;
        int trials = 20;
        NoiseEvaluation noise_evaluation = NoiseEvaluation::kReplay;

        // Solver and coordination.
        SolverConfig solver;
        int sweeps = 2;
        CouplingOrder coupling = CouplingOrder::kGaussSeidel;

        std::string output_dir = "quadform-out";

        /// Source line of each key as read; empty for defaults.
        struct SourceLines
        {
            std::map<std::string, int> lines;

            int of(const std::string &key) const;
            /// Provenance only, so it never makes two configurations differ.
            bool operator==(const SourceLines &) const { return true; }
        } key_lines;

        double u1_bound() const { return u1_bound_mg_factor * mass * gravity; }
        double u2_bound() const { return u2_bound_ixx_pi_factor * inertia_xx * 3.14159265358979323846; }

        bool operator==(const ScenarioConfig &) const = default;
    };

    /// Parses YAML text. Throws ConfigError on syntax errors, unknown keys and ill-typed values.
    ScenarioConfig parse_config(const std::string &yaml_text);
    ScenarioConfig load_config(const std::filesystem::path &path);

    /// Flat YAML carrying every key; parse_config(to_yaml(c)) == c.
    std::string to_yaml(const ScenarioConfig &config);

    /// Checks every module precondition up front. Throws ConfigError naming the key and its line.
    void validate(const ScenarioConfig &config);

    // Builders from a validated configuration.
    FormationSpec make_formation(const ScenarioConfig &config);
    FleetSettings make_fleet_settings(const ScenarioConfig &config);
    LeaderReference make_leader_reference(const ScenarioConfig &config);
    std::vector<AgentState> make_initial_states(const ScenarioConfig &config);
    RolloutConfig make_rollout_config(const ScenarioConfig &config, double std_dev, int trials);

    /// "leader", then "f1", "f2", ... for followers in index order.
    std::vector<std::string> agent_names(const FormationSpec &spec);

    struct SimulationResult
    {
        RolloutReport nominal;
        RolloutReport noisy;
    };

    FleetPlan plan_scenario(const ScenarioConfig &config);
    SimulationResult simulate_scenario(const ScenarioConfig &config, const FleetPlan &fleet);

    // Artifact files. All doubles use the shortest text that reads back to the same value.

    void write_plan_artifacts(const std::filesystem::path &dir, const ScenarioConfig &config, const FleetPlan &fleet);
    /// Reads plan_<agent>.csv files back; solve reports are left empty.
    FleetPlan read_plan_artifacts(const std::filesystem::path &dir, const ScenarioConfig &config);
    void write_simulation_artifacts(const std::filesystem::path &dir, const ScenarioConfig &config,
                                    const SimulationResult &result);

    /// Columnar data for the state, control, leader-error and formation-snapshot figures.
    void emit_plot_data(const std::filesystem::path &dir, const ScenarioConfig &config);

    /// Configuration section of a manifest written by write_plan_artifacts.
    ScenarioConfig read_manifest_config(const std::filesystem::path &manifest);

    enum class RunStage
    {
        kPlan,
        kSimulate,
        kRun,
        kEmitPlots,
    };

    /// Exit statuses shared with the command-line front end.
    enum ExitStatus
    {
        kExitSuccess = 0,
        kExitInvalidConfig = 1,
        kExitNotConverged = 2,
        kExitIoError = 3,
    };

    /// Executes one stage into `dir`; returns kExitNotConverged when any solve did not converge.
    ExitStatus run_scenario(const ScenarioConfig &config, const std::filesystem::path &dir, RunStage stage);

} // namespace quadform

#endif // QUADFORM_SCENARIO_HPP
