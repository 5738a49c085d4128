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
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "quadform/scenario.hpp"

namespace fs = std::filesystem;
using namespace quadform;

namespace
{
    struct Options
    {
        std::string config_path;
        std::string out_dir;
        std::optional<std::uint64_t> seed;
        std::optional<int> trials;
        std::optional<double> noise_sigma;
        std::optional<int> sweeps;
        bool quiet = false;
    };

    void add_common_options(CLI::App *cmd, Options &opt)
    {
        cmd->add_option("--config", opt.config_path, "Scenario YAML file (defaults apply when omitted)");
        cmd->add_option("--out", opt.out_dir, "Artifact directory (overrides output_dir)");
        cmd->add_option("--seed", opt.seed, "Noise seed (overrides seed)");
        cmd->add_option("--trials", opt.trials, "Monte-Carlo trial count (overrides trials)");
        cmd->add_option("--noise-sigma", opt.noise_sigma, "Noise standard deviation (overrides noise_std_dev)");
        cmd->add_option("--sweeps", opt.sweeps, "Follower refinement sweeps (overrides sweeps)");
        cmd->add_flag("--quiet", opt.quiet, "Print errors only");
    }

    // Stages that consume earlier artifacts fall back to the configuration recorded with them.
    ScenarioConfig resolve_config(const Options &opt, RunStage stage)
    {
        ScenarioConfig config;
        if (!opt.config_path.empty())
            config = load_config(opt.config_path);
        else if ((stage == RunStage::kSimulate || stage == RunStage::kEmitPlots) && !opt.out_dir.empty())
            config = read_manifest_config(fs::path(opt.out_dir) / "manifest.yaml");

        if (!opt.out_dir.empty())
            config.output_dir = opt.out_dir;
        if (opt.seed)
            config.seed = *opt.seed;
        if (opt.trials)
            config.trials = *opt.trials;
        if (opt.noise_sigma)
            config.noise_std_dev = *opt.noise_sigma;
        if (opt.sweeps)
            config.sweeps = *opt.sweeps;
        return config;
    }

    void print_summary(const fs::path &dir)
    {
        std::ifstream in(dir / "rmse_summary.csv");
        if (!in)
            return;
        std::cout << "RMSE summary (m):\n";
        std::string line;
        while (std::getline(in, line))
            std::cout << "  " << line << "\n";
    }

    int execute(const Options &opt, RunStage stage, bool validate_only)
    {
        const std::string source = opt.config_path.empty() ? std::string("<defaults>") : opt.config_path;
        try
        {
            const ScenarioConfig config = resolve_config(opt, stage);
            validate(config);
            if (validate_only)
            {
                if (!opt.quiet)
                    std::cout << source << ": configuration is valid\n";
                return kExitSuccess;
            }

            const fs::path dir = config.output_dir;
            const ExitStatus status = run_scenario(config, dir, stage);
            if (status == kExitNotConverged)
                std::cerr << "quadform: warning: at least one solve did not converge; see " << (dir / "manifest.yaml")
                          << "\n";
            if (!opt.quiet)
            {
                std::cout << "artifacts written to " << dir << "\n";
                if (stage == RunStage::kRun || stage == RunStage::kSimulate)
                    print_summary(dir);
            }
            return status;
        }
        catch (const ConfigError &e)
        {
            std::cerr << "quadform: " << source << ": " << e.what() << "\n";
            return kExitInvalidConfig;
        }
        catch (const ArtifactError &e)
        {
            std::cerr << "quadform: " << e.what() << "\n";
            return kExitIoError;
        }
        catch (const fs::filesystem_error &e)
        {
            std::cerr << "quadform: " << e.what() << "\n";
            return kExitIoError;
        }
        catch (const NumericalError &e)
        {
            std::cerr << "quadform: solver failure at iteration " << e.iteration() << ": " << e.what() << "\n";
            return kExitNotConverged;
        }
    }
} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Leader-follower quadrotor formation planner"};
    app.require_subcommand(1);

    Options opt;
    struct Verb
    {
        const char *name;
        const char *help;
        RunStage stage;
        bool validate_only;
    };
    const Verb verbs[] = {
        {"validate", "Check a configuration without solving", RunStage::kPlan, true},
        {"plan", "Solve the fleet plan and write plan artifacts", RunStage::kPlan, false},
        {"simulate", "Roll out stored plans through the nominal and noisy plant", RunStage::kSimulate, false},
        {"run", "Plan, simulate and emit plot data", RunStage::kRun, false},
        {"emit-plots", "Write columnar figure data from stored artifacts", RunStage::kEmitPlots, false},
    };
    std::vector<std::pair<CLI::App *, const Verb *>> commands;
    for (const auto &verb : verbs)
    {
        CLI::App *cmd = app.add_subcommand(verb.name, verb.help);
        add_common_options(cmd, opt);
        commands.emplace_back(cmd, &verb);
    }

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp &e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError &e)
    {
        app.exit(e);
        return kExitInvalidConfig;
    }

    for (const auto &[cmd, verb] : commands)
        if (cmd->parsed())
            return execute(opt, verb->stage, verb->validate_only);
    return kExitInvalidConfig;
}
