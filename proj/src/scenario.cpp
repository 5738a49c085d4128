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
#include "quadform/scenario.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

namespace quadform
{
    namespace fs = std::filesystem;

    namespace
    {
        constexpr int kSnapshotStride = 10;
        constexpr const char *kManifestFile = "manifest.yaml";
        constexpr const char *kSimulationFile = "simulation.yaml";
        constexpr const char *kErrorSeriesFile = "error_series.csv";

        // ---------------------------------------------------------------- parsing helpers

        int line_of(const YAML::Node &node) { return node.Mark().line + 1; }

        const std::string &scalar_text(const YAML::Node &node, const std::string &key)
        {
            if (!node.IsScalar())
                throw ConfigError(key + ": expected a scalar value", line_of(node));
            return node.Scalar();
        }

        double to_double(const YAML::Node &node, const std::string &key)
        {
            const std::string &text = scalar_text(node, key);
            double value = 0.0;
            const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
            if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value))
                throw ConfigError(key + ": '" + text + "' is not a finite number", line_of(node));
            return value;
        }

        template <class Int>
        Int to_integer(const YAML::Node &node, const std::string &key)
        {
            const std::string &text = scalar_text(node, key);
            Int value = 0;
            const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
            if (ec != std::errc() || ptr != text.data() + text.size())
                throw ConfigError(key + ": '" + text + "' is not an integer in range", line_of(node));
            return value;
        }

        bool to_bool(const YAML::Node &node, const std::string &key)
        {
            const std::string &text = scalar_text(node, key);
            if (text == "true")
                return true;
            if (text == "false")
                return false;
            throw ConfigError(key + ": expected true or false, got '" + text + "'", line_of(node));
        }

        template <std::size_t N>
        std::array<double, N> to_array(const YAML::Node &node, const std::string &key)
        {
            if (!node.IsSequence() || node.size() != N)
                throw ConfigError(fmt::format("{}: expected a list of {} numbers", key, N), line_of(node));
            std::array<double, N> out{};
            for (std::size_t i = 0; i < N; ++i)
                out[i] = to_double(node[i], key);
            return out;
        }

        template <class Enum>
        using EnumNames = std::vector<std::pair<Enum, const char *>>;

        const EnumNames<PenaltyForm> kPenaltyForms = {{PenaltyForm::kSquared, "squared"},
                                                      {PenaltyForm::kLinear, "linear"}};
        const EnumNames<NoiseEvaluation> kNoiseEvaluations = {{NoiseEvaluation::kReplay, "replay"},
                                                              {NoiseEvaluation::kResolve, "resolve"}};
        const EnumNames<CouplingOrder> kCouplings = {{CouplingOrder::kGaussSeidel, "gauss_seidel"},
                                                     {CouplingOrder::kJacobi, "jacobi"}};
        const EnumNames<SolverMetric> kMetrics = {{SolverMetric::kIdentity, "identity"},
                                                  {SolverMetric::kGaussNewton, "gauss_newton"}};

        template <class Enum>
        Enum to_enum(const YAML::Node &node, const std::string &key, const EnumNames<Enum> &names)
        {
            const std::string &text = scalar_text(node, key);
            std::string allowed;
            for (const auto &[value, name] : names)
            {
                if (text == name)
                    return value;
                allowed += allowed.empty() ? name : std::string(", ") + name;
            }
            throw ConfigError(key + ": '" + text + "' is not one of " + allowed, line_of(node));
        }

        template <class Enum>
        std::string enum_name(Enum value, const EnumNames<Enum> &names)
        {
            for (const auto &[v, name] : names)
                if (v == value)
                    return name;
            throw std::logic_error("unnamed enum value");
        }

        std::string quoted(const std::string &text)
        {
            std::string out = "\"";
            for (char c : text)
            {
                if (c == '"' || c == '\\')
                    out += '\\';
                out += c;
            }
            return out + "\"";
        }

        template <std::size_t N>
        std::string format_array(const std::array<double, N> &values)
        {
            return fmt::format("[{}]", fmt::join(values, ", "));
        }

        // ---------------------------------------------------------------- key table

        struct FieldCodec
        {
            std::string key;
            std::function<void(ScenarioConfig &, const YAML::Node &)> read;
            std::function<std::string(const ScenarioConfig &)> write;
        };

        // Each projection is a generic lambda returning a reference to the member, so one
        // accessor serves both the reader and the writer.
        template <class Proj>
        FieldCodec real(const std::string &key, Proj p)
        {
            return {key, [p, key](ScenarioConfig &c, const YAML::Node &n) { p(c) = to_double(n, key); },
                    [p](const ScenarioConfig &c) { return fmt::format("{}", p(c)); }};
        }

        template <class Proj>
        FieldCodec integer(const std::string &key, Proj p)
        {
            using T = std::remove_reference_t<decltype(p(std::declval<ScenarioConfig &>()))>;
            return {key, [p, key](ScenarioConfig &c, const YAML::Node &n) { p(c) = to_integer<T>(n, key); },
                    [p](const ScenarioConfig &c) { return fmt::format("{}", p(c)); }};
        }

        template <class Proj>
        FieldCodec boolean(const std::string &key, Proj p)
        {
            return {key, [p, key](ScenarioConfig &c, const YAML::Node &n) { p(c) = to_bool(n, key); },
                    [p](const ScenarioConfig &c) { return std::string(p(c) ? "true" : "false"); }};
        }

        template <class Proj>
        FieldCodec list(const std::string &key, Proj p)
        {
            using T = std::remove_reference_t<decltype(p(std::declval<ScenarioConfig &>()))>;
            return {key,
                    [p, key](ScenarioConfig &c, const YAML::Node &n) {
                        p(c) = to_array<std::tuple_size_v<T>>(n, key);
                    },
                    [p](const ScenarioConfig &c) { return format_array(p(c)); }};
        }

        template <class Enum, class Proj>
        FieldCodec choice(const std::string &key, const EnumNames<Enum> &names, Proj p)
        {
            return {key, [p, key, &names](ScenarioConfig &c, const YAML::Node &n) { p(c) = to_enum(n, key, names); },
                    [p, &names](const ScenarioConfig &c) { return enum_name(p(c), names); }};
        }

        const std::vector<FieldCodec> &fields()
        {
            static const std::vector<FieldCodec> table = {
                real("mass", [](auto &c) -> auto & { return c.mass; }),
                real("inertia_xx", [](auto &c) -> auto & { return c.inertia_xx; }),
                real("gravity", [](auto &c) -> auto & { return c.gravity; }),
                real("leader_follower_distance", [](auto &c) -> auto & { return c.leader_follower_distance; }),
                real("follower_follower_distance", [](auto &c) -> auto & { return c.follower_follower_distance; }),
                integer("leader_index", [](auto &c) -> auto & { return c.leader_index; }),
                real("reference_amplitude", [](auto &c) -> auto & { return c.reference_amplitude; }),
                real("reference_angular_frequency", [](auto &c) -> auto & { return c.reference_angular_frequency; }),
                real("reference_forward_speed", [](auto &c) -> auto & { return c.reference_forward_speed; }),
                real("reference_base_altitude", [](auto &c) -> auto & { return c.reference_base_altitude; }),
                list("control_weight", [](auto &c) -> auto & { return c.control_weight; }),
                list("tracking_weight", [](auto &c) -> auto & { return c.tracking_weight; }),
                list("terminal_weight", [](auto &c) -> auto & { return c.terminal_weight; }),
                real("penalty_weight", [](auto &c) -> auto & { return c.penalty_weight; }),
                choice("penalty_form", kPenaltyForms, [](auto &c) -> auto & { return c.penalty_form; }),
                real("u1_bound_mg_factor", [](auto &c) -> auto & { return c.u1_bound_mg_factor; }),
                real("u2_bound_ixx_pi_factor", [](auto &c) -> auto & { return c.u2_bound_ixx_pi_factor; }),
                real("horizon", [](auto &c) -> auto & { return c.horizon; }),
                integer("node_count", [](auto &c) -> auto & { return c.node_count; }),
                real("noise_mean", [](auto &c) -> auto & { return c.noise_mean; }),
                real("noise_std_dev", [](auto &c) -> auto & { return c.noise_std_dev; }),
                list("noise_gain", [](auto &c) -> auto & { return c.noise_gain; }),
                integer("seed", [](auto &c) -> auto & { return c.seed; }),
                integer("trials", [](auto &c) -> auto & { return c.trials; }),
                choice("noise_evaluation", kNoiseEvaluations, [](auto &c) -> auto & { return c.noise_evaluation; }),
                integer("solver_max_iterations", [](auto &c) -> auto & { return c.solver.max_iterations; }),
                real("solver_gradient_tolerance", [](auto &c) -> auto & { return c.solver.gradient_tolerance; }),
                real("solver_defect_tolerance", [](auto &c) -> auto & { return c.solver.defect_tolerance; }),
                real("solver_defect_penalty_initial", [](auto &c) -> auto & { return c.solver.defect_penalty_initial; }),
                real("solver_defect_penalty_growth", [](auto &c) -> auto & { return c.solver.defect_penalty_growth; }),
                real("solver_line_search_shrink", [](auto &c) -> auto & { return c.solver.line_search_shrink; }),
                real("solver_armijo_constant", [](auto &c) -> auto & { return c.solver.armijo_constant; }),
                integer("solver_max_penalty_rounds", [](auto &c) -> auto & { return c.solver.max_penalty_rounds; }),
                boolean("solver_multiplier_updates", [](auto &c) -> auto & { return c.solver.multiplier_updates; }),
                choice("solver_metric", kMetrics, [](auto &c) -> auto & { return c.solver.metric; }),
                integer("sweeps", [](auto &c) -> auto & { return c.sweeps; }),
                choice("coupling", kCouplings, [](auto &c) -> auto & { return c.coupling; }),
                {"output_dir", [](ScenarioConfig &c, const YAML::Node &n) { c.output_dir = scalar_text(n, "output_dir"); },
                 [](const ScenarioConfig &c) { return quoted(c.output_dir); }},
            };
            return table;
        }

        ScenarioConfig parse_node(const YAML::Node &root)
        {
            ScenarioConfig config;
            if (!root || root.IsNull())
                return config;
            if (!root.IsMap())
                throw ConfigError("configuration must be a mapping of key: value pairs", line_of(root));

            std::map<std::string, const FieldCodec *> by_key;
            for (const auto &f : fields())
                by_key[f.key] = &f;

            std::set<std::string> seen;
            for (const auto &entry : root)
            {
                const std::string key = entry.first.as<std::string>();
                const int line = line_of(entry.first);
                const auto it = by_key.find(key);
                if (it == by_key.end())
                    throw ConfigError("unknown key '" + key + "'", line);
                if (!seen.insert(key).second)
                    throw ConfigError("duplicate key '" + key + "'", line);
                it->second->read(config, entry.second);
                config.key_lines.lines[key] = line;
            }
            return config;
        }

        // ---------------------------------------------------------------- validation helpers

        [[noreturn]] void reject(const ScenarioConfig &c, const std::string &key, const std::string &why)
        {
            throw ConfigError(key + ": " + why, c.key_lines.of(key));
        }

        void require_positive(const ScenarioConfig &c, const std::string &key, double value)
        {
            if (!(value > 0.0))
                reject(c, key, fmt::format("must be positive, got {}", value));
        }

        // ---------------------------------------------------------------- artifact helpers

        std::ofstream open_output(const fs::path &path)
        {
            std::ofstream out(path, std::ios::binary | std::ios::trunc);
            if (!out)
                throw ArtifactError("cannot open '" + path.string() + "' for writing");
            return out;
        }

        void write_file(const fs::path &path, const std::string &text)
        {
            auto out = open_output(path);
            out << text;
            if (!out)
                throw ArtifactError("failed writing '" + path.string() + "'");
        }

        void ensure_directory(const fs::path &dir)
        {
            std::error_code ec;
            fs::create_directories(dir, ec);
            if (ec)
                throw ArtifactError("cannot create directory '" + dir.string() + "': " + ec.message());
        }

        struct Table
        {
            std::vector<std::string> header;
            std::vector<std::vector<double>> rows;

            int column(const std::string &name, const fs::path &source) const
            {
                for (std::size_t i = 0; i < header.size(); ++i)
                    if (header[i] == name)
                        return static_cast<int>(i);
                throw ArtifactError("'" + source.string() + "' has no column '" + name + "'");
            }
        };

        std::vector<std::string> split_commas(const std::string &line)
        {
            std::vector<std::string> out;
            std::stringstream in(line);
            std::string cell;
            while (std::getline(in, cell, ','))
                out.push_back(cell);
            return out;
        }

        Table read_numeric_csv(const fs::path &path)
        {
            std::ifstream in(path, std::ios::binary);
            if (!in)
                throw ArtifactError("missing artifact '" + path.string() + "'");
            Table table;
            std::string line;
            if (!std::getline(in, line))
                throw ArtifactError("'" + path.string() + "' is empty");
            table.header = split_commas(line);
            int line_no = 1;
            while (std::getline(in, line))
            {
                ++line_no;
                const auto cells = split_commas(line);
                if (cells.size() != table.header.size())
                    throw ArtifactError(fmt::format("{}:{}: expected {} fields", path.string(), line_no,
                                                    table.header.size()));
                std::vector<double> row;
                for (const auto &cell : cells)
                {
                    double v = 0.0;
                    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
                    if (ec != std::errc() || ptr != cell.data() + cell.size())
                        throw ArtifactError(fmt::format("{}:{}: bad number '{}'", path.string(), line_no, cell));
                    row.push_back(v);
                }
                table.rows.push_back(std::move(row));
            }
            return table;
        }

        const char *kStateColumns = "y,y_dot,z,z_dot,phi,phi_dot";

        std::string state_cells(const AgentState &s)
        {
            return fmt::format("{},{},{},{},{},{}", s.values(0), s.values(1), s.values(2), s.values(3), s.values(4),
                               s.values(5));
        }

        std::string pair_name(const std::vector<std::string> &names, int first, int second)
        {
            return names[first] + "_" + names[second];
        }

        std::string indent(const std::string &text, const std::string &prefix)
        {
            std::string out;
            std::stringstream in(text);
            std::string line;
            while (std::getline(in, line))
                out += prefix + line + "\n";
            return out;
        }

        bool plans_converged(const FleetPlan &fleet) { return fleet.all_converged(); }
    } // namespace

    ConfigError::ConfigError(const std::string &message, int line)
        : std::runtime_error(line > 0 ? fmt::format("line {}: {}", line, message) : message), line_(line)
    {
    }

    int ScenarioConfig::SourceLines::of(const std::string &key) const
    {
        const auto it = lines.find(key);
        return it == lines.end() ? 0 : it->second;
    }

    ScenarioConfig parse_config(const std::string &yaml_text)
    {
        YAML::Node root;
        try
        {
            root = YAML::Load(yaml_text);
        }
        catch (const YAML::Exception &e)
        {
            throw ConfigError("YAML syntax error: " + e.msg, e.mark.line + 1);
        }
        return parse_node(root);
    }

    ScenarioConfig load_config(const fs::path &path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw ArtifactError("cannot read configuration '" + path.string() + "'");
        std::stringstream buffer;
        buffer << in.rdbuf();
        return parse_config(buffer.str());
    }

    std::string to_yaml(const ScenarioConfig &config)
    {
        std::string out;
        for (const auto &f : fields())
            out += f.key + ": " + f.write(config) + "\n";
        return out;
    }

    void validate(const ScenarioConfig &c)
    {
        require_positive(c, "mass", c.mass);
        require_positive(c, "inertia_xx", c.inertia_xx);
        require_positive(c, "gravity", c.gravity);

        require_positive(c, "leader_follower_distance", c.leader_follower_distance);
        require_positive(c, "follower_follower_distance", c.follower_follower_distance);
        try
        {
            triangular_spec(c.leader_follower_distance, c.follower_follower_distance, 0);
        }
        catch (const FormationError &e)
        {
            reject(c, c.key_lines.of("follower_follower_distance") ? "follower_follower_distance"
                                                                   : "leader_follower_distance",
                   e.what());
        }
        if (c.leader_index < 0 || c.leader_index > 2)
            reject(c, "leader_index", "must name one of the three agents (0, 1 or 2)");

        for (double w : c.control_weight)
            if (!(w > 0.0))
                reject(c, "control_weight", "entries must be positive (R must be positive definite)");
        for (double w : c.tracking_weight)
            if (!(w > 0.0))
                reject(c, "tracking_weight", "entries must be positive (the leader's Q must be positive definite)");
        for (double w : c.terminal_weight)
            if (!(w > 0.0))
                reject(c, "terminal_weight", "entries must be positive (P must be positive definite)");
        require_positive(c, "penalty_weight", c.penalty_weight);

        if (!(c.u1_bound_mg_factor >= 1.0))
            reject(c, "u1_bound_mg_factor", fmt::format("must be at least 1 so hover thrust is admissible, got {}",
                                                        c.u1_bound_mg_factor));
        require_positive(c, "u2_bound_ixx_pi_factor", c.u2_bound_ixx_pi_factor);

        require_positive(c, "horizon", c.horizon);
        if (c.node_count < 2)
            reject(c, "node_count", "must be at least 2");

        if (c.noise_std_dev < 0.0)
            reject(c, "noise_std_dev", "must be non-negative");
        if (c.trials < 1)
            reject(c, "trials", "must be at least 1");

        if (c.solver.max_iterations < 1)
            reject(c, "solver_max_iterations", "must be at least 1");
        require_positive(c, "solver_gradient_tolerance", c.solver.gradient_tolerance);
        require_positive(c, "solver_defect_tolerance", c.solver.defect_tolerance);
        require_positive(c, "solver_defect_penalty_initial", c.solver.defect_penalty_initial);
        if (!(c.solver.defect_penalty_growth > 1.0))
            reject(c, "solver_defect_penalty_growth", "must exceed 1");
        if (!(c.solver.line_search_shrink > 0.0 && c.solver.line_search_shrink < 1.0))
            reject(c, "solver_line_search_shrink", "must lie strictly between 0 and 1");
        if (!(c.solver.armijo_constant > 0.0 && c.solver.armijo_constant < 1.0))
            reject(c, "solver_armijo_constant", "must lie strictly between 0 and 1");
        if (c.solver.max_penalty_rounds < 1)
            reject(c, "solver_max_penalty_rounds", "must be at least 1");

        if (c.sweeps < 1)
            reject(c, "sweeps", "must be at least 1");
        if (c.output_dir.empty())
            reject(c, "output_dir", "must not be empty");

        // Backstop: the modules' own checks on the objects the run will build.
        try
        {
            QuadParams{c.mass, c.inertia_xx, c.gravity}.validate();
            make_rollout_config(c, c.noise_std_dev, c.trials).validate();
            c.solver.validate();
            const FleetSettings settings = make_fleet_settings(c);
            const FormationSpec spec = make_formation(c);
            const LeaderReference reference = make_leader_reference(c);
            const auto initial = make_initial_states(c);
            std::vector<std::vector<Position>> partners(spec.agent_count(), reference.positions);
            for (int a = 0; a < spec.agent_count(); ++a)
                build_agent_problem(spec, a, reference, initial, partners, reference.terminal_state, settings).validate();
        }
        catch (const std::invalid_argument &e)
        {
            throw ConfigError(e.what());
        }
    }

    FormationSpec make_formation(const ScenarioConfig &c)
    {
        return triangular_spec(c.leader_follower_distance, c.follower_follower_distance, c.leader_index);
    }

    FleetSettings make_fleet_settings(const ScenarioConfig &c)
    {
        FleetSettings s;
        s.model = build_state_space(QuadParams{c.mass, c.inertia_xx, c.gravity});
        Matrix6d gain = Matrix6d::Zero();
        for (int i = 0; i < kStateDim; ++i)
            gain(i, i) = c.noise_gain[i];
        s.model.noise_gain = gain;
        s.horizon = c.horizon;
        s.node_count = c.node_count;
        s.control_weight = Eigen::Vector2d(c.control_weight[0], c.control_weight[1]).asDiagonal();
        s.leader_tracking_weight = Eigen::Vector2d(c.tracking_weight[0], c.tracking_weight[1]).asDiagonal();
        s.terminal_weight = Vector6d(Eigen::Map<const Vector6d>(c.terminal_weight.data())).asDiagonal();
        s.penalty_weight = c.penalty_weight;
        s.penalty_form = c.penalty_form;
        s.u1_bound = c.u1_bound();
        s.u2_bound = c.u2_bound();
        s.solver = c.solver;
        s.sweeps = c.sweeps;
        s.coupling = c.coupling;
        return s;
    }

    namespace
    {
        SinusoidReference make_sinusoid(const ScenarioConfig &c)
        {
            SinusoidReference r;
            r.amplitude = c.reference_amplitude;
            r.angular_frequency = c.reference_angular_frequency;
            r.forward_speed = c.reference_forward_speed;
            r.base_altitude = c.reference_base_altitude;
            return r;
        }

        std::vector<double> grid_times(const ScenarioConfig &c)
        {
            OcpProblem grid;
            grid.horizon = c.horizon;
            grid.node_count = c.node_count;
            return grid.times();
        }
    } // namespace

    LeaderReference make_leader_reference(const ScenarioConfig &c)
    {
        const SinusoidReference r = make_sinusoid(c);
        return LeaderReference{r.sample(grid_times(c)), r.state(c.horizon)};
    }

    std::vector<AgentState> make_initial_states(const ScenarioConfig &c)
    {
        return formation_initial_states(make_formation(c), make_sinusoid(c).state(0.0));
    }

    RolloutConfig make_rollout_config(const ScenarioConfig &c, double std_dev, int trials)
    {
        RolloutConfig r;
        r.noise.mean = c.noise_mean;
        r.noise.std_dev = std_dev;
        r.noise.seed = c.seed;
        Matrix6d gain = Matrix6d::Zero();
        for (int i = 0; i < kStateDim; ++i)
            gain(i, i) = c.noise_gain[i];
        r.noise.gain = gain;
        r.trial_count = trials;
        r.dt = c.horizon / (c.node_count - 1);
        return r;
    }

    std::vector<std::string> agent_names(const FormationSpec &spec)
    {
        std::vector<std::string> names(spec.agent_count());
        int follower = 0;
        for (int a = 0; a < spec.agent_count(); ++a)
            names[a] = spec.is_leader(a) ? "leader" : fmt::format("f{}", ++follower);
        return names;
    }

    FleetPlan plan_scenario(const ScenarioConfig &config)
    {
        return plan_fleet(make_formation(config), make_leader_reference(config), make_initial_states(config),
                          make_fleet_settings(config));
    }

    SimulationResult simulate_scenario(const ScenarioConfig &config, const FleetPlan &fleet)
    {
        const FormationSpec spec = make_formation(config);
        const FleetSettings settings = make_fleet_settings(config);
        const LeaderReference reference = make_leader_reference(config);
        const EvaluationTargets targets{spec, reference.positions};

        SimulationResult result;
        result.nominal = rollout(fleet, settings.model, make_rollout_config(config, 0.0, 1), targets);
        const RolloutConfig noisy = make_rollout_config(config, config.noise_std_dev, config.trials);
        if (config.noise_evaluation == NoiseEvaluation::kReplay)
            result.noisy = rollout(fleet, settings.model, noisy, targets);
        else
            result.noisy = resolve_trials(spec, reference, make_initial_states(config), settings, noisy);
        return result;
    }

    void write_plan_artifacts(const fs::path &dir, const ScenarioConfig &config, const FleetPlan &fleet)
    {
        ensure_directory(dir);
        const FormationSpec spec = make_formation(config);
        const auto names = agent_names(spec);

        for (int a = 0; a < spec.agent_count(); ++a)
        {
            const auto &plan = fleet.plans.at(a);
            std::string text = fmt::format("time,{},u1,u2\n", kStateColumns);
            for (int k = 0; k < plan.node_count(); ++k)
                text += fmt::format("{},{},{},{}\n", plan.times[k], state_cells(plan.states[k]),
                                    plan.controls[k].u1(), plan.controls[k].u2());
            write_file(dir / ("plan_" + names[a] + ".csv"), text);
        }

        std::string manifest = "format: quadform-run-manifest 1\n";
        manifest += "config:\n" + indent(to_yaml(config), "  ");
        manifest += fmt::format("seeds:\n  noise: {}\n", config.seed);
        manifest += "agents:\n";
        for (int a = 0; a < spec.agent_count(); ++a)
        {
            const auto &r = fleet.per_agent_reports.at(a);
            manifest += fmt::format("  - name: {}\n    index: {}\n    role: {}\n    converged: {}\n"
                                    "    status: {}\n    iterations: {}\n    penalty_rounds: {}\n"
                                    "    objective: {}\n    max_defect: {}\n    projected_gradient: {}\n",
                                    names[a], a, spec.is_leader(a) ? "leader" : "follower",
                                    r.converged ? "true" : "false", quoted(r.status), r.iterations, r.penalty_rounds,
                                    r.final_objective, r.max_defect, r.final_gradient_norm);
        }
        manifest += fmt::format("sweeps:\n  count: {}\n  follower_penalty_cost: [{}]\n  non_monotone: [{}]\n",
                                fleet.sweep_count, fmt::join(fleet.sweep_penalty_cost, ", "),
                                fmt::join(fleet.non_monotone_sweeps, ", "));
        manifest += fmt::format("all_converged: {}\n", plans_converged(fleet) ? "true" : "false");
        write_file(dir / kManifestFile, manifest);
    }

    FleetPlan read_plan_artifacts(const fs::path &dir, const ScenarioConfig &config)
    {
        const FormationSpec spec = make_formation(config);
        const auto names = agent_names(spec);
        FleetPlan fleet;
        for (int a = 0; a < spec.agent_count(); ++a)
        {
            const fs::path path = dir / ("plan_" + names[a] + ".csv");
            const Table table = read_numeric_csv(path);
            if (table.header.size() != 9)
                throw ArtifactError("'" + path.string() + "' does not have the plan column layout");
            TrajectoryPlan plan;
            for (const auto &row : table.rows)
            {
                plan.times.push_back(row[0]);
                Vector6d x;
                x << row[1], row[2], row[3], row[4], row[5], row[6];
                plan.states.emplace_back(x);
                plan.controls.emplace_back(row[7], row[8]);
            }
            if (plan.node_count() != config.node_count)
                throw ArtifactError(fmt::format("'{}' has {} nodes, the configuration expects {}", path.string(),
                                                plan.node_count(), config.node_count));
            fleet.plans.push_back(std::move(plan));
        }
        fleet.per_agent_reports.resize(spec.agent_count());
        return fleet;
    }

    void write_simulation_artifacts(const fs::path &dir, const ScenarioConfig &config, const SimulationResult &result)
    {
        ensure_directory(dir);
        const FormationSpec spec = make_formation(config);
        const auto names = agent_names(spec);
        const auto times = grid_times(config);
        const int leader = spec.leader_index();

        auto trajectories = [&](const RolloutReport &report, const std::string &file) {
            auto out = open_output(dir / file);
            out << "trial,agent," << "time," << kStateColumns << "\n";
            for (std::size_t t = 0; t < report.trials.size(); ++t)
                for (std::size_t a = 0; a < report.trials[t].agents.size(); ++a)
                    for (std::size_t k = 0; k < times.size(); ++k)
                        out << fmt::format("{},{},{},{}\n", t, names[a], times[k],
                                           state_cells(report.trials[t].agents[a][k]));
            if (!out)
                throw ArtifactError("failed writing '" + (dir / file).string() + "'");
        };
        trajectories(result.nominal, "trajectories_nominal.csv");
        trajectories(result.noisy, "trajectories_noisy.csv");

        // Error series: mean absolute error per node.
        std::string text = "time,leader_nominal,leader_with_noise";
        for (const auto &e : spec.edges())
        {
            const auto pair = pair_name(names, e.first, e.second);
            text += "," + pair + "_nominal," + pair + "_with_noise";
        }
        text += "\n";
        for (std::size_t k = 0; k < times.size(); ++k)
        {
            text += fmt::format("{},{},{}", times[k], result.nominal.leader_error_series[k],
                                result.noisy.leader_error_series[k]);
            for (std::size_t e = 0; e < spec.edges().size(); ++e)
                text += fmt::format(",{},{}", result.nominal.pair_error_series[e][k],
                                    result.noisy.pair_error_series[e][k]);
            text += "\n";
        }
        write_file(dir / kErrorSeriesFile, text);

        // Summary in the leader / follower layout: followers report their distance to the leader.
        text = "agent,nominal,with_noise\n";
        text += fmt::format("Leader,{},{}\n", result.nominal.leader_tracking_rmse, result.noisy.leader_tracking_rmse);
        for (int a = 0; a < spec.agent_count(); ++a)
        {
            if (a == leader)
                continue;
            for (std::size_t e = 0; e < spec.edges().size(); ++e)
            {
                const auto &edge = spec.edges()[e];
                if ((edge.first == leader && edge.second == a) || (edge.first == a && edge.second == leader))
                    text += fmt::format("{},{},{}\n", names[a], result.nominal.distance_rmse[e].rmse,
                                        result.noisy.distance_rmse[e].rmse);
            }
        }
        write_file(dir / "rmse_summary.csv", text);

        text = "first,second,desired_distance,nominal,with_noise\n";
        for (std::size_t e = 0; e < spec.edges().size(); ++e)
        {
            const auto &edge = spec.edges()[e];
            text += fmt::format("{},{},{},{},{}\n", names[edge.first], names[edge.second], edge.distance,
                                result.nominal.distance_rmse[e].rmse, result.noisy.distance_rmse[e].rmse);
        }
        write_file(dir / "pair_rmse.csv", text);

        text = "trial,leader";
        for (const auto &e : spec.edges())
            text += "," + pair_name(names, e.first, e.second);
        text += "\n";
        for (std::size_t t = 0; t < result.noisy.trials.size(); ++t)
        {
            text += fmt::format("{},{}", t, result.noisy.trial_leader_rmse[t]);
            for (const auto &p : result.noisy.trial_distance_rmse[t])
                text += fmt::format(",{}", p.rmse);
            text += "\n";
        }
        write_file(dir / "trial_rmse.csv", text);

        std::string manifest = "format: quadform-simulation 1\n";
        manifest += "config:\n" + indent(to_yaml(config), "  ");
        manifest += fmt::format("noise_evaluation: {}\nnoise_std_dev: {}\ntrials: {}\n",
                                enum_name(config.noise_evaluation, kNoiseEvaluations), config.noise_std_dev,
                                config.trials);
        manifest += fmt::format("seeds:\n  noise: {}\n  streams:\n", config.seed);
        for (int t = 0; t < config.trials; ++t)
            for (int a = 0; a < spec.agent_count(); ++a)
                manifest += fmt::format("    - {{trial: {}, agent: {}, seed: {}}}\n", t, names[a],
                                        sub_seed(config.seed, a, t));
        write_file(dir / kSimulationFile, manifest);
    }

    void emit_plot_data(const fs::path &dir, const ScenarioConfig &config)
    {
        const FormationSpec spec = make_formation(config);
        const auto names = agent_names(spec);
        const FleetPlan fleet = read_plan_artifacts(dir, config);
        const Table errors = read_numeric_csv(dir / kErrorSeriesFile);

        for (int a = 0; a < spec.agent_count(); ++a)
        {
            const auto &plan = fleet.plans[a];
            std::string states = fmt::format("time,{}\n", kStateColumns);
            std::string controls = "time,u1,u2\n";
            for (int k = 0; k < plan.node_count(); ++k)
            {
                states += fmt::format("{},{}\n", plan.times[k], state_cells(plan.states[k]));
                controls += fmt::format("{},{},{}\n", plan.times[k], plan.controls[k].u1(), plan.controls[k].u2());
            }
            write_file(dir / ("fig_states_" + names[a] + ".csv"), states);
            write_file(dir / ("fig_controls_" + names[a] + ".csv"), controls);
        }

        const int t_col = errors.column("time", dir / kErrorSeriesFile);
        const int nominal_col = errors.column("leader_nominal", dir / kErrorSeriesFile);
        const int noisy_col = errors.column("leader_with_noise", dir / kErrorSeriesFile);
        std::string text = "time,nominal,with_noise\n";
        for (const auto &row : errors.rows)
            text += fmt::format("{},{},{}\n", row[t_col], row[nominal_col], row[noisy_col]);
        write_file(dir / "fig_leader_error.csv", text);

        // Snapshots of the planned formation in the y-z plane, with its distance edges.
        const int nodes = fleet.plans.front().node_count();
        std::vector<int> snapshots;
        for (int k = 0; k < nodes; k += kSnapshotStride)
            snapshots.push_back(k);
        if (snapshots.back() != nodes - 1)
            snapshots.push_back(nodes - 1);

        std::string points = "snapshot,time,agent,y,z\n";
        std::string edges = "snapshot,time,first,second,y_first,z_first,y_second,z_second\n";
        for (std::size_t s = 0; s < snapshots.size(); ++s)
        {
            const int k = snapshots[s];
            const double t = fleet.plans.front().times[k];
            for (int a = 0; a < spec.agent_count(); ++a)
            {
                const Position p = fleet.plans[a].states[k].position();
                points += fmt::format("{},{},{},{},{}\n", s, t, names[a], p(0), p(1));
            }
            for (const auto &e : spec.edges())
            {
                const Position p = fleet.plans[e.first].states[k].position();
                const Position q = fleet.plans[e.second].states[k].position();
                edges += fmt::format("{},{},{},{},{},{},{},{}\n", s, t, names[e.first], names[e.second], p(0), p(1),
                                     q(0), q(1));
            }
        }
        write_file(dir / "fig_formation_yz.csv", points);
        write_file(dir / "fig_formation_edges.csv", edges);
    }

    ScenarioConfig read_manifest_config(const fs::path &manifest)
    {
        YAML::Node root;
        try
        {
            root = YAML::LoadFile(manifest.string());
        }
        catch (const YAML::BadFile &)
        {
            throw ArtifactError("missing artifact '" + manifest.string() + "'");
        }
        catch (const YAML::Exception &e)
        {
            throw ConfigError("manifest YAML error: " + e.msg, e.mark.line + 1);
        }
        if (!root.IsMap() || !root["config"])
            throw ArtifactError("'" + manifest.string() + "' has no config section");
        return parse_node(root["config"]);
    }

    ExitStatus run_scenario(const ScenarioConfig &config, const fs::path &dir, RunStage stage)
    {
        validate(config);
        switch (stage)
        {
        case RunStage::kPlan:
        {
            const FleetPlan fleet = plan_scenario(config);
            write_plan_artifacts(dir, config, fleet);
            return plans_converged(fleet) ? kExitSuccess : kExitNotConverged;
        }
        case RunStage::kSimulate:
        {
            const FleetPlan fleet = read_plan_artifacts(dir, config);
            write_simulation_artifacts(dir, config, simulate_scenario(config, fleet));
            return kExitSuccess;
        }
        case RunStage::kRun:
        {
            const FleetPlan fleet = plan_scenario(config);
            write_plan_artifacts(dir, config, fleet);
            write_simulation_artifacts(dir, config, simulate_scenario(config, fleet));
            emit_plot_data(dir, config);
            return plans_converged(fleet) ? kExitSuccess : kExitNotConverged;
        }
        case RunStage::kEmitPlots:
            emit_plot_data(dir, config);
            return kExitSuccess;
        }
        return kExitSuccess;
    }

} // namespace quadform
