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
#include "quadform/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/SparseCholesky>

namespace quadform
{
    namespace
    {
        constexpr int W = DecisionLayout::kNodeWidth;
        constexpr double kMinStep = 1e-16;
        constexpr double kBbMin = 1e-8;
        constexpr double kBbMax = 1e2;
        constexpr double kActiveSetWidth = 1e-3;
        constexpr double kDefectShrinkTarget = 0.25;

        enum class BoundState
        {
            kFree,
            kAtLower,
            kAtUpper,
            kPinned,
        };

        /// Augmented merit f(x) + lambda'd(x) + rho |d(x)|^2 in scaled variables x = scale .* s.
        class Merit
        {
        public:
            Merit(const OcpProblem &problem, const Eigen::VectorXd &scale)
                : problem_(problem), scale_(scale), jacobian_(defect_jacobian(problem)),
                  lambda_(Eigen::VectorXd::Zero(jacobian_.rows()))
            {
                jtj_ = SparseMatrix(jacobian_.transpose() * jacobian_);
            }

            void set_penalty(double rho) { rho_ = rho; }
            double penalty() const { return rho_; }
            Eigen::VectorXd &multipliers() { return lambda_; }

            Eigen::VectorXd unscale(const Eigen::VectorXd &s) const { return scale_.cwiseProduct(s); }

            double value(const Eigen::VectorXd &s) const
            {
                const Eigen::VectorXd z = unscale(s);
                const Eigen::VectorXd d = defect_constraints(problem_, z);
                return objective(problem_, z) + lambda_.dot(d) + rho_ * d.squaredNorm();
            }

            Eigen::VectorXd gradient(const Eigen::VectorXd &s) const
            {
                const Eigen::VectorXd z = unscale(s);
                const Eigen::VectorXd d = defect_constraints(problem_, z);
                Eigen::VectorXd g = objective_gradient(problem_, z);
                g.noalias() += jacobian_.transpose() * (lambda_ + 2.0 * rho_ * d);
                return scale_.cwiseProduct(g);
            }

            SparseMatrix metric(const Eigen::VectorXd &s) const
            {
                const Eigen::VectorXd z = unscale(s);
                SparseMatrix h = objective_hessian_approx(problem_, z);
                h += (2.0 * rho_) * jtj_;
                return scale_.asDiagonal() * h * scale_.asDiagonal();
            }

        private:
            const OcpProblem &problem_;
            Eigen::VectorXd scale_;
            SparseMatrix jacobian_;
            SparseMatrix jtj_;
            Eigen::VectorXd lambda_;
            double rho_ = 0.0;
        };

        BoundState bound_state(const DecisionLayout &layout, const Eigen::VectorXd &x, int i)
        {
            if (layout.is_pinned(i))
                return BoundState::kPinned;
            if (x(i) <= layout.lower(i))
                return BoundState::kAtLower;
            if (x(i) >= layout.upper(i))
                return BoundState::kAtUpper;
            return BoundState::kFree;
        }

        // Component of the projected gradient; zero where the bound blocks descent.
        double projected_component(BoundState state, double g)
        {
            switch (state)
            {
            case BoundState::kPinned:
                return 0.0;
            case BoundState::kAtLower:
                return std::min(g, 0.0);
            case BoundState::kAtUpper:
                return std::max(g, 0.0);
            case BoundState::kFree:
                break;
            }
            return g;
        }

        double projected_norm(const DecisionLayout &layout, const Eigen::VectorXd &x, const Eigen::VectorXd &g)
        {
            double norm = 0.0;
            for (int i = 0; i < x.size(); ++i)
                norm = std::max(norm, std::abs(projected_component(bound_state(layout, x, i), g(i))));
            return norm;
        }

        DecisionLayout scaled_layout(const DecisionLayout &layout, const Eigen::VectorXd &scale)
        {
            DecisionLayout out = layout;
            out.lower = layout.lower.cwiseQuotient(scale);
            out.upper = layout.upper.cwiseQuotient(scale);
            return out;
        }

        Eigen::VectorXd project(const DecisionLayout &layout, const Eigen::VectorXd &x, const Eigen::VectorXd &anchor)
        {
            Eigen::VectorXd out = x.cwiseMax(layout.lower).cwiseMin(layout.upper);
            for (int i : layout.pinned)
                out(i) = anchor(i);
            return out;
        }

        std::string describe_iterate(const Eigen::VectorXd &z)
        {
            std::ostringstream os;
            os << "iterate (first nodes):";
            for (int i = 0; i < std::min<Eigen::Index>(z.size(), 2 * W); ++i)
                os << ' ' << z(i);
            os << " ... non-finite entries: " << (z.array().isFinite() == false).count();
            return os.str();
        }

        struct Direction
        {
            Eigen::VectorXd step;
            std::vector<char> active; // Bertsekas epsilon-active set
        };

        Direction scaled_newton_direction(const Merit &merit, const DecisionLayout &layout, const Eigen::VectorXd &s,
                                          const Eigen::VectorXd &g)
        {
            const int n = static_cast<int>(s.size());
            const Eigen::VectorXd trial = project(layout, s - g, s);
            const double eps = std::min(kActiveSetWidth, (s - trial).cwiseAbs().maxCoeff());

            Direction dir;
            dir.active.assign(n, 0);
            std::vector<char> fixed(n, 0);
            for (int i = 0; i < n; ++i)
            {
                if (layout.is_pinned(i))
                {
                    fixed[i] = 1;
                    continue;
                }
                const bool near_lower = s(i) <= layout.lower(i) + eps && g(i) > 0.0;
                const bool near_upper = s(i) >= layout.upper(i) - eps && g(i) < 0.0;
                if (near_lower || near_upper)
                    dir.active[i] = fixed[i] = 1;
            }

            SparseMatrix h = merit.metric(s);
            const Eigen::VectorXd diag = h.diagonal();
            h.prune([&](const Eigen::Index &row, const Eigen::Index &col, const double &) {
                return !fixed[row] && !fixed[col];
            });
            const double ridge = 1e-14 * std::max(1.0, diag.cwiseAbs().maxCoeff());
            SparseMatrix id(n, n);
            std::vector<Eigen::Triplet<double>> diag_entries;
            diag_entries.reserve(n);
            for (int i = 0; i < n; ++i)
                diag_entries.emplace_back(i, i, fixed[i] ? 1.0 : ridge);
            id.setFromTriplets(diag_entries.begin(), diag_entries.end());
            h += id;

            Eigen::VectorXd rhs = -g;
            for (int i = 0; i < n; ++i)
                if (fixed[i])
                    rhs(i) = 0.0;

            Eigen::SimplicialLDLT<SparseMatrix> ldlt(h);
            if (ldlt.info() == Eigen::Success)
                dir.step = ldlt.solve(rhs);
            if (ldlt.info() != Eigen::Success || !dir.step.allFinite())
                dir.step = rhs;

            for (int i = 0; i < n; ++i)
            {
                if (layout.is_pinned(i))
                    dir.step(i) = 0.0;
                else if (dir.active[i])
                    dir.step(i) = -g(i) / std::max(diag(i), 1e-12);
            }
            return dir;
        }
    } // namespace

    void SolverConfig::validate() const
    {
        if (max_iterations <= 0 || max_penalty_rounds <= 0)
            throw std::invalid_argument("solver iteration limits must be positive");
        if (!(gradient_tolerance > 0.0) || !(defect_tolerance > 0.0) || !(defect_penalty_initial > 0.0) ||
            !(defect_penalty_growth > 0.0))
            throw std::invalid_argument("solver tolerances and penalty parameters must be positive");
        if (!(line_search_shrink > 0.0 && line_search_shrink < 1.0))
            throw std::invalid_argument("line_search_shrink must lie in (0, 1)");
        if (!(armijo_constant > 0.0 && armijo_constant < 1.0))
            throw std::invalid_argument("armijo_constant must lie in (0, 1)");
    }

    Eigen::VectorXd variable_scale(const OcpProblem &problem)
    {
        Eigen::VectorXd scale = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(W) * problem.node_count);
        for (int k = 0; k < problem.node_count; ++k)
        {
            scale(DecisionLayout::control_index(k, 0)) = problem.u1_bound;
            scale(DecisionLayout::control_index(k, 1)) = problem.u2_bound;
        }
        return scale;
    }

    KktResiduals kkt_residuals(const OcpProblem &problem, const TrajectoryPlan &plan)
    {
        const DecisionLayout layout = transcribe(problem);
        const Eigen::VectorXd z = flatten(plan);
        if (z.size() != layout.dimension)
            throw std::invalid_argument("plan does not match the problem's node count");
        const Eigen::VectorXd scale = variable_scale(problem);

        KktResiduals out;
        for (int k = 0; k < problem.node_count; ++k)
        {
            for (int j = 0; j < kControlDim; ++j)
            {
                const int i = DecisionLayout::control_index(k, j);
                out.max_bound_violation =
                    std::max({out.max_bound_violation, z(i) - layout.upper(i), layout.lower(i) - z(i)});
            }
        }
        const Eigen::VectorXd d = defect_constraints(problem, z);
        out.max_defect = d.size() ? d.cwiseAbs().maxCoeff() : 0.0;

        const Eigen::VectorXd g = scale.cwiseProduct(objective_gradient(problem, z));
        const SparseMatrix jac = defect_jacobian(problem) * scale.asDiagonal();

        // Least-squares multipliers using only the columns that are free to move.
        Eigen::VectorXd free_mask = Eigen::VectorXd::Zero(z.size());
        for (int i = 0; i < z.size(); ++i)
            free_mask(i) = bound_state(layout, z, i) == BoundState::kFree ? 1.0 : 0.0;
        const SparseMatrix jac_free = jac * free_mask.asDiagonal();
        const SparseMatrix normal = jac_free * jac_free.transpose();
        Eigen::SimplicialLDLT<SparseMatrix> ldlt(normal);
        Eigen::VectorXd residual = g;
        if (ldlt.info() == Eigen::Success)
        {
            const Eigen::VectorXd mu = ldlt.solve(-(jac_free * g));
            residual += jac.transpose() * mu;
        }
        for (int i = 0; i < z.size(); ++i)
        {
            out.projected_gradient_norm = std::max(
                out.projected_gradient_norm, std::abs(projected_component(bound_state(layout, z, i), residual(i))));
        }
        return out;
    }

    Eigen::VectorXd projected_gradient_step(const Eigen::VectorXd &point, const Eigen::VectorXd &gradient, double step,
                                            const DecisionLayout &layout)
    {
        if (point.size() != gradient.size() || point.size() != layout.dimension)
            throw std::invalid_argument("projected_gradient_step: dimension mismatch");
        return project(layout, point - step * gradient, point);
    }

    SolveReport solve(const OcpProblem &problem, const SolverConfig &config, const TrajectoryPlan &initial_guess)
    {
        config.validate();
        const DecisionLayout layout = transcribe(problem);
        if (initial_guess.node_count() != problem.node_count)
            throw std::invalid_argument("initial guess node count does not match the problem");

        const Eigen::VectorXd scale = variable_scale(problem);
        const DecisionLayout slayout = scaled_layout(layout, scale);

        Eigen::VectorXd z0 = flatten(initial_guess);
        z0.head<kStateDim>() = problem.initial_state.values;
        z0 = z0.cwiseMax(layout.lower).cwiseMin(layout.upper);
        Eigen::VectorXd s = z0.cwiseQuotient(scale);

        Merit merit(problem, scale);
        double rho = config.defect_penalty_initial;
        merit.set_penalty(rho);

        SolveReport report;
        double previous_defect = std::numeric_limits<double>::infinity();
        bool finished = false;

        for (int round = 0; round < config.max_penalty_rounds && !finished; ++round)
        {
            report.merit_trace.emplace_back();
            auto &trace = report.merit_trace.back();

            double m = merit.value(s);
            if (!std::isfinite(m))
            {
                const Eigen::VectorXd z = merit.unscale(s);
                throw NumericalError("non-finite merit at round " + std::to_string(round) + "; " + describe_iterate(z),
                                     z, report.iterations);
            }
            trace.push_back(m);

            Eigen::VectorXd prev_s, prev_g;
            bool stalled = false;
            for (int it = 0; it < config.max_iterations; ++it)
            {
                const Eigen::VectorXd g = merit.gradient(s);
                if (projected_norm(slayout, s, g) <= config.gradient_tolerance)
                    break;

                Direction dir;
                double alpha = 1.0;
                if (config.metric == SolverMetric::kGaussNewton)
                {
                    dir = scaled_newton_direction(merit, slayout, s, g);
                }
                else
                {
                    dir.step = -g;
                    for (int i : slayout.pinned)
                        dir.step(i) = 0.0;
                    dir.active.assign(s.size(), 0);
                    if (prev_s.size())
                    {
                        const Eigen::VectorXd ds = s - prev_s;
                        const Eigen::VectorXd dg = g - prev_g;
                        const double curvature = ds.dot(dg);
                        alpha = curvature > 0.0 ? std::clamp(ds.squaredNorm() / curvature, kBbMin, kBbMax) : 1.0;
                    }
                }

                double free_decrease = 0.0;
                for (int i = 0; i < s.size(); ++i)
                    if (!dir.active[i])
                        free_decrease -= g(i) * dir.step(i);

                bool accepted = false;
                Eigen::VectorXd s_new;
                double m_new = m;
                while (alpha >= kMinStep)
                {
                    s_new = project(slayout, s + alpha * dir.step, s);
                    m_new = merit.value(s_new);
                    double predicted;
                    if (config.metric == SolverMetric::kGaussNewton)
                    {
                        double active_decrease = 0.0;
                        for (int i = 0; i < s.size(); ++i)
                            if (dir.active[i])
                                active_decrease += g(i) * (s(i) - s_new(i));
                        predicted = alpha * free_decrease + active_decrease;
                    }
                    else
                    {
                        predicted = g.dot(s - s_new);
                    }
                    if (std::isfinite(m_new) && m_new <= m - config.armijo_constant * predicted)
                    {
                        accepted = true;
                        break;
                    }
                    alpha *= config.line_search_shrink;
                }
                ++report.iterations;
                if (!accepted)
                {
                    stalled = true;
                    break;
                }
                prev_s = s;
                prev_g = g;
                s = s_new;
                m = m_new;
                trace.push_back(m);
            }

            const Eigen::VectorXd z = merit.unscale(s);
            const Eigen::VectorXd d = defect_constraints(problem, z);
            const double max_defect = d.size() ? d.cwiseAbs().maxCoeff() : 0.0;
            report.round_max_defect.push_back(max_defect);
            report.penalty_rounds = round + 1;
            report.final_penalty_weight = rho;

            const KktResiduals kkt = kkt_residuals(problem, unflatten(problem, z));
            if (kkt.projected_gradient_norm <= config.gradient_tolerance && max_defect <= config.defect_tolerance)
            {
                report.converged = true;
                report.status = "converged";
                finished = true;
                break;
            }
            if (stalled && round + 1 == config.max_penalty_rounds)
                report.status = "line search stalled";

            if (config.multiplier_updates)
                merit.multipliers() += 2.0 * rho * d;
            if (!config.multiplier_updates || max_defect > kDefectShrinkTarget * previous_defect)
            {
                rho *= config.defect_penalty_growth;
                merit.set_penalty(rho);
            }
            previous_defect = max_defect;
        }

        const Eigen::VectorXd z = merit.unscale(s);
        report.plan = unflatten(problem, z);
        const KktResiduals kkt = kkt_residuals(problem, report.plan);
        report.final_objective = objective(problem, z);
        report.final_gradient_norm = kkt.projected_gradient_norm;
        report.max_defect = kkt.max_defect;
        if (!report.converged && report.status.empty())
            report.status = "penalty rounds exhausted";
        return report;
    }

} // namespace quadform
