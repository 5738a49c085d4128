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
#ifndef QUADFORM_SOLVER_HPP
#define QUADFORM_SOLVER_HPP

#include <stdexcept>
#include <string>
#include <vector>

#include "quadform/ocp.hpp"

namespace quadform
{
    /// Metric used to precondition the projected-gradient direction.
    enum class SolverMetric
    {
        kIdentity,    // plain projected gradient, Barzilai-Borwein initial step
        kGaussNewton, // merit Gauss-Newton Hessian on the free variables
    };

    struct SolverConfig
    {
        int max_iterations = 50000; // inner iterations per penalty round
        double gradient_tolerance = 1e-6;
        double defect_tolerance = 1e-6;
        double defect_penalty_initial = 10.0;
        double defect_penalty_growth = 10.0;
        double line_search_shrink = 0.5;
        double armijo_constant = 1e-4;
        int max_penalty_rounds = 20;
        /// First-order multiplier updates on the defects (augmented Lagrangian); off gives a pure quadratic penalty.
        bool multiplier_updates = true;
        SolverMetric metric = SolverMetric::kIdentity;

        void validate() const;
        bool operator==(const SolverConfig &) const = default;
    };

    struct SolveReport
    {
        TrajectoryPlan plan;
        bool converged = false;
        int iterations = 0;
        double final_objective = 0.0;
        double final_gradient_norm = 0.0;
        double max_defect = 0.0;
        int penalty_rounds = 0;
        double final_penalty_weight = 0.0;
        /// max |defect| at the end of each penalty round.
        std::vector<double> round_max_defect;
        /// Merit value after every accepted step, grouped by penalty round.
        std::vector<std::vector<double>> merit_trace;
        std::string status;
    };

    struct KktResiduals
    {
        double projected_gradient_norm = 0.0;
        double max_defect = 0.0;
        double max_bound_violation = 0.0;
    };

    /// Thrown when the objective or merit becomes non-finite; carries the offending iterate.
    class NumericalError : public std::runtime_error
    {
    public:
        NumericalError(const std::string &what, Eigen::VectorXd iterate, int iteration)
            : std::runtime_error(what), iterate_(std::move(iterate)), iteration_(iteration)
        {
        }
        const Eigen::VectorXd &iterate() const { return iterate_; }
        int iteration() const { return iteration_; }

    private:
        Eigen::VectorXd iterate_;
        int iteration_;
    };

    /**
     * Per-variable scale used for every gradient norm reported by the solver:
     * 1 for states, the bound magnitude for each control channel.
     */
    Eigen::VectorXd variable_scale(const OcpProblem &problem);

    /**
     * Convergence measures of a plan:
     *  - inf-norm of the projected, scaled stationarity residual with least-squares
     *    defect multipliers over the variables that are not at a bound;
     *  - max |defect|;
     *  - max amount by which any control exceeds its bound (raw plan, no projection).
     */
    KktResiduals kkt_residuals(const OcpProblem &problem, const TrajectoryPlan &plan);

    /// point - step * gradient, clamped to the layout's boxes; pinned entries keep their input value.
    Eigen::VectorXd projected_gradient_step(const Eigen::VectorXd &point, const Eigen::VectorXd &gradient, double step,
                                            const DecisionLayout &layout);

    /**
     * Drives the transcribed problem to a KKT point. Outer rounds raise the
     * defect penalty (and update defect multipliers); inner iterations take
     * projected steps with Armijo backtracking on
     * objective + multipliers'defects + penalty * |defects|^2.
     * Controls are clamped to their boxes after every step and node 0's state
     * is never modified.
     */
    SolveReport solve(const OcpProblem &problem, const SolverConfig &config, const TrajectoryPlan &initial_guess);

} // namespace quadform

#endif // QUADFORM_SOLVER_HPP
