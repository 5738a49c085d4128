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
#ifndef QUADFORM_FORMATION_HPP
#define QUADFORM_FORMATION_HPP

#include <stdexcept>
#include <string>
#include <vector>

#include "quadform/model.hpp"

namespace quadform
{
    class FormationError : public std::invalid_argument
    {
    public:
        using std::invalid_argument::invalid_argument;
    };

    /// One constrained agent pair with its prescribed distance.
    struct DistanceEdge
    {
        int first = 0;
        int second = 0;
        double distance = 0.0;
    };

    /**
     * Leader-follower formation: the desired distance graph plus the role
     * assignment. Offsets are leader-relative YZ positions, one per agent
     * (the leader's own offset is zero).
     */
    class FormationSpec
    {
    public:
        FormationSpec(int leader_index, std::vector<Position> offsets, std::vector<DistanceEdge> edges);

        int agent_count() const { return static_cast<int>(offsets_.size()); }
        int leader_index() const { return leader_index_; }
        bool is_leader(int agent) const { return agent == leader_index_; }
        const std::vector<Position> &offsets() const { return offsets_; }
        const Position &offset(int agent) const { return offsets_.at(agent); }
        const std::vector<DistanceEdge> &edges() const { return edges_; }

        /// Desired distance for a constrained pair (order independent); throws if the pair is unconstrained.
        double desired_distance(int i, int j) const;
        bool has_edge(int i, int j) const;

        /// Edges incident to the given agent.
        std::vector<DistanceEdge> edges_of(int agent) const;

        /// Leader position plus each agent's offset.
        std::vector<Position> nominal_positions(const Position &leader) const;

        /// Leader-follower and follower-follower distances used to build the spec, when triangular.
        double leader_follower_distance = 0.0;
        double follower_follower_distance = 0.0;

    private:
        int leader_index_;
        std::vector<Position> offsets_;
        std::vector<DistanceEdge> edges_;
    };

    /**
     * Three-agent triangle: leader at the apex, followers mirror-symmetric
     * about the leader's y coordinate and trailing it by
     * h = sqrt(d_lf^2 - d_ff^2 / 4) in -z. Rejects 2 d_lf < d_ff.
     * The leader gets `leader_index`; followers take the remaining indices in order,
     * the first at -d_ff/2 in y.
     */
    FormationSpec triangular_spec(double leader_follower_dist, double follower_follower_dist, int leader_index = 0);

    struct PairError
    {
        int first = 0;
        int second = 0;
        double error = 0.0; // | ||p_i - p_j|| - d_ij |
    };

    struct RigidityReport
    {
        std::vector<PairError> pairs;
        double max_error = 0.0;
        bool within_tolerance = true;
    };

    RigidityReport check_rigidity(const std::vector<Position> &positions, const FormationSpec &spec, double tol);

    /// Planar rigid motion p -> R(theta) p + translation.
    struct PlanarTransform
    {
        double rotation_angle = 0.0;
        Position translation = Position::Zero();

        Eigen::Matrix2d rotation() const;
        Position apply(const Position &p) const { return rotation() * p + translation; }
    };

    std::vector<Position> apply_transform(const PlanarTransform &t, const std::vector<Position> &points);

} // namespace quadform

#endif // QUADFORM_FORMATION_HPP
