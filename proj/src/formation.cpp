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
#include "quadform/formation.hpp"

#include <algorithm>
#include <cmath>

namespace quadform
{
    namespace
    {
        // Offsets must reproduce the requested distances; tolerance covers the sqrt in the triangle height.
        constexpr double kOffsetConsistencyTol = 1e-12;
    } // namespace

    FormationSpec::FormationSpec(int leader_index, std::vector<Position> offsets, std::vector<DistanceEdge> edges)
        : leader_index_(leader_index), offsets_(std::move(offsets)), edges_(std::move(edges))
    {
        const int n = agent_count();
        if (n < 2)
            throw FormationError("formation needs at least two agents");
        if (leader_index_ < 0 || leader_index_ >= n)
            throw FormationError("leader index " + std::to_string(leader_index_) + " out of range");
        if (!offsets_[leader_index_].isZero(0.0))
            throw FormationError("leader offset must be zero");

        for (const auto &e : edges_)
        {
            if (e.first == e.second || e.first < 0 || e.second < 0 || e.first >= n || e.second >= n)
                throw FormationError("invalid edge " + std::to_string(e.first) + "-" + std::to_string(e.second));
            if (!(e.distance > 0.0) || !std::isfinite(e.distance))
                throw FormationError("desired distances must be positive");
            const double realized = (offsets_[e.first] - offsets_[e.second]).norm();
            if (std::abs(realized - e.distance) > kOffsetConsistencyTol * std::max(1.0, e.distance))
            {
                throw FormationError("offsets realize distance " + std::to_string(realized) + " for pair " +
                                     std::to_string(e.first) + "-" + std::to_string(e.second) + ", expected " +
                                     std::to_string(e.distance));
            }
        }
        for (std::size_t a = 0; a < edges_.size(); ++a)
            for (std::size_t b = a + 1; b < edges_.size(); ++b)
            {
                const auto &p = edges_[a];
                const auto &q = edges_[b];
                if ((p.first == q.first && p.second == q.second) || (p.first == q.second && p.second == q.first))
                    throw FormationError("duplicate edge");
            }
    }

    double FormationSpec::desired_distance(int i, int j) const
    {
        for (const auto &e : edges_)
            if ((e.first == i && e.second == j) || (e.first == j && e.second == i))
                return e.distance;
        throw FormationError("no desired distance for pair " + std::to_string(i) + "-" + std::to_string(j));
    }

    bool FormationSpec::has_edge(int i, int j) const
    {
        return std::any_of(edges_.begin(), edges_.end(), [&](const DistanceEdge &e) {
            return (e.first == i && e.second == j) || (e.first == j && e.second == i);
        });
    }

    std::vector<DistanceEdge> FormationSpec::edges_of(int agent) const
    {
        std::vector<DistanceEdge> out;
        for (const auto &e : edges_)
            if (e.first == agent || e.second == agent)
                out.push_back(e);
        return out;
    }

    std::vector<Position> FormationSpec::nominal_positions(const Position &leader) const
    {
        std::vector<Position> out;
        out.reserve(offsets_.size());
        for (const auto &o : offsets_)
            out.push_back(leader + o);
        return out;
    }

    FormationSpec triangular_spec(double leader_follower_dist, double follower_follower_dist, int leader_index)
    {
        const double dlf = leader_follower_dist;
        const double dff = follower_follower_dist;
        if (!(dlf > 0.0) || !(dff > 0.0) || !std::isfinite(dlf) || !std::isfinite(dff))
            throw FormationError("formation distances must be positive");
        if (2.0 * dlf < dff)
        {
            throw FormationError("triangle inequality violated: 2 * d_leader_follower (" + std::to_string(2.0 * dlf) +
                                 ") < d_follower_follower (" + std::to_string(dff) + ")");
        }
        if (leader_index < 0 || leader_index > 2)
            throw FormationError("leader index must be 0, 1 or 2 for a triangle");

        const double half = 0.5 * dff;
        const double height = std::sqrt(std::max(0.0, dlf * dlf - half * half));

        std::vector<Position> offsets(3, Position::Zero());
        std::vector<int> followers;
        for (int i = 0; i < 3; ++i)
            if (i != leader_index)
                followers.push_back(i);
        offsets[followers[0]] = Position(-half, -height);
        offsets[followers[1]] = Position(half, -height);

        std::vector<DistanceEdge> edges = {
            {leader_index, followers[0], dlf},
            {leader_index, followers[1], dlf},
            {followers[0], followers[1], dff},
        };

        FormationSpec spec(leader_index, std::move(offsets), std::move(edges));
        spec.leader_follower_distance = dlf;
        spec.follower_follower_distance = dff;
        return spec;
    }

    RigidityReport check_rigidity(const std::vector<Position> &positions, const FormationSpec &spec, double tol)
    {
        if (static_cast<int>(positions.size()) != spec.agent_count())
        {
            throw FormationError("expected " + std::to_string(spec.agent_count()) + " positions, got " +
                                 std::to_string(positions.size()));
        }
        RigidityReport report;
        for (const auto &e : spec.edges())
        {
            const double err = std::abs((positions[e.first] - positions[e.second]).norm() - e.distance);
            report.pairs.push_back({e.first, e.second, err});
            report.max_error = std::max(report.max_error, err);
        }
        report.within_tolerance = report.max_error <= tol;
        return report;
    }

    Eigen::Matrix2d PlanarTransform::rotation() const
    {
        return Eigen::Rotation2Dd(rotation_angle).toRotationMatrix();
    }

    std::vector<Position> apply_transform(const PlanarTransform &t, const std::vector<Position> &points)
    {
        const Eigen::Matrix2d r = t.rotation();
        std::vector<Position> out;
        out.reserve(points.size());
        for (const auto &p : points)
            out.push_back(r * p + t.translation);
        return out;
    }

} // namespace quadform
