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
#include <limits>
#include <set>

#include <gtest/gtest.h>

#include "quadform/model.hpp"
#include "test_support.hpp"

using namespace quadform;

TEST(StateSpace, InputMatrixEntriesFollowMassAndInertia)
{
    const auto model = build_state_space(QuadParams{});
    EXPECT_NEAR(model.b_matrix(kZDot, 0), 35.714285714285715, 1e-12);
    EXPECT_NEAR(model.b_matrix(kPhiDot, 1), 154099.82586719678, 1e-6);
    EXPECT_EQ(model.b_matrix(kYDot, 0), 0.0);
    EXPECT_EQ(model.b_matrix(kYDot, 1), 0.0);
}

TEST(StateSpace, PlantMatrixHasShiftRowsAndGravityCoupling)
{
    const auto model = build_state_space(QuadParams{});
    Matrix6d expected = Matrix6d::Zero();
    expected(kY, kYDot) = 1.0;
    expected(kZ, kZDot) = 1.0;
    expected(kPhi, kPhiDot) = 1.0;
    expected(kYDot, kPhi) = -9.81;
    EXPECT_EQ(model.a_matrix, expected);
    EXPECT_DOUBLE_EQ(model.gravity_vector(kZDot), -9.81);
    EXPECT_EQ(model.noise_gain, Matrix6d::Identity());
}

TEST(StateSpace, HoverIsAnEquilibrium)
{
    const auto model = build_state_space(QuadParams{});
    const AgentState hover = AgentState::from(0.3, 0.0, 1.2, 0.0, 0.0, 0.0);
    EXPECT_LT(derivative(model, hover, model.hover_input()).cwiseAbs().maxCoeff(), 1e-13);

    AgentState x = hover;
    for (int k = 0; k < 100; ++k)
        x = step_rk4(model, x, model.hover_input(), Vector6d::Zero(), 0.1);
    EXPECT_LT((x.values - hover.values).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(StateSpace, DerivativeIsAffine)
{
    const auto model = build_state_space(QuadParams{});
    const AgentState zero;
    const Vector6d offset = derivative(model, zero, ControlInput());
    const AgentState x1 = AgentState::from(0.1, -0.2, 0.3, 0.4, 0.05, -0.1);
    const AgentState x2 = AgentState::from(-0.5, 0.7, 0.2, -0.1, -0.02, 0.3);
    const ControlInput u1(0.2, 1e-6);
    const ControlInput u2(0.3, -2e-6);
    const double a = 0.7;
    const double b = -1.3;

    const Vector6d lhs = derivative(model, AgentState(a * x1.values + b * x2.values),
                                    ControlInput(a * u1.values + b * u2.values)) - offset;
    const Vector6d rhs = a * (derivative(model, x1, u1) - offset) + b * (derivative(model, x2, u2) - offset);
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, rhs.cwiseAbs().maxCoeff()));
}

TEST(StateSpace, NoiseEntersThroughTheGain)
{
    auto model = build_state_space(QuadParams{});
    model.noise_gain = 2.0 * Matrix6d::Identity();
    const AgentState x = AgentState::from(0, 0, 1, 0, 0, 0);
    Vector6d w = Vector6d::Zero();
    w(kYDot) = 0.5;
    const Vector6d diff = derivative(model, x, model.hover_input(), w) - derivative(model, x, model.hover_input());
    EXPECT_DOUBLE_EQ(diff(kYDot), 1.0);
}

TEST(StateSpace, NonFiniteInputsAreRejected)
{
    const auto model = build_state_space(QuadParams{});
    const AgentState bad = AgentState::from(std::numeric_limits<double>::quiet_NaN(), 0, 0, 0, 0, 0);
    EXPECT_THROW(derivative(model, bad, ControlInput()), std::domain_error);
    EXPECT_THROW(step_rk4(model, AgentState(), model.hover_input(), Vector6d::Zero(), 0.0), std::invalid_argument);
}

TEST(StateSpace, InvalidParametersAreRejected)
{
    EXPECT_THROW((QuadParams{-0.028, 6.4893e-6, 9.81}.validate()), std::invalid_argument);
    EXPECT_THROW((QuadParams{0.028, 0.0, 9.81}.validate()), std::invalid_argument);
    EXPECT_THROW(build_state_space(QuadParams{0.028, 6.4893e-6, -1.0}), std::invalid_argument);
}

TEST(Integrator, ConstantInputStepMatchesExactFlow)
{
    // With constant input the augmented system is nilpotent of low order, so RK4 is exact up to rounding.
    const auto model = build_state_space(QuadParams{});
    const ControlInput u(0.3, 1e-6);
    const Vector6d x0 = AgentState::from(0.1, 0.2, 1.0, -0.1, 0.01, 0.0).values;
    const AgentState stepped = step_rk4(model, AgentState(x0), u, Vector6d::Zero(), 0.1);
    const Vector6d exact = testkit::exact_affine_flow<6>(model.a_matrix, model.b_matrix * u.values +
                                                                             model.gravity_vector, x0, 0.1);
    EXPECT_LT((stepped.values - exact).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Integrator, ConvergenceSlopeIsFourth)
{
    const auto model = build_state_space(QuadParams{});
    // Constant input would make RK4 exact here, so the order is measured with a time-varying input.
    const testkit::OscillatingInput input{model.hover_input(), Eigen::Vector2d(0.05, 1e-6), 3.0};
    const Vector6d x0 = AgentState::from(0.0, 0.1, 1.0, 0.0, 0.0, 0.0).values;
    const double slope = testkit::rk4_convergence_slope(model, input, x0, 2.0, {20, 40, 80, 160});
    EXPECT_GE(slope, 3.7);
    EXPECT_LE(slope, 4.3);
}

TEST(Noise, SampleStatisticsMatchParameters)
{
    NoiseSpec spec;
    spec.seed = 7;
    const int n = 100000;
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    Eigen::Vector3d sum_sq = Eigen::Vector3d::Zero();
    for (int i = 0; i < n; ++i)
    {
        const Vector6d w = sample_noise(spec, static_cast<std::uint64_t>(i));
        ASSERT_EQ(w(kY), 0.0);
        ASSERT_EQ(w(kZ), 0.0);
        ASSERT_EQ(w(kPhi), 0.0);
        const Eigen::Vector3d active(w(kYDot), w(kZDot), w(kPhiDot));
        sum += active;
        sum_sq += active.cwiseProduct(active);
    }
    for (int c = 0; c < 3; ++c)
    {
        const double mean = sum(c) / n;
        const double sd = std::sqrt(sum_sq(c) / n - mean * mean);
        EXPECT_NEAR(mean, 0.0, 0.01) << "channel " << c;
        EXPECT_NEAR(sd, 0.2, 0.01) << "channel " << c;
    }
}

TEST(Noise, StreamsArePureFunctionsOfSeedAndPosition)
{
    NoiseSpec a;
    a.seed = 11;
    NoiseSpec b = a;
    EXPECT_EQ(sample_noise(a, 42), sample_noise(b, 42));
    b.seed = 12;
    EXPECT_NE(sample_noise(a, 42), sample_noise(b, 42));
    EXPECT_NE(sample_noise(a, 42), sample_noise(a, 43));

    NoiseSpec silent;
    silent.std_dev = 0.0;
    EXPECT_EQ(sample_noise(silent, 5), Vector6d::Zero());
}

TEST(Noise, SubSeedsAreDistinct)
{
    std::set<std::uint64_t> seen;
    for (std::uint64_t agent = 0; agent < 5; ++agent)
        for (std::uint64_t trial = 0; trial < 50; ++trial)
            seen.insert(sub_seed(99, agent, trial));
    EXPECT_EQ(seen.size(), 250u);
    EXPECT_EQ(sub_seed(99, 1, 2), sub_seed(99, 1, 2));
}

TEST(Noise, InvalidSpecIsRejected)
{
    NoiseSpec spec;
    spec.std_dev = -0.1;
    EXPECT_THROW(spec.validate(), std::invalid_argument);
}
