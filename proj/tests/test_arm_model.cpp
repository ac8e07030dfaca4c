// Copyright 2026 The kincal Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "kincal/arm_model.hpp"
#include "kincal/robots.hpp"
#include "kincal/stats.hpp"
#include "oracles.hpp"

using namespace kincal;

namespace {

DHTable planar2_table() { return planar2_robot().table(); }

PerturbationSpec delta_a1(double value) {
  std::vector<LinkPerturbation> deltas(2);
  deltas[0].a = value;
  return PerturbationSpec::fixed(deltas);
}

}  // namespace

TEST_CASE("realize: all-zero spec reproduces the nominal table") {
  const DHTable nominal = planar2_table();
  const TrueArm arm = realize(nominal, PerturbationSpec::none(), {}, 42);
  for (int i = 0; i < nominal.dof(); ++i) {
    CHECK(arm.perturbed().links[i].theta0 == nominal.links[i].theta0);
    CHECK(arm.perturbed().links[i].alpha == nominal.links[i].alpha);
    CHECK(arm.perturbed().links[i].a == nominal.links[i].a);
    CHECK(arm.perturbed().links[i].d == nominal.links[i].d);
  }
}

TEST_CASE("realize: fixed +0.2 on a1 stretches the planar reach to 2.2") {
  const DHTable nominal = planar2_table();
  const TrueArm arm = realize(nominal, delta_a1(0.2), {}, 1);
  CHECK(arm.perturbed().links[0].a == Catch::Approx(1.2));
  const Pose7 pose = arm.true_pose(Eigen::Vector2d(0, 0));
  CHECK(pose.pos.isApprox(Eigen::Vector3d(2.2, 0, 0), 1e-12));
}

TEST_CASE("realize is deterministic in (nominal, spec, seed)") {
  const RobotConfig wam = wam7_robot();
  const DHTable nominal = wam.table();
  std::vector<LinkIntervals> intervals;
  for (const LinkBounds& b : wam.bounds())
    intervals.push_back(LinkIntervals{{-b.theta, b.theta},
                                      {-b.alpha, b.alpha},
                                      {-b.d, b.d},
                                      {-b.a, b.a}});
  const PerturbationSpec spec = PerturbationSpec::sampled_uniform(intervals);
  const TrueArm first = realize(nominal, spec, {}, 77);
  const TrueArm second = realize(nominal, spec, {}, 77);
  for (int i = 0; i < nominal.dof(); ++i) {
    CHECK(first.perturbed().links[i].theta0 == second.perturbed().links[i].theta0);
    CHECK(first.perturbed().links[i].alpha == second.perturbed().links[i].alpha);
    CHECK(first.perturbed().links[i].a == second.perturbed().links[i].a);
    CHECK(first.perturbed().links[i].d == second.perturbed().links[i].d);
  }
  const TrueArm other = realize(nominal, spec, {}, 78);
  bool all_equal = true;
  for (int i = 0; i < nominal.dof(); ++i)
    all_equal = all_equal &&
                first.perturbed().links[i].a == other.perturbed().links[i].a;
  CHECK_FALSE(all_equal);
}

TEST_CASE("realize: scaled mode stays within percent * bound") {
  const RobotConfig robot = planar2_robot();
  const DHTable nominal = robot.table();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const TrueArm arm =
        realize(nominal, PerturbationSpec::scaled(robot.bounds(), 50.0), {}, seed);
    for (int i = 0; i < 2; ++i) {
      CHECK(std::abs(arm.perturbed().links[i].a - 1.0) <= 0.5 * 0.2);
      CHECK(std::abs(arm.perturbed().links[i].d) <= 0.5 * 0.1);
      CHECK(std::abs(arm.perturbed().links[i].alpha) <= 0.5 * 0.1);
      CHECK(arm.perturbed().links[i].theta0 == 0.0);  // planar theta bound is 0
    }
  }
}

TEST_CASE("measure: noiseless measurement equals perturbed forward kinematics") {
  const DHTable nominal = planar2_table();
  TrueArm arm = realize(nominal, delta_a1(0.2), {}, 5);
  const Eigen::Vector2d q(0.4, -0.9);
  const Pose7 measured = arm.measure(q);
  const Pose7 expected = forward_kinematics(arm.perturbed(), q);
  CHECK((measured.vector() - expected.vector()).norm() <= 1e-15);
}

TEST_CASE("measure: sample standard deviation tracks the noise model") {
  const DHTable nominal = planar2_table();
  MeasurementModel meas;
  meas.noise_std << 0, 0, 0, 0, 0.1, 0, 0;
  TrueArm arm = realize(nominal, PerturbationSpec::none(), meas, 11);
  const Eigen::Vector2d q(0.3, 0.7);
  std::vector<double> px;
  px.reserve(10000);
  for (int i = 0; i < 10000; ++i) px.push_back(arm.measure(q).pos[0]);
  const Moments m = moments(px);
  CHECK(std::abs(m.std - 0.1) <= 0.005);  // 5% at 1e4 samples
}

TEST_CASE("measure: additive sine field shifts pos_x exactly") {
  const DHTable nominal = planar2_table();
  PerturbationSpec spec = delta_a1(0.2);
  SineField field;
  field.amplitude[4] = 0.05;  // pos_x axis
  field.weights = Eigen::Vector2d(1.0, 0.0);
  spec.additive = field;
  TrueArm arm = realize(nominal, spec, {}, 3);

  const Eigen::Vector2d q(kPi / 2.0, 0.0);
  const Pose7 with_field = arm.measure(q);
  const Pose7 base = forward_kinematics(arm.perturbed(), q);
  CHECK(with_field.pos[0] - base.pos[0] == Catch::Approx(0.05).margin(1e-12));
}

TEST_CASE("residual: zero perturbation and zero noise gives zero over 1000 poses") {
  const DHTable nominal = planar2_table();
  TrueArm arm = realize(nominal, PerturbationSpec::none(), {}, 9);
  Rng rng(12);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Vector2d q(rng.uniform(-3, 3), rng.uniform(-3, 3));
    CHECK(residual(arm, nominal, q).norm() <= 1e-12);
  }
}

TEST_CASE("residual: planar length error shows up as a pure x offset") {
  const DHTable nominal = planar2_table();
  TrueArm arm = realize(nominal, delta_a1(0.2), {}, 2);
  const Vec7 r = residual(arm, nominal, Eigen::Vector2d(0, 0));
  CHECK(r.head<4>().norm() <= 1e-12);
  CHECK(r[4] == Catch::Approx(0.2).margin(1e-12));
  CHECK(std::abs(r[5]) <= 1e-12);
  CHECK(std::abs(r[6]) <= 1e-12);
}

TEST_CASE("residual: antipodal measured quaternion aligns back to a small difference") {
  // near q1+q2 = pi the canonical (w >= 0) quaternion flips sign under a tiny
  // joint-offset perturbation; hemisphere alignment must keep the residual
  // small rather than ~2
  const DHTable nominal = planar2_table();
  std::vector<LinkPerturbation> deltas(2);
  deltas[1].theta = 1e-3;
  TrueArm arm = realize(nominal, PerturbationSpec::fixed(deltas), {}, 4);
  const double q1 = 0.3;
  const double q2 = kPi - 1e-4 - q1;  // q1 + q2 just below pi, within limits
  const Vec7 r = residual(arm, nominal, Eigen::Vector2d(q1, q2));
  CHECK(r.head<4>().norm() <= 1e-2);
}

TEST_CASE("residual quaternion part never exceeds sqrt(2) after alignment") {
  const RobotConfig robot = lander6_robot();
  const DHTable nominal = robot.table();
  Rng rng(31);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TrueArm arm = realize(
        nominal, PerturbationSpec::scaled(robot.bounds(), 100.0), {}, seed);
    for (int i = 0; i < 100; ++i) {
      Eigen::VectorXd q(6);
      for (int k = 0; k < 6; ++k) q[k] = rng.uniform(-kPi, kPi);
      const Vec7 r = residual(arm, nominal, q);
      CHECK(r.head<4>().norm() <= std::sqrt(2.0) + 1e-12);
    }
  }
}

TEST_CASE("spec validation rejects inconsistent shapes") {
  const DHTable nominal = planar2_table();
  std::vector<LinkPerturbation> wrong(3);
  CHECK_THROWS_AS(
      realize(nominal, PerturbationSpec::fixed(wrong), {}, 1), DomainError);

  std::vector<LinkIntervals> bad(2);
  bad[0].a = Interval{0.5, -0.5};
  CHECK_THROWS_AS(
      realize(nominal, PerturbationSpec::sampled_uniform(bad), {}, 1),
      DomainError);

  MeasurementModel meas;
  meas.noise_std[0] = -1.0;
  CHECK_THROWS_AS(realize(nominal, PerturbationSpec::none(), meas, 1),
                  DomainError);
}
