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

#include "kincal/acquisition.hpp"
#include "kincal/arm_model.hpp"
#include "kincal/pool.hpp"
#include "kincal/residual_model.hpp"
#include "kincal/robots.hpp"
#include "oracles.hpp"

using namespace kincal;

namespace {

DHTable planar2_table() { return planar2_robot().table(); }

PerturbationSpec delta_a1(double value) {
  std::vector<LinkPerturbation> deltas(2);
  deltas[0].a = value;
  return PerturbationSpec::fixed(deltas);
}

ResidualModel fresh_model(const DHTable& nominal,
                          RefitPolicy policy = RefitPolicy{},
                          Hyperparams init = Hyperparams::isotropic(1.0, 0.1,
                                                                    0.0, 1e-3)) {
  return ResidualModel(nominal, init, policy, 1234);
}

}  // namespace

TEST_CASE("update: first observation is interpolated at its own input") {
  const DHTable nominal = planar2_table();
  TrueArm arm = realize(nominal, delta_a1(0.15), {}, 6);
  const Eigen::Vector2d q(0.5, -0.4);
  const Vec7 r = residual(arm, nominal, q);

  // at a single noiseless point the fitted mean recalls the observation up
  // to the optimizer's sigma_f / sigma_eps split, which is data-starved here
  const ResidualModel model = update(fresh_model(nominal), q, r);
  const AxisPrediction p = predict_residual(model, q);
  CHECK((p.mean - r).norm() <= 1e-3);
}

TEST_CASE("update: 30 campaign observations beat a single one on holdout") {
  const DHTable nominal = planar2_table();
  const CandidatePool pool = make_grid_pool(nominal, 25);
  const Eigen::MatrixXd holdout = line_path(Eigen::Vector2d(-1.5, -1.5),
                                            Eigen::Vector2d(1.5, 1.5), 50);
  CampaignOptions opts;
  opts.beta = BetaSchedule{0.1, 2.0, 1.0, 1.0, 6.0};
  opts.holdout_points = holdout;

  TrueArm arm30 = realize(nominal, delta_a1(0.2), {}, 13);
  const RunRecord rec30 =
      run_campaign(arm30, nominal, pool, Strategy::kGpUcb, 30, 13, opts);
  TrueArm arm1 = realize(nominal, delta_a1(0.2), {}, 13);
  const RunRecord rec1 =
      run_campaign(arm1, nominal, pool, Strategy::kGpUcb, 1, 13, opts);
  CHECK(rec30.holdout.median_cal < rec1.holdout.median_cal);
}

TEST_CASE("update: duplicate noisy inputs are both retained and averaged") {
  const DHTable nominal = planar2_table();
  const Eigen::Vector2d q(0.2, 0.3);
  Vec7 r1 = Vec7::Zero(), r2 = Vec7::Zero();
  r1[4] = 0.10;
  r2[4] = 0.20;

  ResidualModel model = fresh_model(
      nominal, RefitPolicy::never(),
      Hyperparams::isotropic(1.0, 0.1, 0.0, 0.05));
  model = update(model, q, r1);
  model = update(model, q, r2);
  CHECK(model.n_observations() == 2);
  const AxisPrediction p = predict_residual(model, q);
  CHECK(p.mean[4] > 0.10);
  CHECK(p.mean[4] < 0.20);
}

TEST_CASE("predict_residual: training point recall and prior reversion") {
  const DHTable nominal = planar2_table();
  const Hyperparams fixed = Hyperparams::isotropic(0.8, 0.25, 0.0, 1e-6);
  ResidualModel model = fresh_model(nominal, RefitPolicy::never(), fixed);

  const Eigen::Vector2d q(0.1, -0.2);
  Vec7 r = Vec7::Zero();
  r[4] = 0.05;
  r[1] = -0.01;
  model = update(model, q, r);

  const AxisPrediction at_q = predict_residual(model, q);
  CHECK((at_q.mean - r).norm() <= 1e-6);

  const AxisPrediction far = predict_residual(model, Eigen::Vector2d(2.9, -2.9));
  for (int axis = 0; axis < 7; ++axis)
    CHECK(far.std[axis] == Catch::Approx(0.25).epsilon(0.01));
}

TEST_CASE("predict_residual cross-checks the dense oracle on 3 observations") {
  const DHTable nominal = planar2_table();
  const Hyperparams fixed = Hyperparams::isotropic(0.9, 0.3, 0.0, 0.02);
  ResidualModel model = fresh_model(nominal, RefitPolicy::never(), fixed);

  Rng rng(21);
  Eigen::MatrixXd inputs(3, 2);
  Eigen::MatrixXd targets(3, 7);
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector2d q(rng.uniform(-2, 2), rng.uniform(-2, 2));
    Vec7 r;
    for (int k = 0; k < 7; ++k) r[k] = 0.1 * rng.gaussian();
    inputs.row(i) = q.transpose();
    targets.row(i) = r.transpose();
    model = update(model, q, r);
  }

  const Eigen::Vector2d probe(0.4, 0.6);
  const AxisPrediction p = predict_residual(model, probe);
  for (int axis = 0; axis < 7; ++axis) {
    const oracles::DensePosterior ref = oracles::dense_gp(
        inputs, targets.col(axis), probe, 0.9, 0.3, 0.0, 0.02);
    CHECK(p.mean[axis] == Catch::Approx(ref.mean).margin(1e-10));
    CHECK(p.std[axis] * p.std[axis] ==
          Catch::Approx(ref.variance).margin(1e-10));
  }
}

TEST_CASE("predict_residual on an empty model raises NotFittedError") {
  const ResidualModel model = fresh_model(planar2_table());
  CHECK_THROWS_AS(predict_residual(model, Eigen::Vector2d(0, 0)),
                  NotFittedError);
}

TEST_CASE("corrected_fk: zero-residual training collapses to nominal FK") {
  const DHTable nominal = planar2_table();
  ResidualModel model = fresh_model(nominal, RefitPolicy::never());
  Rng rng(2);
  for (int i = 0; i < 5; ++i)
    model = update(model,
                   Eigen::Vector2d(rng.uniform(-2, 2), rng.uniform(-2, 2)),
                   Vec7::Zero());
  const Eigen::Vector2d q(0.7, -1.1);
  const Pose7 corrected = corrected_fk(model, q);
  const Pose7 nominal_pose = forward_kinematics(nominal, q);
  CHECK((corrected.vector() - nominal_pose.vector()).norm() <= 1e-9);
}

TEST_CASE("corrected_fk: campaign-trained planar model fixes the reach error") {
  const DHTable nominal = planar2_table();
  const CandidatePool pool = make_grid_pool(nominal, 25);
  CampaignOptions opts;
  opts.beta = BetaSchedule{0.1, 2.0, 1.0, 1.0, 6.0};
  opts.holdout_points = line_path(Eigen::Vector2d(-1.5, -1.5),
                                  Eigen::Vector2d(1.5, 1.5), 50);

  TrueArm arm = realize(nominal, delta_a1(0.2), {}, 19);
  const RunRecord rec =
      run_campaign(arm, nominal, pool, Strategy::kGpUcb, 30, 19, opts);

  // rebuild the final model from the snapshot history and query q = (0, 0)
  ResidualModel model = fresh_model(nominal);
  for (int i = 0; i < rec.snapshot.inputs.rows(); ++i)
    model = update(model, rec.snapshot.inputs.row(i).transpose(),
                   rec.snapshot.targets.row(i).transpose());
  const Pose7 corrected = corrected_fk(model, Eigen::Vector2d(0, 0));
  CHECK(std::abs(corrected.pos[0] - 2.2) <= 0.02);
}

TEST_CASE("corrected_fk always returns a unit quaternion") {
  const DHTable nominal = planar2_table();
  ResidualModel model = fresh_model(nominal, RefitPolicy::never());
  Rng rng(44);
  for (int i = 0; i < 10; ++i) {
    Vec7 r;
    for (int k = 0; k < 7; ++k) r[k] = 0.3 * rng.gaussian();
    model = update(model,
                   Eigen::Vector2d(rng.uniform(-2, 2), rng.uniform(-2, 2)), r);
  }
  for (int i = 0; i < 50; ++i) {
    const Pose7 p = corrected_fk(
        model, Eigen::Vector2d(rng.uniform(-3, 3), rng.uniform(-3, 3)));
    CHECK(std::abs(p.quat.norm() - 1.0) <= 1e-9);
  }
}

TEST_CASE("all seven GPs share identical training inputs after updates") {
  const DHTable nominal = planar2_table();
  ResidualModel model = fresh_model(nominal);
  Rng rng(3);
  for (int i = 0; i < 6; ++i) {
    Vec7 r;
    for (int k = 0; k < 7; ++k) r[k] = 0.05 * rng.gaussian();
    model = update(model,
                   Eigen::Vector2d(rng.uniform(-2, 2), rng.uniform(-2, 2)), r);
  }
  const Eigen::MatrixXd& ref_inputs = model.gps()[0].data.inputs;
  for (int axis = 1; axis < 7; ++axis)
    CHECK(model.gps()[axis].data.inputs == ref_inputs);
}

TEST_CASE("posterior std is non-increasing in observations at fixed hyper") {
  const DHTable nominal = planar2_table();
  ResidualModel model = fresh_model(
      nominal, RefitPolicy::never(), Hyperparams::isotropic(1.0, 0.2, 0.0, 1e-3));
  const Eigen::Vector2d probe(1.0, 1.0);
  Rng rng(9);
  double previous = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 12; ++i) {
    Vec7 r;
    for (int k = 0; k < 7; ++k) r[k] = 0.05 * rng.gaussian();
    model = update(model,
                   Eigen::Vector2d(rng.uniform(-2, 2), rng.uniform(-2, 2)), r);
    const double s = predict_residual(model, probe).std.sum();
    CHECK(s <= previous + 1e-9);
    previous = s;
  }
}

TEST_CASE("zero perturbation and zero noise leave corrected_fk at nominal") {
  const DHTable nominal = planar2_table();
  TrueArm arm = realize(nominal, PerturbationSpec::none(), {}, 10);
  ResidualModel model = fresh_model(nominal);
  Rng rng(11);
  for (int i = 0; i < 8; ++i) {
    const Eigen::Vector2d q(rng.uniform(-2, 2), rng.uniform(-2, 2));
    model = update(model, q, residual(arm, nominal, q));
  }
  for (int i = 0; i < 20; ++i) {
    const Eigen::Vector2d q(rng.uniform(-3, 3), rng.uniform(-3, 3));
    const Pose7 corrected = corrected_fk(model, q);
    const Pose7 nominal_pose = forward_kinematics(nominal, q);
    CHECK((corrected.vector() - nominal_pose.vector()).norm() <= 1e-9);
  }
}

TEST_CASE("holdout_error: perfect, empty, and trained models rank correctly") {
  const DHTable nominal = planar2_table();
  TrueArm arm = realize(nominal, delta_a1(0.2), {}, 23);
  const Eigen::MatrixXd holdout = line_path(Eigen::Vector2d(-1.5, -1.5),
                                            Eigen::Vector2d(1.5, 1.5), 25);

  // empty model: corrected error equals the uncalibrated error
  const ResidualModel empty = fresh_model(nominal);
  const HoldoutMetrics base = holdout_error(empty, arm, holdout);
  CHECK((base.err_cal - base.err_uncal).lpNorm<Eigen::Infinity>() <= 1e-12);
  CHECK(base.median_uncal > 0.1);

  // zero perturbation arm: a model trained on its residuals scores zero
  TrueArm clean = realize(nominal, PerturbationSpec::none(), {}, 23);
  ResidualModel model = fresh_model(nominal);
  Rng rng(5);
  for (int i = 0; i < 5; ++i) {
    const Eigen::Vector2d q(rng.uniform(-2, 2), rng.uniform(-2, 2));
    model = update(model, q, residual(clean, nominal, q));
  }
  const HoldoutMetrics perfect = holdout_error(model, clean, holdout);
  CHECK(perfect.median_cal <= 1e-9);
}
