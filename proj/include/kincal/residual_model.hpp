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
//
// The seven-GP residual model: one single-output GP per pose axis (quat w,
// x, y, z, then pos x, y, z), all trained on the same joint-space inputs.
// Corrected poses are nominal forward kinematics plus the predicted residual
// means, quaternion renormalized.

#ifndef KINCAL_RESIDUAL_MODEL_HPP
#define KINCAL_RESIDUAL_MODEL_HPP

#include <Eigen/Dense>

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "kincal/arm_model.hpp"
#include "kincal/common.hpp"
#include "kincal/gp.hpp"
#include "kincal/kinematics.hpp"
#include "kincal/stats.hpp"

namespace kincal {

/// When to re-run the hyperparameter optimizer. The default re-optimizes on
/// updates 1..warmup and every `period`-th update after that; in between only
/// the Cholesky factor is refit.
struct RefitPolicy {
  enum class Kind { kAlways, kNever, kPeriodic };
  Kind kind = Kind::kPeriodic;
  int period = 5;
  int warmup = 5;
  int restarts_initial = 8;  // restarts on the first re-optimization
  int restarts_refit = 8;    // restarts on later ones (warm-started)

  static RefitPolicy never() { return RefitPolicy{Kind::kNever, 0, 0, 8, 8}; }
  static RefitPolicy always() { return RefitPolicy{Kind::kAlways, 1, 0, 8, 8}; }

  bool should_reoptimize(int update_index) const {
    switch (kind) {
      case Kind::kAlways:
        return true;
      case Kind::kNever:
        return false;
      case Kind::kPeriodic:
        return update_index <= warmup ||
               (period > 0 && update_index % period == 0);
    }
    return false;
  }
};

struct AxisPrediction {
  Vec7 mean = Vec7::Zero();
  Vec7 std = Vec7::Zero();
};

/// Persistent-value model: update() returns a new model, predictions are
/// pure reads.
class ResidualModel {
 public:
  ResidualModel() = default;
  ResidualModel(DHTable nominal, Hyperparams init_hyper, RefitPolicy policy,
                std::uint64_t seed, OptimizeOptions gp_options = {},
                std::optional<Eigen::Vector4d> quat_ref = std::nullopt)
      : nominal_(std::move(nominal)),
        policy_(policy),
        seed_(seed),
        gp_options_(gp_options),
        quat_ref_(std::move(quat_ref)) {
    axis_hyper_.fill(init_hyper);
  }

  const DHTable& nominal() const { return nominal_; }
  /// Hemisphere reference shared by the training residuals and corrected_fk.
  const std::optional<Eigen::Vector4d>& quat_ref() const { return quat_ref_; }
  const std::vector<std::pair<Eigen::VectorXd, Vec7>>& history() const {
    return history_;
  }
  int n_observations() const { return static_cast<int>(history_.size()); }
  const std::array<GPModel, 7>& gps() const { return gps_; }
  const std::array<Hyperparams, 7>& axis_hyper() const { return axis_hyper_; }
  const RefitPolicy& policy() const { return policy_; }
  std::uint64_t seed() const { return seed_; }
  const OptimizeOptions& gp_options() const { return gp_options_; }

  friend ResidualModel update(const ResidualModel& model,
                              const Eigen::VectorXd& q, const Vec7& res);

 private:
  DHTable nominal_;
  RefitPolicy policy_;
  std::uint64_t seed_ = 0;
  OptimizeOptions gp_options_;
  std::optional<Eigen::Vector4d> quat_ref_;
  std::vector<std::pair<Eigen::VectorXd, Vec7>> history_;
  std::array<Hyperparams, 7> axis_hyper_;
  std::array<GPModel, 7> gps_;
};

/// Append one (q, residual) observation and refit all seven GPs. Ill
/// conditioning is reported with the offending axis index.
inline ResidualModel update(const ResidualModel& model, const Eigen::VectorXd& q,
                            const Vec7& res) {
  ResidualModel next = model;
  next.history_.emplace_back(q, res);
  const int n = next.n_observations();
  const int dim = static_cast<int>(q.size());

  Eigen::MatrixXd inputs(n, dim);
  Eigen::MatrixXd targets(n, 7);
  for (int i = 0; i < n; ++i) {
    inputs.row(i) = next.history_[i].first.transpose();
    targets.row(i) = next.history_[i].second.transpose();
  }

  const bool reoptimize = next.policy_.should_reoptimize(n);
  const int restarts = (n <= next.policy_.warmup || next.policy_.kind !=
                        RefitPolicy::Kind::kPeriodic)
                           ? next.policy_.restarts_initial
                           : next.policy_.restarts_refit;
  for (int axis = 0; axis < 7; ++axis) {
    TrainingSet data{inputs, targets.col(axis)};
    try {
      if (reoptimize) {
        const std::uint64_t axis_seed =
            mix_seed(next.seed_, static_cast<std::uint64_t>(n) * 31 + axis);
        next.axis_hyper_[axis] =
            optimize_hyper(data, next.axis_hyper_[axis], restarts, axis_seed,
                           next.gp_options_)
                .hyper;
      }
      next.gps_[axis] = fit(data, next.axis_hyper_[axis]);
    } catch (const IllConditionedError& e) {
      throw IllConditionedError(
          "residual model axis " + std::to_string(axis) + ": " + e.what(),
          e.attempted_jitter());
    }
  }
  return next;
}

/// Per-axis posterior mean and standard deviation at q.
inline AxisPrediction predict_residual(const ResidualModel& model,
                                       const Eigen::VectorXd& q) {
  if (model.n_observations() == 0)
    throw NotFittedError("predict_residual: model has no observations");
  AxisPrediction out;
  for (int axis = 0; axis < 7; ++axis) {
    const Prediction p = predict(model.gps()[axis], q);
    out.mean[axis] = p.mean;
    out.std[axis] = std::sqrt(p.variance);
  }
  return out;
}

/// Batched per-axis posterior over the rows of Q: means/stds are 7 x M.
inline void predict_residual_batch(const ResidualModel& model,
                                   const Eigen::MatrixXd& Q,
                                   Eigen::MatrixXd& means,
                                   Eigen::MatrixXd& stds) {
  if (model.n_observations() == 0)
    throw NotFittedError("predict_residual_batch: model has no observations");
  const int m = static_cast<int>(Q.rows());
  means.resize(7, m);
  stds.resize(7, m);
  Eigen::VectorXd mu, var;
  for (int axis = 0; axis < 7; ++axis) {
    predict_batch(model.gps()[axis], Q, mu, var);
    means.row(axis) = mu.transpose();
    stds.row(axis) = var.array().sqrt().transpose();
  }
}

/// Nominal forward kinematics plus the predicted residual mean. The summed
/// quaternion is renormalized; its pre-normalization norm is reported through
/// `pre_normalization_norm` when requested. A model with no observations
/// falls back to the zero-mean prior, i.e. the nominal pose itself.
inline Pose7 corrected_fk(const ResidualModel& model, const Eigen::VectorXd& q,
                          double* pre_normalization_norm = nullptr) {
  const Pose7 nominal = forward_kinematics(model.nominal(), q, model.quat_ref());
  if (model.n_observations() == 0) {
    if (pre_normalization_norm) *pre_normalization_norm = 1.0;
    return nominal;
  }
  const AxisPrediction pred = predict_residual(model, q);
  Vec7 v = nominal.vector() + pred.mean;
  Pose7 out = Pose7::from_vector(v);
  const double norm = out.quat.norm();
  if (pre_normalization_norm) *pre_normalization_norm = norm;
  if (norm <= 0.0)
    throw DomainError("corrected_fk: corrected quaternion collapsed to zero");
  out.quat /= norm;
  return out;
}

struct HoldoutMetrics {
  Eigen::MatrixXd points;     // m x n, the evaluated joint configurations
  Eigen::VectorXd err_uncal;  // ||true - nominal|| per point
  Eigen::VectorXd err_cal;    // ||true - corrected|| per point
  Eigen::MatrixXd axis_err;   // m x 7 signed corrected errors
  double median_uncal = 0.0;
  double median_cal = 0.0;
};

/// Held-out pose error of the corrected model against the noise-free true
/// arm, plus the uncalibrated baseline on the same points.
inline HoldoutMetrics holdout_error(const ResidualModel& model,
                                    const TrueArm& arm,
                                    const Eigen::MatrixXd& test_points) {
  if (test_points.rows() == 0)
    throw DomainError("holdout_error: empty test set");
  const int m = static_cast<int>(test_points.rows());
  HoldoutMetrics out;
  out.points = test_points;
  out.err_uncal.resize(m);
  out.err_cal.resize(m);
  out.axis_err.resize(m, 7);
  for (int i = 0; i < m; ++i) {
    const Eigen::VectorXd q = test_points.row(i).transpose();
    const Pose7 truth = arm.true_pose(q);
    const Pose7 nominal =
        forward_kinematics(model.nominal(), q, model.quat_ref());
    const Pose7 corrected = corrected_fk(model, q);

    Vec7 d_uncal;
    d_uncal.head<4>() =
        align_hemisphere(truth.quat, nominal.quat) - nominal.quat;
    d_uncal.tail<3>() = truth.pos - nominal.pos;
    out.err_uncal[i] = d_uncal.norm();

    Vec7 d_cal;
    d_cal.head<4>() =
        align_hemisphere(truth.quat, corrected.quat) - corrected.quat;
    d_cal.tail<3>() = truth.pos - corrected.pos;
    out.err_cal[i] = d_cal.norm();
    out.axis_err.row(i) = d_cal.transpose();
  }
  std::vector<double> u(out.err_uncal.data(), out.err_uncal.data() + m);
  std::vector<double> c(out.err_cal.data(), out.err_cal.data() + m);
  out.median_uncal = median(std::move(u));
  out.median_cal = median(std::move(c));
  return out;
}

}  // namespace kincal

#endif  // KINCAL_RESIDUAL_MODEL_HPP
