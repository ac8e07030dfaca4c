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
// Simulated ground truth: a distorted copy of the nominal arm, an optional
// smooth additive residual field, and a noisy pose sensor.

#ifndef KINCAL_ARM_MODEL_HPP
#define KINCAL_ARM_MODEL_HPP

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "kincal/common.hpp"
#include "kincal/kinematics.hpp"
#include "kincal/rng.hpp"

namespace kincal {

/// Smooth joint-space field added on top of the perturbed forward kinematics.
using ResidualField = std::function<Vec7(const Eigen::VectorXd&)>;

/// Sinusoidal residual field g_i(q) = amplitude_i * sin(weights . q + phase_i).
/// The config-constructible member of the ResidualField family.
struct SineField {
  Vec7 amplitude = Vec7::Zero();
  Eigen::VectorXd weights;  // one per joint
  Vec7 phase = Vec7::Zero();

  Vec7 operator()(const Eigen::VectorXd& q) const {
    const double s = weights.dot(q);
    Vec7 g;
    for (int i = 0; i < 7; ++i) g[i] = amplitude[i] * std::sin(s + phase[i]);
    return g;
  }
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Fixed per-link DH deltas.
struct LinkPerturbation {
  double theta = 0.0;
  double alpha = 0.0;
  double d = 0.0;
  double a = 0.0;
};

/// Per-link sampling intervals, one per DH parameter.
struct LinkIntervals {
  Interval theta, alpha, d, a;
};

/// Symmetric uncertainty magnitudes (the "value +- bound" format).
struct LinkBounds {
  double theta = 0.0;
  double alpha = 0.0;
  double d = 0.0;
  double a = 0.0;
};

enum class PerturbationMode { kFixed, kSampledUniform, kScaled };

/// How the "true" arm differs from the nominal table. kFixed applies `deltas`
/// verbatim; kSampledUniform draws each delta from `intervals`; kScaled draws
/// each delta uniformly in +-(percent/100)*bound.
struct PerturbationSpec {
  PerturbationMode mode = PerturbationMode::kFixed;
  std::vector<LinkPerturbation> deltas;
  std::vector<LinkIntervals> intervals;
  std::vector<LinkBounds> bounds;
  double percent = 0.0;
  ResidualField additive;  // empty = none

  static PerturbationSpec none() { return PerturbationSpec{}; }

  static PerturbationSpec fixed(std::vector<LinkPerturbation> d) {
    PerturbationSpec s;
    s.mode = PerturbationMode::kFixed;
    s.deltas = std::move(d);
    return s;
  }

  static PerturbationSpec sampled_uniform(std::vector<LinkIntervals> iv) {
    PerturbationSpec s;
    s.mode = PerturbationMode::kSampledUniform;
    s.intervals = std::move(iv);
    return s;
  }

  static PerturbationSpec scaled(std::vector<LinkBounds> b, double percent) {
    PerturbationSpec s;
    s.mode = PerturbationMode::kScaled;
    s.bounds = std::move(b);
    s.percent = percent;
    return s;
  }

  void validate(int n_links) const {
    switch (mode) {
      case PerturbationMode::kFixed:
        if (!deltas.empty() && static_cast<int>(deltas.size()) != n_links)
          throw DomainError("PerturbationSpec: deltas length != link count");
        break;
      case PerturbationMode::kSampledUniform:
        if (static_cast<int>(intervals.size()) != n_links)
          throw DomainError("PerturbationSpec: intervals length != link count");
        for (const auto& iv : intervals) {
          for (const Interval* p : {&iv.theta, &iv.alpha, &iv.d, &iv.a}) {
            if (p->lo > p->hi)
              throw DomainError("PerturbationSpec: interval lo > hi");
          }
        }
        break;
      case PerturbationMode::kScaled:
        if (static_cast<int>(bounds.size()) != n_links)
          throw DomainError("PerturbationSpec: bounds length != link count");
        if (percent < 0.0) throw DomainError("PerturbationSpec: percent < 0");
        break;
    }
  }
};

/// Per-axis sensor noise. Quaternion axes are unitless, position axes meters.
/// rng_seed = 0 means "derive the stream from the realize() seed".
struct MeasurementModel {
  Vec7 noise_std = Vec7::Zero();
  std::uint64_t rng_seed = 0;

  void validate() const {
    for (int i = 0; i < 7; ++i)
      if (noise_std[i] < 0.0) throw DomainError("MeasurementModel: noise_std < 0");
  }
};

/// The simulated actual robot. Owns the measurement RNG stream, so a campaign
/// must own its arm exclusively; copies restart from the copied stream state.
class TrueArm {
 public:
  TrueArm(DHTable nominal, DHTable perturbed, ResidualField additive,
          MeasurementModel measurement, std::uint64_t noise_seed)
      : nominal_(std::move(nominal)),
        perturbed_(std::move(perturbed)),
        additive_(std::move(additive)),
        measurement_(measurement),
        rng_(noise_seed) {
    if (nominal_.dof() != perturbed_.dof())
      throw DomainError("TrueArm: nominal/perturbed link count mismatch");
    for (int i = 0; i < nominal_.dof(); ++i)
      if (nominal_.links[i].kind != perturbed_.links[i].kind)
        throw DomainError("TrueArm: joint kind mismatch");
    measurement_.validate();
  }

  const DHTable& nominal() const { return nominal_; }
  const DHTable& perturbed() const { return perturbed_; }
  const MeasurementModel& measurement() const { return measurement_; }

  /// Noise-free true pose (perturbed FK plus additive field). Does not touch
  /// the RNG stream; used for held-out evaluation.
  Pose7 true_pose(const Eigen::VectorXd& q,
                  const std::optional<Eigen::Vector4d>& quat_ref =
                      std::nullopt) const {
    Pose7 pose = forward_kinematics(perturbed_, q, quat_ref);
    if (additive_) {
      const Vec7 g = additive_(q);
      Vec7 v = pose.vector() + g;
      pose = Pose7::from_vector(v);
      pose.quat.normalize();
    }
    return pose;
  }

  /// One noisy pose measurement; advances the RNG stream.
  Pose7 measure(const Eigen::VectorXd& q) {
    if (!nominal_.within_limits(q) && !warned_limits_) {
      std::cerr << "kincal: warning: measurement outside joint limits\n";
      warned_limits_ = true;
    }
    Vec7 v = true_pose(q).vector();
    for (int i = 0; i < 7; ++i) v[i] += measurement_.noise_std[i] * rng_.gaussian();
    Pose7 pose = Pose7::from_vector(v);
    pose.quat.normalize();
    return pose;
  }

 private:
  DHTable nominal_;
  DHTable perturbed_;
  ResidualField additive_;
  MeasurementModel measurement_;
  Rng rng_;
  bool warned_limits_ = false;
};

/// Build the distorted arm from a perturbation spec. Deterministic in
/// (nominal, spec, seed); the draw order is link-major, (theta, alpha, d, a).
inline TrueArm realize(const DHTable& nominal, const PerturbationSpec& spec,
                       const MeasurementModel& measurement, std::uint64_t seed) {
  nominal.validate();
  spec.validate(nominal.dof());

  Rng rng(mix_seed(seed, 0x7065727475ULL));
  DHTable perturbed = nominal;
  for (int i = 0; i < nominal.dof(); ++i) {
    LinkPerturbation delta;
    switch (spec.mode) {
      case PerturbationMode::kFixed:
        if (!spec.deltas.empty()) delta = spec.deltas[i];
        break;
      case PerturbationMode::kSampledUniform: {
        const LinkIntervals& iv = spec.intervals[i];
        delta.theta = rng.uniform(iv.theta.lo, iv.theta.hi);
        delta.alpha = rng.uniform(iv.alpha.lo, iv.alpha.hi);
        delta.d = rng.uniform(iv.d.lo, iv.d.hi);
        delta.a = rng.uniform(iv.a.lo, iv.a.hi);
        break;
      }
      case PerturbationMode::kScaled: {
        const LinkBounds& b = spec.bounds[i];
        const double f = spec.percent / 100.0;
        delta.theta = rng.uniform(-f * b.theta, f * b.theta);
        delta.alpha = rng.uniform(-f * b.alpha, f * b.alpha);
        delta.d = rng.uniform(-f * b.d, f * b.d);
        delta.a = rng.uniform(-f * b.a, f * b.a);
        break;
      }
    }
    DHLink& link = perturbed.links[i];
    link.theta0 = wrap_angle(link.theta0 + delta.theta);
    link.alpha = wrap_angle(link.alpha + delta.alpha);
    link.d += delta.d;
    link.a += delta.a;
  }

  const std::uint64_t noise_seed = measurement.rng_seed != 0
                                       ? measurement.rng_seed
                                       : mix_seed(seed, 0x6e6f697365ULL);
  return TrueArm(nominal, perturbed, spec.additive, measurement, noise_seed);
}

/// Measured residual target: measure(q) minus the nominal-table pose, with
/// both quaternions on the same hemisphere before subtraction. Advances the
/// arm's RNG stream. `quat_ref`, when given, locks the nominal quaternion's
/// sign so residual targets form a continuous field over the workspace
/// rather than flipping across the w = 0 manifold.
inline Vec7 residual(TrueArm& arm, const DHTable& nominal_table,
                     const Eigen::VectorXd& q,
                     const std::optional<Eigen::Vector4d>& quat_ref =
                         std::nullopt) {
  const Pose7 measured = arm.measure(q);
  const Pose7 nominal = forward_kinematics(nominal_table, q, quat_ref);
  Vec7 r;
  r.head<4>() = align_hemisphere(measured.quat, nominal.quat) - nominal.quat;
  r.tail<3>() = measured.pos - nominal.pos;
  return r;
}

/// Noise-free residual; used by held-out metrics and diagnostics.
inline Vec7 residual_noiseless(const TrueArm& arm, const DHTable& nominal_table,
                               const Eigen::VectorXd& q,
                               const std::optional<Eigen::Vector4d>& quat_ref =
                                   std::nullopt) {
  const Pose7 truth = arm.true_pose(q);
  const Pose7 nominal = forward_kinematics(nominal_table, q, quat_ref);
  Vec7 r;
  r.head<4>() = align_hemisphere(truth.quat, nominal.quat) - nominal.quat;
  r.tail<3>() = truth.pos - nominal.pos;
  return r;
}

/// Hemisphere reference for a joint-space working region: the nominal pose
/// at the center of the joint limits.
inline Eigen::Vector4d center_pose_reference(const DHTable& table) {
  Eigen::VectorXd mid(table.dof());
  for (int i = 0; i < table.dof(); ++i)
    mid[i] = 0.5 * (table.joint_limits[i].lo + table.joint_limits[i].hi);
  return forward_kinematics(table, mid).quat;
}

}  // namespace kincal

#endif  // KINCAL_ARM_MODEL_HPP
