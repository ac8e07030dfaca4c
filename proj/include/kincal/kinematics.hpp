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
// Denavit-Hartenberg forward kinematics with a sign-continuous quaternion
// pose output, plus the finite-difference Jacobian over the (alpha, d, a)
// link parameters used by the linearized calibrator.

#ifndef KINCAL_KINEMATICS_HPP
#define KINCAL_KINEMATICS_HPP

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "kincal/common.hpp"

namespace kincal {

enum class JointKind { kRevolute, kPrismatic };

/// One DH row. Angles are kept normalized to (-pi, pi].
struct DHLink {
  JointKind kind = JointKind::kRevolute;
  double theta0 = 0.0;  // joint angle offset [rad]
  double alpha = 0.0;   // twist [rad]
  double a = 0.0;       // link length [m]
  double d = 0.0;       // link offset [m]

  DHLink() = default;
  DHLink(JointKind k, double theta0_, double alpha_, double a_, double d_)
      : kind(k),
        theta0(wrap_angle(theta0_)),
        alpha(wrap_angle(alpha_)),
        a(a_),
        d(d_) {
    if (!std::isfinite(a) || !std::isfinite(d) || !std::isfinite(theta0_) ||
        !std::isfinite(alpha_)) {
      throw DomainError("DHLink: non-finite parameter");
    }
  }
};

struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return RigidTransform{}; }

  RigidTransform compose(const RigidTransform& rhs) const {
    RigidTransform out;
    out.rotation = rotation * rhs.rotation;
    out.translation = rotation * rhs.translation + translation;
    return out;
  }

  /// Orthonormality and determinant defect, for invariant checks.
  double orthonormality_error() const {
    return (rotation.transpose() * rotation - Eigen::Matrix3d::Identity())
        .norm();
  }
  double determinant_error() const { return std::abs(rotation.determinant() - 1.0); }

  bool is_rigid(double tol = 1e-9) const {
    return orthonormality_error() <= tol && determinant_error() <= tol;
  }
};

struct JointLimits {
  double lo = 0.0;
  double hi = 0.0;
};

struct DHTable {
  std::vector<DHLink> links;
  RigidTransform tool = RigidTransform::identity();  // ^nT_tool, default identity
  std::vector<JointLimits> joint_limits;

  int dof() const { return static_cast<int>(links.size()); }

  void validate() const {
    if (links.empty()) throw DomainError("DHTable: no links");
    if (joint_limits.size() != links.size())
      throw DomainError("DHTable: joint_limits size != link count");
    for (std::size_t i = 0; i < joint_limits.size(); ++i) {
      if (!(joint_limits[i].lo < joint_limits[i].hi))
        throw DomainError("DHTable: joint limit lo >= hi at joint " +
                          std::to_string(i + 1));
    }
    if (!tool.is_rigid(1e-9)) throw DomainError("DHTable: tool transform not rigid");
  }

  bool within_limits(const Eigen::VectorXd& q, double slack = 1e-12) const {
    if (q.size() != dof()) return false;
    for (int i = 0; i < dof(); ++i) {
      if (q[i] < joint_limits[i].lo - slack || q[i] > joint_limits[i].hi + slack)
        return false;
    }
    return true;
  }
};

/// Unit quaternion (scalar-first) plus position; the 7-vector measurement
/// target is [quat; pos].
struct Pose7 {
  Eigen::Vector4d quat = Eigen::Vector4d(1, 0, 0, 0);  // (w, x, y, z)
  Eigen::Vector3d pos = Eigen::Vector3d::Zero();

  Vec7 vector() const {
    Vec7 v;
    v << quat, pos;
    return v;
  }

  static Pose7 from_vector(const Vec7& v) {
    Pose7 p;
    p.quat = v.head<4>();
    p.pos = v.tail<3>();
    return p;
  }
};

/// DH link transform evaluated at joint value q (added to theta for revolute
/// joints, to d for prismatic ones).
inline RigidTransform link_transform(const DHLink& link, double q) {
  if (!std::isfinite(q)) throw DomainError("link_transform: non-finite joint value");
  const double theta = link.kind == JointKind::kRevolute ? link.theta0 + q : link.theta0;
  const double d = link.kind == JointKind::kPrismatic ? link.d + q : link.d;
  const double ct = std::cos(theta), st = std::sin(theta);
  const double ca = std::cos(link.alpha), sa = std::sin(link.alpha);

  RigidTransform t;
  t.rotation << ct, -st * ca, st * sa,
                st, ct * ca, -ct * sa,
                0.0, sa, ca;
  t.translation << link.a * ct, link.a * st, d;
  return t;
}

/// Shepperd-style rotation-to-quaternion extraction with hemisphere locking.
/// With a reference the result satisfies dot(q, ref) >= 0; without one the
/// scalar part is kept non-negative, ties broken by the first nonzero
/// component positive.
inline Eigen::Vector4d continuous_quat(
    const Eigen::Matrix3d& rotation,
    const std::optional<Eigen::Vector4d>& ref = std::nullopt) {
  const double ortho =
      (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).norm();
  if (ortho > 1e-6 || std::abs(rotation.determinant() - 1.0) > 1e-6)
    throw DomainError("continuous_quat: matrix is not a rotation");

  const Eigen::Matrix3d& r = rotation;
  Eigen::Vector4d q;  // (w, x, y, z)
  const double trace = r(0, 0) + r(1, 1) + r(2, 2);
  if (trace > 0.0) {
    double s = std::sqrt(trace + 1.0) * 2.0;  // 4w
    q << 0.25 * s, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s,
        (r(1, 0) - r(0, 1)) / s;
  } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2.0;  // 4x
    q << (r(2, 1) - r(1, 2)) / s, 0.25 * s, (r(0, 1) + r(1, 0)) / s,
        (r(0, 2) + r(2, 0)) / s;
  } else if (r(1, 1) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2.0;  // 4y
    q << (r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, 0.25 * s,
        (r(1, 2) + r(2, 1)) / s;
  } else {
    double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2.0;  // 4z
    q << (r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s,
        (r(1, 2) + r(2, 1)) / s, 0.25 * s;
  }
  q.normalize();

  if (ref) return align_hemisphere(q, *ref);
  if (q[0] > 0.0) return q;
  if (q[0] < 0.0) return -q;
  for (int i = 1; i < 4; ++i) {
    if (q[i] > 0.0) return q;
    if (q[i] < 0.0) return -q;
  }
  return q;
}

/// Chained link transforms composed with the tool transform.
inline RigidTransform forward_transform(const DHTable& table,
                                        const Eigen::VectorXd& q) {
  if (q.size() != table.dof())
    throw DomainError("forward_kinematics: joint vector length " +
                      std::to_string(q.size()) + " != " +
                      std::to_string(table.dof()) + " links");
  RigidTransform t = RigidTransform::identity();
  for (int i = 0; i < table.dof(); ++i)
    t = t.compose(link_transform(table.links[i], q[i]));
  return t.compose(table.tool);
}

/// Forward kinematics as a quaternion+position pose. `quat_ref`, when given,
/// selects the quaternion hemisphere for continuity along a path; callers
/// hold the reference themselves.
inline Pose7 forward_kinematics(
    const DHTable& table, const Eigen::VectorXd& q,
    const std::optional<Eigen::Vector4d>& quat_ref = std::nullopt) {
  const RigidTransform t = forward_transform(table, q);
  Pose7 pose;
  pose.quat = continuous_quat(t.rotation, quat_ref);
  pose.pos = t.translation;
  return pose;
}

/// Flattened (alpha_i, d_i, a_i) parameter vector, one 3-block per link.
inline Eigen::VectorXd phi_vector(const DHTable& table) {
  Eigen::VectorXd phi(3 * table.dof());
  for (int i = 0; i < table.dof(); ++i) {
    phi[3 * i + 0] = table.links[i].alpha;
    phi[3 * i + 1] = table.links[i].d;
    phi[3 * i + 2] = table.links[i].a;
  }
  return phi;
}

/// Table with the (alpha, d, a) parameters replaced by `phi`.
inline DHTable with_phi(const DHTable& table, const Eigen::VectorXd& phi) {
  if (phi.size() != 3 * table.dof())
    throw DomainError("with_phi: parameter vector length mismatch");
  DHTable out = table;
  for (int i = 0; i < table.dof(); ++i) {
    out.links[i].alpha = wrap_angle(phi[3 * i + 0]);
    out.links[i].d = phi[3 * i + 1];
    out.links[i].a = phi[3 * i + 2];
  }
  return out;
}

/// 7 x 3n Jacobian of the pose vector over the (alpha_i, d_i, a_i) blocks,
/// by central finite differences. Perturbed poses are hemisphere-locked to
/// the unperturbed pose so quaternion rows difference cleanly.
inline Eigen::MatrixXd parameter_jacobian(const DHTable& table,
                                          const Eigen::VectorXd& q,
                                          double step = 1e-6) {
  const Eigen::Vector4d ref = forward_kinematics(table, q).quat;
  const Eigen::VectorXd phi0 = phi_vector(table);
  Eigen::MatrixXd jac(7, phi0.size());
  Eigen::VectorXd phi = phi0;
  for (int j = 0; j < phi0.size(); ++j) {
    phi[j] = phi0[j] + step;
    const Vec7 plus = forward_kinematics(with_phi(table, phi), q, ref).vector();
    phi[j] = phi0[j] - step;
    const Vec7 minus = forward_kinematics(with_phi(table, phi), q, ref).vector();
    phi[j] = phi0[j];
    jac.col(j) = (plus - minus) / (2.0 * step);
  }
  return jac;
}

}  // namespace kincal

#endif  // KINCAL_KINEMATICS_HPP
