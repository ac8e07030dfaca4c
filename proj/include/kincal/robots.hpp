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
// Built-in robot descriptions: nominal DH rows with symmetric uncertainty
// bounds ("value +- bound") and joint limits.

#ifndef KINCAL_ROBOTS_HPP
#define KINCAL_ROBOTS_HPP

#include <string>
#include <vector>

#include "kincal/arm_model.hpp"
#include "kincal/common.hpp"
#include "kincal/kinematics.hpp"

namespace kincal {

struct RobotLinkRow {
  JointKind kind = JointKind::kRevolute;
  double theta0 = 0.0;
  double alpha = 0.0;
  double a = 0.0;
  double d = 0.0;
  LinkBounds bounds;
  JointLimits limits;
};

struct RobotConfig {
  std::string name;
  std::vector<RobotLinkRow> rows;
  RigidTransform tool = RigidTransform::identity();

  DHTable table() const {
    DHTable t;
    t.tool = tool;
    for (const RobotLinkRow& row : rows) {
      t.links.emplace_back(row.kind, row.theta0, row.alpha, row.a, row.d);
      t.joint_limits.push_back(row.limits);
    }
    t.validate();
    return t;
  }

  std::vector<LinkBounds> bounds() const {
    std::vector<LinkBounds> b;
    for (const RobotLinkRow& row : rows) b.push_back(row.bounds);
    return b;
  }

  double max_joint_range() const {
    double r = 0.0;
    for (const RobotLinkRow& row : rows)
      r = std::max(r, row.limits.hi - row.limits.lo);
    return r;
  }

  void validate() const {
    if (rows.empty()) throw ConfigError("robot '" + name + "': no links");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const LinkBounds& b = rows[i].bounds;
      if (b.theta < 0 || b.alpha < 0 || b.d < 0 || b.a < 0)
        throw ConfigError("robot '" + name + "': negative bound in link " +
                          std::to_string(i + 1));
      if (!(rows[i].limits.lo < rows[i].limits.hi))
        throw ConfigError("robot '" + name + "': bad joint limits in link " +
                          std::to_string(i + 1));
    }
    table();  // runs the DHTable invariants
  }
};

namespace detail {

inline RobotLinkRow revolute_row(double d, double bd, double a, double ba,
                                 double alpha, double balpha, double btheta,
                                 double lim_lo, double lim_hi) {
  RobotLinkRow row;
  row.kind = JointKind::kRevolute;
  row.theta0 = 0.0;
  row.alpha = alpha;
  row.a = a;
  row.d = d;
  row.bounds = LinkBounds{btheta, balpha, bd, ba};
  row.limits = JointLimits{lim_lo, lim_hi};
  return row;
}

}  // namespace detail

/// Planar 2R arm: a1 = a2 = 1 +- 0.2 m, d = 0 +- 0.1 m, alpha = 0 +- 0.1 rad,
/// joints in [-3, 3] rad.
inline RobotConfig planar2_robot() {
  RobotConfig r;
  r.name = "planar2";
  r.rows.push_back(detail::revolute_row(0.0, 0.1, 1.0, 0.2, 0.0, 0.1, 0.0, -3.0, 3.0));
  r.rows.push_back(detail::revolute_row(0.0, 0.1, 1.0, 0.2, 0.0, 0.1, 0.0, -3.0, 3.0));
  return r;
}

/// 7-DOF Barrett WAM. Joint limits are the manufacturer's; the DH rows carry
/// the tested uncertainty bounds.
inline RobotConfig wam7_robot() {
  const double hp = kPi / 2.0;
  RobotConfig r;
  r.name = "wam7";
  r.rows.push_back(detail::revolute_row(0.0, 0.01, 0.0, 0.01, -hp, 0.2, 0.0, -2.6, 2.6));
  r.rows.push_back(detail::revolute_row(0.0, 0.02, 0.0, 0.03, hp, 0.2, 0.0, -2.0, 2.0));
  r.rows.push_back(detail::revolute_row(0.55, 0.2, 0.045, 0.01, -hp, 0.3, 0.0, -2.8, 2.8));
  r.rows.push_back(detail::revolute_row(0.0, 0.03, -0.045, 0.01, hp, 0.2, 0.0, -0.9, 3.1));
  r.rows.push_back(detail::revolute_row(0.3, 0.2, 0.0, 0.07, -hp, 0.1, 0.0, -4.76, 4.76));
  r.rows.push_back(detail::revolute_row(0.0, 0.04, 0.0, 0.1, hp, 0.1, 0.0, -1.6, 1.6));
  r.rows.push_back(detail::revolute_row(0.06, 0.06, 0.0, 0.01, 0.0, 0.3, 0.0, -3.0, 3.0));
  return r;
}

/// 6-DOF lander sampling arm. Joint limits default to a full revolution.
inline RobotConfig lander6_robot() {
  const double hp = kPi / 2.0;
  RobotConfig r;
  r.name = "lander6";
  r.rows.push_back(detail::revolute_row(0.0, 0.01, 0.16, 0.1, hp, 0.2, 0.0, -kPi, kPi));
  r.rows.push_back(detail::revolute_row(0.0, 0.02, 0.37, 0.1, 0.0, 0.2, 0.0, -kPi, kPi));
  r.rows.push_back(detail::revolute_row(0.0, 0.06, 0.05, 0.02, kPi, 0.3, 0.0, -kPi, kPi));
  r.rows.push_back(detail::revolute_row(-0.15, 0.01, 0.463, 0.1, 0.0, 0.2, 0.0, -kPi, kPi));
  r.rows.push_back(detail::revolute_row(0.0, 0.04, -0.238, 0.1, 0.0, 0.1, 0.0, -kPi, kPi));
  r.rows.push_back(detail::revolute_row(0.0, 0.06, 0.225, 0.02, hp, 0.1, 0.0, -kPi, kPi));
  return r;
}

inline RobotConfig builtin_robot(const std::string& name) {
  if (name == "planar2") return planar2_robot();
  if (name == "wam7") return wam7_robot();
  if (name == "lander6") return lander6_robot();
  throw ConfigError("unknown built-in robot '" + name +
                    "' (expected planar2, wam7, or lander6)");
}

}  // namespace kincal

#endif  // KINCAL_ROBOTS_HPP
