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

#ifndef KINCAL_POOL_HPP
#define KINCAL_POOL_HPP

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "kincal/common.hpp"
#include "kincal/kinematics.hpp"
#include "kincal/rng.hpp"

namespace kincal {

/// Discrete candidate set of joint configurations, all within joint limits.
/// Acquisition strategies take their argmax over this pool.
struct CandidatePool {
  Eigen::MatrixXd points;  // M x dof
  std::string generation;

  int size() const { return static_cast<int>(points.rows()); }

  void validate(const DHTable& table) const {
    if (points.rows() == 0) throw DomainError("CandidatePool: empty");
    for (int i = 0; i < points.rows(); ++i)
      if (!table.within_limits(points.row(i).transpose()))
        throw DomainError("CandidatePool: point " + std::to_string(i) +
                          " outside joint limits");
  }
};

/// Regular grid, res points per joint, limits included. Last joint varies
/// fastest.
inline CandidatePool make_grid_pool(const DHTable& table, int res_per_dim) {
  if (res_per_dim < 2) throw DomainError("make_grid_pool: resolution must be >= 2");
  const int n = table.dof();
  int total = 1;
  for (int k = 0; k < n; ++k) total *= res_per_dim;

  CandidatePool pool;
  pool.generation = "grid(" + std::to_string(res_per_dim) + ")";
  pool.points.resize(total, n);
  for (int i = 0; i < total; ++i) {
    int rem = i;
    for (int k = n - 1; k >= 0; --k) {
      const int idx = rem % res_per_dim;
      rem /= res_per_dim;
      const JointLimits& lim = table.joint_limits[k];
      pool.points(i, k) =
          lim.lo + (lim.hi - lim.lo) * idx / static_cast<double>(res_per_dim - 1);
    }
  }
  return pool;
}

/// Latin-hypercube sample of `count` points: per joint, one draw in each of
/// `count` strata, independently permuted across joints.
inline CandidatePool make_lhs_pool(const DHTable& table, int count,
                                   std::uint64_t seed) {
  if (count < 1) throw DomainError("make_lhs_pool: count must be >= 1");
  const int n = table.dof();
  Rng rng(mix_seed(seed, 0x6c6873ULL));

  CandidatePool pool;
  pool.generation = "latin-hypercube(" + std::to_string(count) + ")";
  pool.points.resize(count, n);
  std::vector<int> perm(count);
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < count; ++j) perm[j] = j;
    for (int j = count - 1; j > 0; --j) {
      const int swap_with = static_cast<int>(
          rng.uniform_index(static_cast<std::uint64_t>(j) + 1));
      std::swap(perm[j], perm[swap_with]);
    }
    const JointLimits& lim = table.joint_limits[k];
    for (int j = 0; j < count; ++j) {
      const double u = (perm[j] + rng.uniform()) / static_cast<double>(count);
      pool.points(j, k) = lim.lo + (lim.hi - lim.lo) * u;
    }
  }
  return pool;
}

/// Joint-space line segment, `count` points linearly spaced from `from` to
/// `to` inclusive; the default held-out evaluation path.
inline Eigen::MatrixXd line_path(const Eigen::VectorXd& from,
                                 const Eigen::VectorXd& to, int count) {
  if (count < 2) throw DomainError("line_path: count must be >= 2");
  if (from.size() != to.size()) throw DomainError("line_path: endpoint mismatch");
  Eigen::MatrixXd pts(count, from.size());
  for (int i = 0; i < count; ++i) {
    const double u = i / static_cast<double>(count - 1);
    pts.row(i) = ((1.0 - u) * from + u * to).transpose();
  }
  return pts;
}

}  // namespace kincal

#endif  // KINCAL_POOL_HPP
