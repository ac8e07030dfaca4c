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

#ifndef KINCAL_RUN_RECORD_HPP
#define KINCAL_RUN_RECORD_HPP

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "kincal/gp.hpp"
#include "kincal/residual_model.hpp"

namespace kincal {

struct IterationRow {
  int t = 0;
  Eigen::VectorXd chosen_q;
  double err_norm = 0.0;     // ||residual|| at the chosen pose, noise included
  double best_so_far = 0.0;  // running minimum of err_norm
  double wall_ms = 0.0;      // in-memory only; excluded from persisted output
};

/// Serializable view of a fitted residual model: shared inputs, per-axis
/// targets and hyperparameters.
struct ModelSnapshot {
  Eigen::MatrixXd inputs;   // N x dof
  Eigen::MatrixXd targets;  // N x 7
  std::array<Hyperparams, 7> hyper;
};

/// One calibration campaign: every chosen pose, the per-iteration error
/// norms, the held-out metrics, and the final model.
struct RunRecord {
  std::string config_hash;
  std::string strategy;
  std::uint64_t seed = 0;
  std::vector<IterationRow> rows;
  HoldoutMetrics holdout;
  ModelSnapshot snapshot;
};

inline ModelSnapshot snapshot_model(const ResidualModel& model) {
  ModelSnapshot snap;
  const int n = model.n_observations();
  if (n > 0) {
    const int dim = static_cast<int>(model.history()[0].first.size());
    snap.inputs.resize(n, dim);
    snap.targets.resize(n, 7);
    for (int i = 0; i < n; ++i) {
      snap.inputs.row(i) = model.history()[i].first.transpose();
      snap.targets.row(i) = model.history()[i].second.transpose();
    }
  }
  snap.hyper = model.axis_hyper();
  return snap;
}

}  // namespace kincal

#endif  // KINCAL_RUN_RECORD_HPP
