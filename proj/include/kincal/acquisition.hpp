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
// Pool-based experiment design: summed GP-UCB, summed per-axis expected
// improvement, greedy D-optimal on the parameter Jacobian information
// matrix, and uniform random sampling, plus the campaign loop that drives
// select -> measure -> residual -> update.

#ifndef KINCAL_ACQUISITION_HPP
#define KINCAL_ACQUISITION_HPP

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "kincal/arm_model.hpp"
#include "kincal/common.hpp"
#include "kincal/kinematics.hpp"
#include "kincal/pool.hpp"
#include "kincal/residual_model.hpp"
#include "kincal/rng.hpp"
#include "kincal/run_record.hpp"

namespace kincal {

/// Iteration-varying exploration weight
///   beta_t = 2 log(t^2 2 pi^2 / (3 delta))
///          + 2 d log(t^2 d a b r sqrt(log(4 d / delta))).
struct BetaSchedule {
  double delta = 0.1;  // confidence parameter, in (0, 1)
  double dim = 1.0;    // input dimension d
  double a = 1.0;
  double b = 1.0;
  double r = 1.0;  // domain scale; defaults to the largest joint range

  void validate() const {
    if (!(delta > 0.0 && delta < 1.0))
      throw DomainError("BetaSchedule: delta must be in (0, 1)");
    if (!(dim > 0.0 && a > 0.0 && b > 0.0 && r > 0.0))
      throw DomainError("BetaSchedule: constants must be positive");
  }
};

inline double beta_t(const BetaSchedule& s, int t) {
  if (t < 1) throw DomainError("beta_t: t must be >= 1");
  const double t2 = static_cast<double>(t) * t;
  const double first = 2.0 * std::log(t2 * 2.0 * kPi * kPi / (3.0 * s.delta));
  const double inner =
      t2 * s.dim * s.a * s.b * s.r * std::sqrt(std::log(4.0 * s.dim / s.delta));
  return first + 2.0 * s.dim * std::log(inner);
}

enum class Strategy { kGpUcb, kExpectedImprovement, kDOptimal, kRandom };

inline std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kGpUcb: return "gp-ucb";
    case Strategy::kExpectedImprovement: return "ei";
    case Strategy::kDOptimal: return "d-optimal";
    case Strategy::kRandom: return "random";
  }
  throw DomainError("strategy_name: unknown strategy");
}

inline Strategy parse_strategy(const std::string& name) {
  if (name == "gp-ucb") return Strategy::kGpUcb;
  if (name == "ei") return Strategy::kExpectedImprovement;
  if (name == "d-optimal") return Strategy::kDOptimal;
  if (name == "random") return Strategy::kRandom;
  throw ConfigError("unknown strategy '" + name + "'");
}

struct AcquisitionOptions {
  /// Use the literal signed means in the UCB sum instead of |mean|.
  bool signed_mean = false;
  /// Random poses consumed by D-optimal before greedy selection starts.
  int d_optimal_seed_points = 10;
};

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi);
}
inline double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

/// Closed-form E[max(X - best, 0)] for X ~ N(mean, std^2).
inline double expected_improvement(double mean, double std_dev, double best) {
  if (std_dev <= 1e-15) return std::max(mean - best, 0.0);
  const double z = (mean - best) / std_dev;
  return (mean - best) * normal_cdf(z) + std_dev * normal_pdf(z);
}

/// Improvement of |X| over a non-negative incumbent; the two tail events are
/// disjoint, so the closed forms add.
inline double expected_abs_improvement(double mean, double std_dev, double best) {
  return expected_improvement(mean, std_dev, best) +
         expected_improvement(-mean, std_dev, best);
}

/// Summed UCB over the seven axis GPs. The mean enters as |mean| by default
/// (large residuals of either sign are worth sampling); `signed_mean`
/// reproduces the literal signed sum.
inline double ucb_utility(const ResidualModel& model, const Eigen::VectorXd& q,
                          double beta, bool signed_mean = false) {
  const AxisPrediction p = predict_residual(model, q);
  const double sqrt_beta = std::sqrt(std::max(beta, 0.0));
  double u = 0.0;
  for (int i = 0; i < 7; ++i) {
    const double mu = signed_mean ? p.mean[i] : std::abs(p.mean[i]);
    u += mu + sqrt_beta * p.std[i];
  }
  return u;
}

/// Per-strategy bookkeeping across one campaign: visited pool indices, the
/// sampler RNG stream, the EI incumbents, and the D-optimal information
/// matrix with cached parameter Jacobians.
class SamplerState {
 public:
  SamplerState(Strategy strategy, const CandidatePool& pool,
               const DHTable& nominal, std::uint64_t seed,
               AcquisitionOptions options = {})
      : strategy_(strategy),
        options_(options),
        nominal_(nominal),
        visited_(pool.size(), false),
        rng_(mix_seed(seed, 0x73616d70ULL)),
        ei_incumbent_(Vec7::Zero()) {
    if (strategy == Strategy::kDOptimal) {
      const int p = 3 * nominal.dof();
      info_ = 1e-12 * Eigen::MatrixXd::Identity(p, p);
      jtj_cache_.resize(pool.size());
    }
  }

  Strategy strategy() const { return strategy_; }
  int visited_count() const { return visited_count_; }
  bool visited(int idx) const { return visited_[idx]; }

  /// Record the measured residual for the previously selected pool index.
  void note_observation(int pool_index, const CandidatePool& pool,
                        const Vec7& residual_value) {
    ei_incumbent_ = ei_incumbent_.cwiseMax(residual_value.cwiseAbs());
    if (strategy_ == Strategy::kDOptimal) info_ += jtj_at(pool_index, pool);
  }

  const Vec7& ei_incumbent() const { return ei_incumbent_; }
  const Eigen::MatrixXd& information_matrix() const { return info_; }

  friend int select_next(SamplerState& state, const ResidualModel& model,
                         const CandidatePool& pool, int t,
                         const BetaSchedule& beta);

 private:
  const Eigen::MatrixXd& jtj_at(int idx, const CandidatePool& pool) {
    if (!jtj_cache_[idx]) {
      const Eigen::MatrixXd jac =
          parameter_jacobian(nominal_, pool.points.row(idx).transpose());
      jtj_cache_[idx] = Eigen::MatrixXd(jac.transpose() * jac);
    }
    return *jtj_cache_[idx];
  }

  void mark_visited(int idx) {
    visited_[idx] = true;
    ++visited_count_;
  }

  Strategy strategy_;
  AcquisitionOptions options_;
  DHTable nominal_;
  std::vector<bool> visited_;
  int visited_count_ = 0;
  Rng rng_;
  Vec7 ei_incumbent_;
  Eigen::MatrixXd info_;
  std::vector<std::optional<Eigen::MatrixXd>> jtj_cache_;
};

namespace detail {

/// Argmax with ties broken by the lowest pool index.
inline int argmax_by_pool_index(const std::vector<int>& candidates,
                                const Eigen::VectorXd& utilities) {
  int best = candidates[0];
  double best_u = utilities[0];
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (utilities[i] > best_u) {
      best_u = utilities[i];
      best = candidates[i];
    }
  }
  return best;
}

}  // namespace detail

/// Choose the next measurement pose from the unvisited pool. GP-UCB and EI
/// fall back to the lowest-index point while the model is empty (constant
/// prior utility); D-optimal spends its first selections on random poses.
inline int select_next(SamplerState& state, const ResidualModel& model,
                       const CandidatePool& pool, int t,
                       const BetaSchedule& beta) {
  std::vector<int> unvisited;
  unvisited.reserve(pool.size() - state.visited_count_);
  for (int i = 0; i < pool.size(); ++i)
    if (!state.visited_[i]) unvisited.push_back(i);
  if (unvisited.empty())
    throw PoolExhaustedError("select_next: candidate pool exhausted at t=" +
                             std::to_string(t));

  int chosen = unvisited[0];
  switch (state.strategy_) {
    case Strategy::kRandom: {
      chosen = unvisited[state.rng_.uniform_index(unvisited.size())];
      break;
    }
    case Strategy::kGpUcb: {
      if (model.n_observations() == 0) break;  // flat prior: lowest index
      Eigen::MatrixXd queries(unvisited.size(), pool.points.cols());
      for (std::size_t i = 0; i < unvisited.size(); ++i)
        queries.row(i) = pool.points.row(unvisited[i]);
      Eigen::MatrixXd means, stds;
      predict_residual_batch(model, queries, means, stds);
      const double sqrt_beta = std::sqrt(std::max(beta_t(beta, t), 0.0));
      Eigen::VectorXd utilities(unvisited.size());
      for (std::size_t i = 0; i < unvisited.size(); ++i) {
        double u = 0.0;
        for (int axis = 0; axis < 7; ++axis) {
          const double mu = state.options_.signed_mean
                                ? means(axis, i)
                                : std::abs(means(axis, i));
          u += mu + sqrt_beta * stds(axis, i);
        }
        utilities[i] = u;
      }
      chosen = detail::argmax_by_pool_index(unvisited, utilities);
      break;
    }
    case Strategy::kExpectedImprovement: {
      if (model.n_observations() == 0) break;
      Eigen::MatrixXd queries(unvisited.size(), pool.points.cols());
      for (std::size_t i = 0; i < unvisited.size(); ++i)
        queries.row(i) = pool.points.row(unvisited[i]);
      Eigen::MatrixXd means, stds;
      predict_residual_batch(model, queries, means, stds);
      Eigen::VectorXd utilities(unvisited.size());
      for (std::size_t i = 0; i < unvisited.size(); ++i) {
        double u = 0.0;
        for (int axis = 0; axis < 7; ++axis)
          u += expected_abs_improvement(means(axis, i), stds(axis, i),
                                        state.ei_incumbent_[axis]);
        utilities[i] = u;
      }
      chosen = detail::argmax_by_pool_index(unvisited, utilities);
      break;
    }
    case Strategy::kDOptimal: {
      if (state.visited_count_ < state.options_.d_optimal_seed_points) {
        chosen = unvisited[state.rng_.uniform_index(unvisited.size())];
        break;
      }
      Eigen::VectorXd utilities(unvisited.size());
      Eigen::MatrixXd trial(state.info_.rows(), state.info_.cols());
      Eigen::LLT<Eigen::MatrixXd> llt(state.info_.rows());
      for (std::size_t i = 0; i < unvisited.size(); ++i) {
        trial = state.info_ + state.jtj_at(unvisited[i], pool);
        llt.compute(trial);
        utilities[i] =
            llt.info() == Eigen::Success
                ? 2.0 * llt.matrixLLT().diagonal().array().log().sum()
                : -std::numeric_limits<double>::infinity();
      }
      chosen = detail::argmax_by_pool_index(unvisited, utilities);
      break;
    }
  }

  state.mark_visited(chosen);
  return chosen;
}

/// Everything a campaign needs beyond (arm, pool, strategy, budget, seed).
struct CampaignOptions {
  BetaSchedule beta;
  RefitPolicy refit;
  Hyperparams init_hyper = Hyperparams::isotropic(1.0, 0.1, 0.0, 1e-3);
  OptimizeOptions gp_options;
  AcquisitionOptions acquisition;
  Eigen::MatrixXd holdout_points;  // one row per held-out configuration
  std::string config_hash;
};

/// The calibration loop: select a pose, measure it, update the seven-GP
/// residual model, and score the result on the held-out set. Deterministic
/// in (arm state, pool, strategy, budget, seed).
inline RunRecord run_campaign(TrueArm& arm, const DHTable& nominal,
                              const CandidatePool& pool, Strategy strategy,
                              int budget, std::uint64_t seed,
                              const CampaignOptions& options) {
  if (budget < 1) throw DomainError("run_campaign: budget must be >= 1");
  options.beta.validate();
  if (beta_t(options.beta, 1) <= 0.0)
    throw DomainError("run_campaign: beta schedule is not positive at t=1");
  if (options.holdout_points.rows() == 0)
    throw DomainError("run_campaign: empty holdout set");

  RunRecord record;
  record.config_hash = options.config_hash;
  record.strategy = strategy_name(strategy);
  record.seed = seed;
  record.rows.reserve(budget);

  // one hemisphere reference per campaign keeps the GP targets a continuous
  // field over the working region
  const Eigen::Vector4d quat_ref = center_pose_reference(nominal);
  ResidualModel model(nominal, options.init_hyper, options.refit,
                      mix_seed(seed, 0x6d6f64656cULL), options.gp_options,
                      quat_ref);
  SamplerState state(strategy, pool, nominal, seed, options.acquisition);

  double best = std::numeric_limits<double>::infinity();
  for (int t = 1; t <= budget; ++t) {
    const auto started = std::chrono::steady_clock::now();
    try {
      const int idx = select_next(state, model, pool, t, options.beta);
      const Eigen::VectorXd q = pool.points.row(idx).transpose();
      const Vec7 res = residual(arm, nominal, q, quat_ref);
      state.note_observation(idx, pool, res);
      model = update(model, q, res);

      IterationRow row;
      row.t = t;
      row.chosen_q = q;
      row.err_norm = res.norm();
      best = std::min(best, row.err_norm);
      row.best_so_far = best;
      row.wall_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - started)
                        .count();
      record.rows.push_back(std::move(row));
    } catch (const Error& e) {
      throw Error("campaign iteration " + std::to_string(t) + " (" +
                  record.strategy + ", seed " + std::to_string(seed) +
                  "): " + e.what());
    }
  }

  record.holdout = holdout_error(model, arm, options.holdout_points);
  record.snapshot = snapshot_model(model);
  return record;
}

}  // namespace kincal

#endif  // KINCAL_ACQUISITION_HPP
