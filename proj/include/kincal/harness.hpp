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
// Experiment orchestration: the strategy x seed grid, per-run persistence
// (CSV + JSON, byte-stable), aggregate curves, the perturbation-level sweep,
// and residual histograms.

#ifndef KINCAL_HARNESS_HPP
#define KINCAL_HARNESS_HPP

#include <json.hpp>

#include <array>
#include <atomic>
#include <filesystem>
#include <functional>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "kincal/acquisition.hpp"
#include "kincal/config.hpp"
#include "kincal/io_util.hpp"
#include "kincal/linearized.hpp"
#include "kincal/stats.hpp"

namespace kincal {

struct RunOutcome {
  Strategy strategy = Strategy::kGpUcb;
  std::uint64_t seed = 0;
  RunRecord record;
  bool failed = false;
  std::string error;
};

namespace detail {

inline std::string run_tag(Strategy strategy, std::uint64_t seed) {
  return strategy_name(strategy) + "_s" + std::to_string(seed);
}

}  // namespace detail

/// One campaign of the grid; shared by run_experiment, the sweep, and the
/// CLI `calibrate` command.
inline RunOutcome run_single(const ExperimentConfig& cfg, Strategy strategy,
                             std::uint64_t seed, const CandidatePool& pool) {
  RunOutcome outcome;
  outcome.strategy = strategy;
  outcome.seed = seed;
  try {
    const DHTable table = cfg.table();
    TrueArm arm = realize(table, cfg.perturbation, cfg.measurement, seed);
    outcome.record = run_campaign(arm, table, pool, strategy, cfg.budget, seed,
                                  cfg.campaign_options());
  } catch (const std::exception& e) {
    outcome.failed = true;
    outcome.error = e.what();
  }
  return outcome;
}

/// Run the full strategy x seed cross product. Failures are isolated into
/// their outcome slot; other runs proceed. `on_complete`, when given, fires
/// once per finished run (serialized) so records can be persisted as they
/// complete. Outcomes come back in grid order regardless of worker count.
inline std::vector<RunOutcome> run_experiment(
    const ExperimentConfig& cfg,
    const std::function<void(const RunOutcome&)>& on_complete = nullptr) {
  cfg.validate();
  const DHTable table = cfg.table();
  const CandidatePool pool = cfg.pool.build(table);
  pool.validate(table);

  struct Job {
    Strategy strategy;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (Strategy s : cfg.strategies)
    for (std::uint64_t seed : cfg.seeds) jobs.push_back(Job{s, seed});

  std::vector<RunOutcome> outcomes(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex complete_mutex;

  const auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      outcomes[i] = run_single(cfg, jobs[i].strategy, jobs[i].seed, pool);
      if (on_complete) {
        std::lock_guard<std::mutex> lock(complete_mutex);
        on_complete(outcomes[i]);
      }
    }
  };

  const int n_workers =
      std::min<int>(cfg.workers, static_cast<int>(jobs.size()));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(n_workers);
    for (int i = 0; i < n_workers; ++i) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
  }
  return outcomes;
}

// ---------------------------------------------------------------------------
// Persistence. CSV headers are fixed interface:
//   curves:  t,chosen_q1..chosen_qN,err_norm,best_so_far
//   holdout: idx,q1..qN,err_uncal,err_cal,eq_w,eq_x,eq_y,eq_z,ep_x,ep_y,ep_z
// Wall-clock times stay in memory only, so reruns are byte-identical.
// ---------------------------------------------------------------------------

inline std::string curve_csv(const RunRecord& record) {
  std::ostringstream out;
  const int dof =
      record.rows.empty() ? 0 : static_cast<int>(record.rows[0].chosen_q.size());
  out << "t";
  for (int k = 1; k <= dof; ++k) out << ",chosen_q" << k;
  out << ",err_norm,best_so_far\n";
  for (const IterationRow& row : record.rows) {
    out << row.t;
    for (int k = 0; k < dof; ++k) out << "," << format_double(row.chosen_q[k]);
    out << "," << format_double(row.err_norm) << ","
        << format_double(row.best_so_far) << "\n";
  }
  return out.str();
}

inline std::string holdout_csv(const RunRecord& record) {
  std::ostringstream out;
  const int dof = static_cast<int>(record.holdout.points.cols());
  out << "idx";
  for (int k = 1; k <= dof; ++k) out << ",q" << k;
  out << ",err_uncal,err_cal,eq_w,eq_x,eq_y,eq_z,ep_x,ep_y,ep_z\n";
  for (int i = 0; i < record.holdout.points.rows(); ++i) {
    out << i;
    for (int k = 0; k < dof; ++k)
      out << "," << format_double(record.holdout.points(i, k));
    out << "," << format_double(record.holdout.err_uncal[i]) << ","
        << format_double(record.holdout.err_cal[i]);
    for (int k = 0; k < 7; ++k)
      out << "," << format_double(record.holdout.axis_err(i, k));
    out << "\n";
  }
  return out.str();
}

inline nlohmann::json hyper_to_json(const Hyperparams& h) {
  nlohmann::json j;
  j["lengthscale"] = std::vector<double>(
      h.lengthscale.data(), h.lengthscale.data() + h.lengthscale.size());
  j["signal_std"] = h.signal_std;
  j["kernel_noise_std"] = h.kernel_noise_std;
  j["obs_noise_std"] = h.obs_noise_std;
  return j;
}

inline nlohmann::json record_to_json(const RunRecord& record) {
  using nlohmann::json;
  json j;
  j["schema_version"] = 1;
  j["config_hash"] = record.config_hash;
  j["strategy"] = record.strategy;
  j["seed"] = record.seed;

  json iterations = json::array();
  for (const IterationRow& row : record.rows) {
    json r;
    r["t"] = row.t;
    r["q"] = std::vector<double>(row.chosen_q.data(),
                                 row.chosen_q.data() + row.chosen_q.size());
    r["err_norm"] = row.err_norm;
    r["best_so_far"] = row.best_so_far;
    iterations.push_back(r);
  }
  j["iterations"] = iterations;

  json holdout = json::array();
  for (int i = 0; i < record.holdout.points.rows(); ++i) {
    json h;
    h["idx"] = i;
    h["q"] = std::vector<double>(
        record.holdout.points.row(i).data(),
        record.holdout.points.row(i).data() + record.holdout.points.cols());
    h["err_uncal"] = record.holdout.err_uncal[i];
    h["err_cal"] = record.holdout.err_cal[i];
    std::vector<double> axis(7);
    for (int k = 0; k < 7; ++k) axis[k] = record.holdout.axis_err(i, k);
    h["axis_err"] = axis;
    holdout.push_back(h);
  }
  j["holdout"] = holdout;
  j["holdout_median_uncal"] = record.holdout.median_uncal;
  j["holdout_median_cal"] = record.holdout.median_cal;

  json model;
  json inputs = json::array();
  json targets = json::array();
  for (int i = 0; i < record.snapshot.inputs.rows(); ++i) {
    inputs.push_back(std::vector<double>(
        record.snapshot.inputs.row(i).data(),
        record.snapshot.inputs.row(i).data() + record.snapshot.inputs.cols()));
    targets.push_back(std::vector<double>(
        record.snapshot.targets.row(i).data(),
        record.snapshot.targets.row(i).data() + 7));
  }
  model["inputs"] = inputs;
  model["targets"] = targets;
  json hyper = json::array();
  for (const Hyperparams& h : record.snapshot.hyper)
    hyper.push_back(hyper_to_json(h));
  model["hyper"] = hyper;
  j["model"] = model;
  return j;
}

/// Write one run's curve CSV, holdout CSV, and JSON record.
inline void persist_run(const RunOutcome& outcome,
                        const std::filesystem::path& dir) {
  const std::string tag = detail::run_tag(outcome.strategy, outcome.seed);
  if (outcome.failed) {
    write_file_atomic(dir / ("failed_" + tag + ".txt"), outcome.error + "\n");
    return;
  }
  write_file_atomic(dir / ("curve_" + tag + ".csv"), curve_csv(outcome.record));
  write_file_atomic(dir / ("holdout_" + tag + ".csv"),
                    holdout_csv(outcome.record));
  write_file_atomic(dir / ("run_" + tag + ".json"),
                    record_to_json(outcome.record).dump(2) + "\n");
}

/// Pointwise median/quartile curves per strategy across seeds.
inline std::string aggregate_csv(const std::vector<const RunRecord*>& records) {
  std::ostringstream out;
  out << "t,err_median,err_q25,err_q75,best_median,best_q25,best_q75\n";
  if (records.empty()) return out.str();
  const std::size_t budget = records[0]->rows.size();
  for (std::size_t t = 0; t < budget; ++t) {
    std::vector<double> errs, bests;
    for (const RunRecord* r : records) {
      if (t < r->rows.size()) {
        errs.push_back(r->rows[t].err_norm);
        bests.push_back(r->rows[t].best_so_far);
      }
    }
    out << (t + 1) << "," << format_double(median(errs)) << ","
        << format_double(quantile(errs, 0.25)) << ","
        << format_double(quantile(errs, 0.75)) << ","
        << format_double(median(bests)) << ","
        << format_double(quantile(bests, 0.25)) << ","
        << format_double(quantile(bests, 0.75)) << "\n";
  }
  return out.str();
}

/// Persist every run plus per-strategy aggregate curves. Idempotent: a rerun
/// over the same records yields byte-identical files.
inline void emit_outputs(const std::vector<RunOutcome>& outcomes,
                         const std::filesystem::path& dir) {
  if (outcomes.empty()) throw DomainError("emit_outputs: no records");
  for (const RunOutcome& outcome : outcomes) persist_run(outcome, dir);

  std::vector<std::string> strategy_order;
  for (const RunOutcome& outcome : outcomes) {
    const std::string name = strategy_name(outcome.strategy);
    bool seen = false;
    for (const std::string& s : strategy_order) seen = seen || s == name;
    if (!seen) strategy_order.push_back(name);
  }
  for (const std::string& name : strategy_order) {
    std::vector<const RunRecord*> records;
    for (const RunOutcome& outcome : outcomes)
      if (!outcome.failed && strategy_name(outcome.strategy) == name)
        records.push_back(&outcome.record);
    if (!records.empty())
      write_file_atomic(dir / ("aggregate_" + name + ".csv"),
                        aggregate_csv(records));
  }
}

// ---------------------------------------------------------------------------
// Perturbation sweep (GP-UCB vs the linearized baseline across uncertainty
// levels) and the pre-calibration residual histogram.
// ---------------------------------------------------------------------------

struct SweepRow {
  double level = 0.0;      // percent of the uncertainty bounds
  std::string method;      // "gp-ucb" or "linearized"
  std::uint64_t seed = 0;
  double median_err = 0.0;  // median held-out pose error norm
};

namespace detail {

/// Distinct random pool rows; the measurement set handed to the baseline.
inline std::vector<int> sample_pool_indices(const CandidatePool& pool, int m,
                                            std::uint64_t seed) {
  if (m > pool.size())
    throw DomainError("sweep: budget exceeds pool size");
  Rng rng(mix_seed(seed, 0x6c696e706fULL));
  std::vector<int> indices(pool.size());
  for (int i = 0; i < pool.size(); ++i) indices[i] = i;
  for (int i = 0; i < m; ++i) {
    const int j = i + static_cast<int>(rng.uniform_index(pool.size() - i));
    std::swap(indices[i], indices[j]);
  }
  indices.resize(m);
  return indices;
}

inline double linearized_holdout_median(const TrueArm& arm,
                                        const DHTable& nominal,
                                        const Eigen::VectorXd& phi_star,
                                        const Eigen::MatrixXd& holdout_points) {
  const DHTable corrected = with_phi(nominal, phi_star);
  std::vector<double> errs;
  errs.reserve(holdout_points.rows());
  for (int i = 0; i < holdout_points.rows(); ++i) {
    const Eigen::VectorXd q = holdout_points.row(i).transpose();
    const Pose7 truth = arm.true_pose(q);
    const Pose7 predicted = forward_kinematics(corrected, q);
    Vec7 d;
    d.head<4>() = align_hemisphere(truth.quat, predicted.quat) - predicted.quat;
    d.tail<3>() = truth.pos - predicted.pos;
    errs.push_back(d.norm());
  }
  return median(std::move(errs));
}

}  // namespace detail

/// Run the linearized baseline once: `budget` random pool poses, measured
/// with the arm's noise model, box bounds scaled like the perturbation.
inline CalibrationResult run_linearized_baseline(
    const ExperimentConfig& cfg, TrueArm& arm, const CandidatePool& pool,
    std::uint64_t seed, double bound_scale = 1.0) {
  const DHTable table = cfg.table();
  const std::vector<int> indices =
      detail::sample_pool_indices(pool, cfg.budget, seed);
  std::vector<std::pair<Eigen::VectorXd, Pose7>> measurements;
  measurements.reserve(indices.size());
  for (int idx : indices) {
    const Eigen::VectorXd q = pool.points.row(idx).transpose();
    measurements.emplace_back(q, arm.measure(q));
  }

  const int n = table.dof();
  Eigen::VectorXd ub(3 * n);
  for (int i = 0; i < n; ++i) {
    const LinkBounds& b = cfg.robot.rows[i].bounds;
    ub[3 * i + 0] = bound_scale * b.alpha;
    ub[3 * i + 1] = bound_scale * b.d;
    ub[3 * i + 2] = bound_scale * b.a;
  }
  return calibrate_linearized(table, measurements, -ub, ub);
}

/// Fig-3a style sweep: for each perturbation level, GP-UCB and the
/// linearized baseline at the same measurement budget, one row per
/// (level, method, seed) with the per-seed median held-out error.
inline std::vector<SweepRow> sweep_perturbation(const ExperimentConfig& cfg,
                                                const std::vector<double>& levels) {
  if (levels.empty()) throw DomainError("sweep_perturbation: no levels");
  cfg.validate();
  const DHTable table = cfg.table();
  const CandidatePool pool = cfg.pool.build(table);
  const Eigen::MatrixXd holdout_points = cfg.holdout.build(table);

  std::vector<SweepRow> rows;
  for (double level : levels) {
    ExperimentConfig level_cfg = cfg;
    level_cfg.perturbation = PerturbationSpec::scaled(cfg.robot.bounds(), level);
    level_cfg.perturbation.additive = cfg.perturbation.additive;

    for (std::uint64_t seed : cfg.seeds) {
      const RunOutcome ucb =
          run_single(level_cfg, Strategy::kGpUcb, seed, pool);
      if (ucb.failed) throw Error("sweep gp-ucb failed: " + ucb.error);
      rows.push_back(SweepRow{level, "gp-ucb", seed,
                              ucb.record.holdout.median_cal});

      TrueArm arm =
          realize(table, level_cfg.perturbation, level_cfg.measurement, seed);
      const CalibrationResult result =
          run_linearized_baseline(level_cfg, arm, pool, seed, level / 100.0);
      rows.push_back(SweepRow{
          level, "linearized", seed,
          detail::linearized_holdout_median(arm, table, result.phi_star,
                                            holdout_points)});
    }
  }
  return rows;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "level,method,seed,median_err\n";
  for (const SweepRow& row : rows)
    out << format_double(row.level) << "," << row.method << "," << row.seed
        << "," << format_double(row.median_err) << "\n";
  return out.str();
}

struct AxisHistogram {
  Eigen::VectorXd edges;   // bins + 1 edges, fixed by config, data-independent
  Eigen::VectorXi counts;  // out-of-range samples land in the edge bins
  Moments stats;
};

struct HistogramData {
  std::array<AxisHistogram, 7> axes;
  int samples = 0;
};

namespace detail {

/// Data-independent position-axis range: reachable displacement bound from
/// the uncertainty bounds (length/offset bounds plus angular bounds times a
/// reach estimate).
inline double auto_pos_range(const RobotConfig& robot) {
  double reach = 1.0;
  double range = 0.0;
  for (const RobotLinkRow& row : robot.rows)
    reach += std::abs(row.a) + std::abs(row.d);
  for (const RobotLinkRow& row : robot.rows)
    range += row.bounds.a + row.bounds.d +
             (row.bounds.alpha + row.bounds.theta) * reach;
  return range > 0.0 ? range : 1.0;
}

}  // namespace detail

/// Residual samples over pool points, binned per axis with fixed edges, plus
/// sample moments. The measurement model's noise applies as configured.
inline HistogramData residual_histogram(const ExperimentConfig& cfg,
                                        int n_samples) {
  if (n_samples < 100)
    throw DomainError("residual_histogram: need at least 100 samples");
  cfg.validate();
  const DHTable table = cfg.table();
  TrueArm arm = realize(table, cfg.perturbation, cfg.measurement, cfg.seeds[0]);
  const CandidatePool pool = make_lhs_pool(table, n_samples, cfg.pool.seed);

  Eigen::MatrixXd samples(n_samples, 7);
  for (int i = 0; i < n_samples; ++i)
    samples.row(i) =
        residual(arm, table, pool.points.row(i).transpose()).transpose();

  const double pos_range = cfg.histogram.pos_range > 0.0
                               ? cfg.histogram.pos_range
                               : detail::auto_pos_range(cfg.robot);
  HistogramData data;
  data.samples = n_samples;
  for (int axis = 0; axis < 7; ++axis) {
    AxisHistogram& h = data.axes[axis];
    const double r = axis < 4 ? cfg.histogram.quat_range : pos_range;
    const int bins = cfg.histogram.bins;
    h.edges.resize(bins + 1);
    for (int k = 0; k <= bins; ++k)
      h.edges[k] = -r + 2.0 * r * k / static_cast<double>(bins);
    h.counts = Eigen::VectorXi::Zero(bins);
    std::vector<double> axis_samples(n_samples);
    for (int i = 0; i < n_samples; ++i) {
      const double x = samples(i, axis);
      axis_samples[i] = x;
      int bin = static_cast<int>(std::floor((x + r) / (2.0 * r) * bins));
      bin = std::clamp(bin, 0, bins - 1);
      h.counts[bin] += 1;
    }
    h.stats = moments(axis_samples);
  }
  return data;
}

inline std::string histogram_csv(const HistogramData& data) {
  static const char* kAxisNames[7] = {"qw", "qx", "qy", "qz", "px", "py", "pz"};
  std::ostringstream out;
  out << "axis,bin_lo,bin_hi,count\n";
  for (int axis = 0; axis < 7; ++axis) {
    const AxisHistogram& h = data.axes[axis];
    for (int k = 0; k < h.counts.size(); ++k)
      out << kAxisNames[axis] << "," << format_double(h.edges[k]) << ","
          << format_double(h.edges[k + 1]) << "," << h.counts[k] << "\n";
  }
  return out.str();
}

inline std::string histogram_moments_csv(const HistogramData& data) {
  static const char* kAxisNames[7] = {"qw", "qx", "qy", "qz", "px", "py", "pz"};
  std::ostringstream out;
  out << "axis,mean,std,skewness,excess_kurtosis\n";
  for (int axis = 0; axis < 7; ++axis) {
    const Moments& m = data.axes[axis].stats;
    out << kAxisNames[axis] << "," << format_double(m.mean) << ","
        << format_double(m.std) << "," << format_double(m.skewness) << ","
        << format_double(m.excess_kurtosis) << "\n";
  }
  return out.str();
}

}  // namespace kincal

#endif  // KINCAL_HARNESS_HPP
