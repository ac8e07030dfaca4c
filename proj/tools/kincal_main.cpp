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
// Command-line front end: pose queries, offline GP fits, calibration
// campaigns, strategy comparisons, perturbation sweeps, and residual
// histograms. Exit codes: 0 success, 1 config error, 2 run failure.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "kincal/kincal.hpp"

namespace {

using namespace kincal;

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    try {
      values.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("cannot parse number '" + item + "'");
    }
  }
  return values;
}

ExperimentConfig load_with_overrides(const std::string& config_path,
                                     std::int64_t seed, int budget,
                                     const std::string& strategy,
                                     const std::string& out_dir) {
  ExperimentConfig cfg = load_config(config_path);
  if (seed >= 0) cfg.seeds = {static_cast<std::uint64_t>(seed)};
  if (budget > 0) cfg.budget = budget;
  if (!strategy.empty()) cfg.strategies = {parse_strategy(strategy)};
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  cfg.validate();
  return cfg;
}

int cmd_fk(const std::string& robot_name, const std::string& config_path,
           const std::string& q_text) {
  RobotConfig robot;
  if (!config_path.empty())
    robot = load_config(config_path).robot;
  else
    robot = builtin_robot(robot_name.empty() ? "planar2" : robot_name);
  const DHTable table = robot.table();

  const std::vector<double> q_values = parse_number_list(q_text);
  if (static_cast<int>(q_values.size()) != table.dof())
    throw ConfigError("fk: expected " + std::to_string(table.dof()) +
                      " joint values");
  Eigen::VectorXd q(q_values.size());
  for (std::size_t i = 0; i < q_values.size(); ++i) q[i] = q_values[i];

  const Pose7 pose = forward_kinematics(table, q);
  std::cout << "robot: " << robot.name << "\n"
            << "quat (w,x,y,z): " << format_double(pose.quat[0]) << " "
            << format_double(pose.quat[1]) << " " << format_double(pose.quat[2])
            << " " << format_double(pose.quat[3]) << "\n"
            << "pos (x,y,z) [m]: " << format_double(pose.pos[0]) << " "
            << format_double(pose.pos[1]) << " " << format_double(pose.pos[2])
            << "\n";
  return 0;
}

int cmd_fit_gp(const std::string& input_path, const std::string& out_path,
               std::int64_t seed) {
  const std::string text = read_file(input_path);
  std::stringstream stream(text);
  std::string line;
  if (!std::getline(stream, line))
    throw ConfigError(input_path + ": empty file");
  const std::size_t n_cols = parse_number_list(
                                 [&line] {
                                   std::string probe = line;
                                   for (char& c : probe)
                                     if (!(std::isdigit(c) || c == ',' ||
                                           c == '.' || c == '-' || c == '+' ||
                                           c == 'e' || c == 'E'))
                                       c = '0';
                                   return probe;
                                 }())
                                 .size();
  if (n_cols < 8)
    throw ConfigError(input_path + ": need n joint columns plus 7 residual columns");
  const int dim = static_cast<int>(n_cols) - 7;

  std::vector<std::vector<double>> rows;
  while (std::getline(stream, line)) {
    if (line.empty()) continue;
    const std::vector<double> row = parse_number_list(line);
    if (row.size() != n_cols)
      throw ConfigError(input_path + ": ragged row with " +
                        std::to_string(row.size()) + " columns");
    rows.push_back(row);
  }
  if (rows.empty()) throw ConfigError(input_path + ": no data rows");

  Eigen::MatrixXd inputs(rows.size(), dim);
  Eigen::MatrixXd targets(rows.size(), 7);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int k = 0; k < dim; ++k) inputs(i, k) = rows[i][k];
    for (int k = 0; k < 7; ++k) targets(i, k) = rows[i][dim + k];
  }

  static const char* kAxisNames[7] = {"qw", "qx", "qy", "qz", "px", "py", "pz"};
  nlohmann::json out;
  out["n"] = rows.size();
  out["dim"] = dim;
  nlohmann::json axes = nlohmann::json::array();
  for (int axis = 0; axis < 7; ++axis) {
    TrainingSet data{inputs, targets.col(axis)};
    const Hyperparams init = Hyperparams::isotropic(1.0, 0.1, 0.0, 1e-3);
    const OptimizeResult result = optimize_hyper(
        data, init, 8, seed >= 0 ? static_cast<std::uint64_t>(seed) : 1);
    nlohmann::json a;
    a["axis"] = kAxisNames[axis];
    a["hyper"] = hyper_to_json(result.hyper);
    a["nlml"] = result.nlml;
    a["fell_back"] = result.fell_back;
    axes.push_back(a);
  }
  out["axes"] = axes;

  const std::string dump = out.dump(2) + "\n";
  if (out_path.empty())
    std::cout << dump;
  else
    write_file_atomic(out_path, dump);
  return 0;
}

int cmd_calibrate(const ExperimentConfig& cfg) {
  const std::filesystem::path dir = cfg.output_dir;
  const std::vector<RunOutcome> outcomes =
      run_experiment(cfg, [&dir](const RunOutcome& o) { persist_run(o, dir); });
  emit_outputs(outcomes, dir);

  int failures = 0;
  for (const RunOutcome& o : outcomes) {
    if (o.failed) {
      ++failures;
      std::cerr << "run " << strategy_name(o.strategy) << " seed " << o.seed
                << " failed: " << o.error << "\n";
      continue;
    }
    std::cout << strategy_name(o.strategy) << " seed " << o.seed
              << ": holdout median uncal="
              << format_double(o.record.holdout.median_uncal)
              << " cal=" << format_double(o.record.holdout.median_cal) << "\n";
  }
  std::cout << "outputs written to " << dir.string() << "\n";
  return failures == 0 ? 0 : 2;
}

int cmd_sweep(const ExperimentConfig& cfg, const std::string& levels_text) {
  std::vector<double> levels = cfg.sweep_levels;
  if (!levels_text.empty()) levels = parse_number_list(levels_text);
  const std::vector<SweepRow> rows = sweep_perturbation(cfg, levels);
  const std::filesystem::path path =
      std::filesystem::path(cfg.output_dir) / "sweep.csv";
  write_file_atomic(path, sweep_csv(rows));
  std::cout << sweep_csv(rows) << "written to " << path.string() << "\n";
  return 0;
}

int cmd_histogram(const ExperimentConfig& cfg, int samples) {
  const HistogramData data =
      residual_histogram(cfg, samples > 0 ? samples : cfg.histogram.samples);
  const std::filesystem::path dir = cfg.output_dir;
  write_file_atomic(dir / "histogram.csv", histogram_csv(data));
  write_file_atomic(dir / "histogram_moments.csv", histogram_moments_csv(data));
  std::cout << histogram_moments_csv(data) << "written to "
            << (dir / "histogram.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GP-based kinematic calibration laboratory"};
  app.require_subcommand(1);

  std::string config_path, robot_name, q_text, strategy, out_dir, input_path,
      levels_text;
  std::int64_t seed = -1;
  int budget = 0, samples = 0;

  CLI::App* fk = app.add_subcommand("fk", "forward-kinematic pose query");
  fk->add_option("--robot", robot_name, "built-in robot name");
  fk->add_option("--config", config_path, "experiment config supplying the robot");
  fk->add_option("--q", q_text, "comma-separated joint values")->required();

  CLI::App* fit = app.add_subcommand("fit-gp", "offline 7-axis GP fit from a residual CSV");
  fit->add_option("--input", input_path, "CSV: q1..qn then 7 residual columns")
      ->required();
  fit->add_option("--out", out_dir, "output JSON path (default stdout)");
  fit->add_option("--seed", seed, "optimizer seed");

  CLI::App* cal = app.add_subcommand("calibrate", "run one calibration campaign");
  cal->add_option("--config", config_path, "experiment config")->required();
  cal->add_option("--seed", seed, "override: single seed");
  cal->add_option("--budget", budget, "override: measurement budget");
  cal->add_option("--strategy", strategy, "override: single strategy");
  cal->add_option("--out", out_dir, "override: output directory");

  CLI::App* cmp = app.add_subcommand("compare", "run the full strategy x seed grid");
  cmp->add_option("--config", config_path, "experiment config")->required();
  cmp->add_option("--budget", budget, "override: measurement budget");
  cmp->add_option("--out", out_dir, "override: output directory");

  CLI::App* sweep = app.add_subcommand("sweep", "perturbation-level sweep vs the linearized baseline");
  sweep->add_option("--config", config_path, "experiment config")->required();
  sweep->add_option("--levels", levels_text, "comma-separated percent levels");
  sweep->add_option("--out", out_dir, "override: output directory");

  CLI::App* hist = app.add_subcommand("histogram", "pre-calibration residual histogram");
  hist->add_option("--config", config_path, "experiment config")->required();
  hist->add_option("--samples", samples, "sample count (>= 100)");
  hist->add_option("--out", out_dir, "override: output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fk->parsed()) return cmd_fk(robot_name, config_path, q_text);
    if (fit->parsed()) return cmd_fit_gp(input_path, out_dir, seed);
    if (cal->parsed())
      return cmd_calibrate(
          load_with_overrides(config_path, seed, budget, strategy, out_dir));
    if (cmp->parsed())
      return cmd_calibrate(
          load_with_overrides(config_path, -1, budget, "", out_dir));
    if (sweep->parsed())
      return cmd_sweep(load_with_overrides(config_path, -1, 0, "", out_dir),
                       levels_text);
    if (hist->parsed())
      return cmd_histogram(load_with_overrides(config_path, -1, 0, "", out_dir),
                           samples);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
