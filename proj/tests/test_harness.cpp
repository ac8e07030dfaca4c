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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "kincal/config.hpp"
#include "kincal/harness.hpp"
#include "kincal/robots.hpp"

using namespace kincal;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir =
      fs::temp_directory_path() / ("kincal_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

/// Minimal planar experiment config, parsed through the JSON front end so
/// the hash and defaults behave exactly as in production.
ExperimentConfig small_config(int budget, std::vector<int> seeds,
                              std::vector<std::string> strategies) {
  nlohmann::json j;
  j["robot"] = "planar2";
  j["perturbation"] = {{"mode", "scaled"}, {"percent", 100.0}};
  j["pool"] = {{"type", "grid"}, {"resolution", 8}};
  j["strategies"] = strategies;
  j["budget"] = budget;
  j["seeds"] = seeds;
  j["holdout"] = {{"count", 20}};
  j["refit"] = {{"period", 5}, {"warmup", 2}, {"restarts_initial", 2},
                {"restarts_refit", 1}};
  return config_from_json(j);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("built-in robots expose the published rows") {
  const RobotConfig wam = builtin_robot("wam7");
  REQUIRE(wam.rows.size() == 7);
  CHECK(wam.rows[2].d == Catch::Approx(0.55));
  CHECK(wam.rows[2].bounds.d == Catch::Approx(0.2));
  CHECK(wam.rows[3].a == Catch::Approx(-0.045));

  const RobotConfig lander = builtin_robot("lander6");
  REQUIRE(lander.rows.size() == 6);
  CHECK(lander.rows[3].a == Catch::Approx(0.463));
  CHECK(lander.rows[3].bounds.a == Catch::Approx(0.1));
  CHECK(lander.rows[2].alpha == Catch::Approx(kPi));

  CHECK_THROWS_AS(builtin_robot("nonsense"), ConfigError);
}

TEST_CASE("robot JSON round-trip is the identity for all built-ins") {
  for (const char* name : {"planar2", "wam7", "lander6"}) {
    const RobotConfig original = builtin_robot(name);
    const RobotConfig reloaded = robot_from_json(robot_to_json(original));
    REQUIRE(reloaded.rows.size() == original.rows.size());
    CHECK(reloaded.name == original.name);
    for (std::size_t i = 0; i < original.rows.size(); ++i) {
      CHECK(reloaded.rows[i].theta0 == original.rows[i].theta0);
      CHECK(reloaded.rows[i].alpha == original.rows[i].alpha);
      CHECK(reloaded.rows[i].a == original.rows[i].a);
      CHECK(reloaded.rows[i].d == original.rows[i].d);
      CHECK(reloaded.rows[i].bounds.theta == original.rows[i].bounds.theta);
      CHECK(reloaded.rows[i].bounds.alpha == original.rows[i].bounds.alpha);
      CHECK(reloaded.rows[i].bounds.a == original.rows[i].bounds.a);
      CHECK(reloaded.rows[i].bounds.d == original.rows[i].bounds.d);
      CHECK(reloaded.rows[i].limits.lo == original.rows[i].limits.lo);
      CHECK(reloaded.rows[i].limits.hi == original.rows[i].limits.hi);
    }
  }
}

TEST_CASE("config validation names the offending field") {
  nlohmann::json bad;
  bad["robot"] = "planar2";
  bad["no_such_key"] = 1;
  try {
    config_from_json(bad);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("no_such_key") != std::string::npos);
  }

  // negative bound inside an inline robot names the link
  nlohmann::json robot = robot_to_json(builtin_robot("planar2"));
  robot["links"][1]["bounds"]["a"] = -0.5;
  nlohmann::json cfg;
  cfg["robot"] = robot;
  try {
    config_from_json(cfg);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("link 2") != std::string::npos);
  }

  nlohmann::json empty_seeds;
  empty_seeds["robot"] = "planar2";
  empty_seeds["seeds"] = nlohmann::json::array();
  CHECK_THROWS_AS(config_from_json(empty_seeds), ConfigError);
}

TEST_CASE("load_config surfaces parse errors with the path") {
  const fs::path dir = scratch_dir("parse");
  const fs::path file = dir / "broken.json";
  std::ofstream(file) << "{ not json";
  try {
    load_config(file.string());
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("broken.json") != std::string::npos);
  }
}

TEST_CASE("run_experiment: single run with budget one") {
  const ExperimentConfig cfg = small_config(1, {7}, {"random"});
  const std::vector<RunOutcome> outcomes = run_experiment(cfg);
  REQUIRE(outcomes.size() == 1);
  CHECK_FALSE(outcomes[0].failed);
  CHECK(outcomes[0].record.rows.size() == 1);
  CHECK(outcomes[0].record.holdout.err_cal.size() == 20);
  CHECK(outcomes[0].record.config_hash == cfg.hash);
}

TEST_CASE("run_experiment covers the strategy x seed grid deterministically") {
  ExperimentConfig cfg =
      small_config(4, {1, 2}, {"gp-ucb", "ei", "d-optimal", "random"});
  const std::vector<RunOutcome> first = run_experiment(cfg);
  REQUIRE(first.size() == 8);

  cfg.workers = 4;  // worker count must not affect results
  const std::vector<RunOutcome> second = run_experiment(cfg);
  REQUIRE(second.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK_FALSE(first[i].failed);
    CHECK_FALSE(second[i].failed);
    CHECK(first[i].strategy == second[i].strategy);
    CHECK(first[i].seed == second[i].seed);
    REQUIRE(first[i].record.rows.size() == second[i].record.rows.size());
    for (std::size_t t = 0; t < first[i].record.rows.size(); ++t)
      CHECK(first[i].record.rows[t].err_norm ==
            second[i].record.rows[t].err_norm);
  }
}

TEST_CASE("emit_outputs writes stable bytes and the documented schemas") {
  const ExperimentConfig cfg = small_config(5, {3, 4}, {"gp-ucb", "random"});
  const std::vector<RunOutcome> outcomes = run_experiment(cfg);

  const fs::path dir_a = scratch_dir("emit_a");
  const fs::path dir_b = scratch_dir("emit_b");
  emit_outputs(outcomes, dir_a);
  emit_outputs(run_experiment(cfg), dir_b);

  std::vector<fs::path> files_a;
  for (const auto& entry : fs::directory_iterator(dir_a))
    files_a.push_back(entry.path().filename());
  REQUIRE_FALSE(files_a.empty());
  for (const fs::path& name : files_a)
    CHECK(slurp(dir_a / name) == slurp(dir_b / name));

  const std::string curve = slurp(dir_a / "curve_gp-ucb_s3.csv");
  CHECK(curve.rfind("t,chosen_q1,chosen_q2,err_norm,best_so_far\n", 0) == 0);
  CHECK(std::count(curve.begin(), curve.end(), '\n') == 6);  // header + 5 rows

  const std::string holdout = slurp(dir_a / "holdout_gp-ucb_s3.csv");
  CHECK(holdout.rfind(
            "idx,q1,q2,err_uncal,err_cal,eq_w,eq_x,eq_y,eq_z,ep_x,ep_y,ep_z\n",
            0) == 0);
  CHECK(std::count(holdout.begin(), holdout.end(), '\n') == 21);

  const nlohmann::json rec =
      nlohmann::json::parse(slurp(dir_a / "run_gp-ucb_s3.json"));
  CHECK(rec.at("schema_version") == 1);
  CHECK(rec.at("iterations").size() == 5);
  CHECK(rec.at("model").at("hyper").size() == 7);
}

TEST_CASE("aggregate curves are the pointwise medians of the runs") {
  const ExperimentConfig cfg = small_config(4, {1, 2, 3}, {"random"});
  const std::vector<RunOutcome> outcomes = run_experiment(cfg);
  const fs::path dir = scratch_dir("agg");
  emit_outputs(outcomes, dir);

  const std::string agg = slurp(dir / "aggregate_random.csv");
  std::istringstream lines(agg);
  std::string line;
  std::getline(lines, line);  // header
  int t = 0;
  while (std::getline(lines, line)) {
    std::vector<double> errs;
    for (const RunOutcome& o : outcomes)
      errs.push_back(o.record.rows[t].err_norm);
    const double expected = median(errs);
    std::stringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');  // t
    std::getline(row, cell, ',');  // err_median
    CHECK(std::stod(cell) == Catch::Approx(expected).epsilon(1e-15));
    ++t;
  }
  CHECK(t == 4);
}

TEST_CASE("failed runs are isolated and marked, others proceed") {
  // budget larger than the pool exhausts every run but must not throw
  nlohmann::json j;
  j["robot"] = "planar2";
  j["pool"] = {{"type", "grid"}, {"resolution", 2}};  // 4 points
  j["strategies"] = {"random", "gp-ucb"};
  j["budget"] = 10;
  j["seeds"] = {1};
  j["holdout"] = {{"count", 5}};
  const ExperimentConfig cfg = config_from_json(j);
  const std::vector<RunOutcome> outcomes = run_experiment(cfg);
  REQUIRE(outcomes.size() == 2);
  for (const RunOutcome& o : outcomes) {
    CHECK(o.failed);
    CHECK(o.error.find("exhausted") != std::string::npos);
    CHECK(o.error.find("iteration 5") != std::string::npos);
  }
}

TEST_CASE("sweep: one level and two seeds yield two rows per method") {
  ExperimentConfig cfg = small_config(6, {1, 2}, {"gp-ucb"});
  const std::vector<SweepRow> rows = sweep_perturbation(cfg, {25.0});
  REQUIRE(rows.size() == 4);
  int ucb = 0, lin = 0;
  for (const SweepRow& row : rows) {
    CHECK(row.level == 25.0);
    if (row.method == "gp-ucb") ++ucb;
    if (row.method == "linearized") ++lin;
  }
  CHECK(ucb == 2);
  CHECK(lin == 2);
}

TEST_CASE("histogram: zero perturbation and zero noise concentrates at zero") {
  nlohmann::json j;
  j["robot"] = "planar2";
  j["seeds"] = {1};
  j["histogram"] = {{"bins", 21}};
  const ExperimentConfig cfg = config_from_json(j);
  const HistogramData data = residual_histogram(cfg, 100);
  for (int axis = 0; axis < 7; ++axis) {
    const AxisHistogram& h = data.axes[axis];
    int nonzero_bins = 0;
    for (int k = 0; k < h.counts.size(); ++k)
      if (h.counts[k] > 0) ++nonzero_bins;
    CHECK(nonzero_bins == 1);
    CHECK(h.counts[h.counts.size() / 2] == 100);  // odd bin count: 0 is central
    CHECK(h.stats.mean == 0.0);
  }
}

TEST_CASE("histogram: bin edges do not depend on the sample count") {
  nlohmann::json j;
  j["robot"] = "lander6";
  j["perturbation"] = {{"mode", "scaled"}, {"percent", 100.0}};
  j["seeds"] = {5};
  const ExperimentConfig cfg = config_from_json(j);
  const HistogramData small = residual_histogram(cfg, 100);
  const HistogramData large = residual_histogram(cfg, 400);
  for (int axis = 0; axis < 7; ++axis)
    CHECK(small.axes[axis].edges == large.axes[axis].edges);
  CHECK_THROWS_AS(residual_histogram(cfg, 50), DomainError);
}

TEST_CASE("histogram and sweep CSV emit with the documented headers") {
  const ExperimentConfig cfg = small_config(5, {1}, {"gp-ucb"});
  const HistogramData data = residual_histogram(cfg, 120);
  CHECK(histogram_csv(data).rfind("axis,bin_lo,bin_hi,count\n", 0) == 0);
  CHECK(histogram_moments_csv(data).rfind(
            "axis,mean,std,skewness,excess_kurtosis\n", 0) == 0);
  const std::vector<SweepRow> rows = sweep_perturbation(cfg, {10.0});
  CHECK(sweep_csv(rows).rfind("level,method,seed,median_err\n", 0) == 0);
}
