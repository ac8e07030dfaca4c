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
// Experiment configuration: one JSON file per experiment. Parsing is strict:
// unknown keys are rejected and every validation error names the field.

#ifndef KINCAL_CONFIG_HPP
#define KINCAL_CONFIG_HPP

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "kincal/acquisition.hpp"
#include "kincal/arm_model.hpp"
#include "kincal/io_util.hpp"
#include "kincal/pool.hpp"
#include "kincal/robots.hpp"

namespace kincal {

namespace detail {

using nlohmann::json;

inline void require_keys(const json& node, const std::string& where,
                         std::initializer_list<const char*> allowed) {
  if (!node.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& item : node.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (item.key() == key) {
        known = true;
        break;
      }
    if (!known) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

inline double get_number(const json& node, const std::string& where) {
  if (!node.is_number()) throw ConfigError(where + ": expected a number");
  return node.get<double>();
}

inline double opt_number(const json& node, const char* key, double fallback,
                         const std::string& where) {
  if (!node.contains(key)) return fallback;
  return get_number(node.at(key), where + "." + key);
}

inline bool opt_bool(const json& node, const char* key, bool fallback,
                     const std::string& where) {
  if (!node.contains(key)) return fallback;
  if (!node.at(key).is_boolean())
    throw ConfigError(where + "." + key + ": expected a boolean");
  return node.at(key).get<bool>();
}

inline Eigen::VectorXd get_vector(const json& node, const std::string& where,
                                  int expected = -1) {
  if (!node.is_array()) throw ConfigError(where + ": expected an array");
  if (expected >= 0 && static_cast<int>(node.size()) != expected)
    throw ConfigError(where + ": expected " + std::to_string(expected) +
                      " entries, got " + std::to_string(node.size()));
  Eigen::VectorXd v(node.size());
  for (std::size_t i = 0; i < node.size(); ++i)
    v[i] = get_number(node[i], where + "[" + std::to_string(i) + "]");
  return v;
}

}  // namespace detail

struct PoolSpec {
  enum class Kind { kGrid, kLatinHypercube };
  Kind kind = Kind::kLatinHypercube;
  int resolution = 45;       // grid points per joint
  int count = 2000;          // LHS sample count
  std::uint64_t seed = 12345;

  CandidatePool build(const DHTable& table) const {
    return kind == Kind::kGrid ? make_grid_pool(table, resolution)
                               : make_lhs_pool(table, count, seed);
  }
};

struct HoldoutSpec {
  int count = 50;
  Eigen::VectorXd from, to;  // empty = central half-range diagonal

  Eigen::MatrixXd build(const DHTable& table) const {
    Eigen::VectorXd lo = from, hi = to;
    if (lo.size() == 0 || hi.size() == 0) {
      lo.resize(table.dof());
      hi.resize(table.dof());
      for (int i = 0; i < table.dof(); ++i) {
        const JointLimits& lim = table.joint_limits[i];
        lo[i] = lim.lo + 0.25 * (lim.hi - lim.lo);
        hi[i] = lim.lo + 0.75 * (lim.hi - lim.lo);
      }
    }
    return line_path(lo, hi, count);
  }
};

struct HistogramSpec {
  int bins = 50;
  int samples = 1500;
  double pos_range = 0.0;   // 0 = derive from the robot's uncertainty bounds
  double quat_range = 1.5;  // aligned quaternion residuals stay within sqrt(2)
};

struct GpConfig {
  double lengthscale = 1.0;
  double signal_std = 0.1;
  double obs_noise_std = 1e-3;
  double kernel_noise_std = 0.0;
  double min_obs_noise = 1e-6;
  bool optimize_kernel_noise = false;
  bool per_dim_lengthscale = false;
  bool signed_mean = false;

  Hyperparams initial(int dof) const {
    Hyperparams h = Hyperparams::isotropic(lengthscale, signal_std,
                                           kernel_noise_std, obs_noise_std);
    if (per_dim_lengthscale)
      h.lengthscale = Eigen::VectorXd::Constant(dof, lengthscale);
    return h;
  }
};

struct ExperimentConfig {
  RobotConfig robot;
  PerturbationSpec perturbation;
  MeasurementModel measurement;
  PoolSpec pool;
  std::vector<Strategy> strategies{Strategy::kGpUcb};
  int budget = 30;
  std::vector<std::uint64_t> seeds{1};
  HoldoutSpec holdout;
  BetaSchedule beta;  // dim and r resolved against the robot
  RefitPolicy refit;
  GpConfig gp;
  std::vector<double> sweep_levels{10.0, 50.0, 100.0, 200.0};
  HistogramSpec histogram;
  int workers = 1;
  std::string output_dir = "out";
  std::string hash;  // FNV-1a of the canonical config text

  DHTable table() const { return robot.table(); }

  CampaignOptions campaign_options() const {
    const DHTable t = table();
    CampaignOptions opts;
    opts.beta = beta;
    opts.refit = refit;
    opts.init_hyper = gp.initial(t.dof());
    opts.gp_options.optimize_kernel_noise = gp.optimize_kernel_noise;
    opts.gp_options.min_obs_noise = gp.min_obs_noise;
    opts.acquisition.signed_mean = gp.signed_mean;
    opts.holdout_points = holdout.build(t);
    opts.config_hash = hash;
    return opts;
  }

  void validate() const {
    robot.validate();
    perturbation.validate(static_cast<int>(robot.rows.size()));
    measurement.validate();
    beta.validate();
    if (budget < 1) throw ConfigError("budget: must be >= 1");
    if (seeds.empty()) throw ConfigError("seeds: must be nonempty");
    if (strategies.empty()) throw ConfigError("strategies: must be nonempty");
    if (holdout.count < 2) throw ConfigError("holdout.count: must be >= 2");
    if (workers < 1) throw ConfigError("workers: must be >= 1");
  }
};

namespace detail {

inline json tool_to_json(const RigidTransform& tool) {
  json j;
  json rot = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot.push_back(tool.rotation(r, c));
  json tr = json::array();
  for (int r = 0; r < 3; ++r) tr.push_back(tool.translation[r]);
  j["rotation"] = rot;
  j["translation"] = tr;
  return j;
}

inline RigidTransform tool_from_json(const json& node, const std::string& where) {
  require_keys(node, where, {"rotation", "translation"});
  RigidTransform tool;
  const Eigen::VectorXd rot = get_vector(node.at("rotation"), where + ".rotation", 9);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) tool.rotation(r, c) = rot[3 * r + c];
  const Eigen::VectorXd tr =
      get_vector(node.at("translation"), where + ".translation", 3);
  tool.translation = tr;
  if (!tool.is_rigid(1e-9)) throw ConfigError(where + ": tool is not rigid");
  return tool;
}

}  // namespace detail

inline nlohmann::json robot_to_json(const RobotConfig& robot) {
  using nlohmann::json;
  json j;
  j["name"] = robot.name;
  json links = json::array();
  for (const RobotLinkRow& row : robot.rows) {
    json link;
    link["joint"] = row.kind == JointKind::kRevolute ? "revolute" : "prismatic";
    link["theta0"] = row.theta0;
    link["alpha"] = row.alpha;
    link["a"] = row.a;
    link["d"] = row.d;
    link["bounds"] = {{"theta", row.bounds.theta},
                      {"alpha", row.bounds.alpha},
                      {"a", row.bounds.a},
                      {"d", row.bounds.d}};
    link["limits"] = {row.limits.lo, row.limits.hi};
    links.push_back(link);
  }
  j["links"] = links;
  if (!robot.tool.rotation.isIdentity(0.0) ||
      !robot.tool.translation.isZero(0.0))
    j["tool"] = detail::tool_to_json(robot.tool);
  return j;
}

inline RobotConfig robot_from_json(const nlohmann::json& node,
                                   const std::string& where = "robot") {
  using detail::get_number;
  using detail::get_vector;
  using detail::require_keys;
  require_keys(node, where, {"name", "links", "tool"});
  RobotConfig robot;
  if (!node.contains("name") || !node.at("name").is_string())
    throw ConfigError(where + ".name: expected a string");
  robot.name = node.at("name").get<std::string>();
  if (!node.contains("links") || !node.at("links").is_array() ||
      node.at("links").empty())
    throw ConfigError(where + ".links: expected a nonempty array");

  int index = 0;
  for (const auto& link : node.at("links")) {
    const std::string lw = where + ".links[" + std::to_string(index++) + "]";
    require_keys(link, lw,
                 {"joint", "theta0", "alpha", "a", "d", "bounds", "limits"});
    RobotLinkRow row;
    if (link.contains("joint")) {
      const std::string kind = link.at("joint").get<std::string>();
      if (kind == "revolute")
        row.kind = JointKind::kRevolute;
      else if (kind == "prismatic")
        row.kind = JointKind::kPrismatic;
      else
        throw ConfigError(lw + ".joint: expected 'revolute' or 'prismatic'");
    }
    row.theta0 = detail::opt_number(link, "theta0", 0.0, lw);
    row.alpha = detail::opt_number(link, "alpha", 0.0, lw);
    row.a = detail::opt_number(link, "a", 0.0, lw);
    row.d = detail::opt_number(link, "d", 0.0, lw);
    if (link.contains("bounds")) {
      const auto& b = link.at("bounds");
      require_keys(b, lw + ".bounds", {"theta", "alpha", "a", "d"});
      row.bounds.theta = detail::opt_number(b, "theta", 0.0, lw + ".bounds");
      row.bounds.alpha = detail::opt_number(b, "alpha", 0.0, lw + ".bounds");
      row.bounds.a = detail::opt_number(b, "a", 0.0, lw + ".bounds");
      row.bounds.d = detail::opt_number(b, "d", 0.0, lw + ".bounds");
    }
    if (!link.contains("limits"))
      throw ConfigError(lw + ".limits: required [lo, hi] array");
    const Eigen::VectorXd lim = get_vector(link.at("limits"), lw + ".limits", 2);
    row.limits = JointLimits{lim[0], lim[1]};
    robot.rows.push_back(row);
  }
  if (node.contains("tool"))
    robot.tool = detail::tool_from_json(node.at("tool"), where + ".tool");
  robot.validate();
  return robot;
}

namespace detail {

inline PerturbationSpec perturbation_from_json(const json& node,
                                               const RobotConfig& robot,
                                               const std::string& where) {
  require_keys(node, where,
               {"mode", "percent", "deltas", "intervals", "additive"});
  PerturbationSpec spec;
  const std::string mode =
      node.contains("mode") ? node.at("mode").get<std::string>() : "none";
  const int n = static_cast<int>(robot.rows.size());

  if (mode == "none") {
    spec = PerturbationSpec::none();
  } else if (mode == "fixed") {
    std::vector<LinkPerturbation> deltas;
    if (!node.contains("deltas"))
      throw ConfigError(where + ".deltas: required for fixed mode");
    int index = 0;
    for (const auto& d : node.at("deltas")) {
      const std::string dw = where + ".deltas[" + std::to_string(index++) + "]";
      require_keys(d, dw, {"theta", "alpha", "a", "d"});
      LinkPerturbation lp;
      lp.theta = opt_number(d, "theta", 0.0, dw);
      lp.alpha = opt_number(d, "alpha", 0.0, dw);
      lp.a = opt_number(d, "a", 0.0, dw);
      lp.d = opt_number(d, "d", 0.0, dw);
      deltas.push_back(lp);
    }
    spec = PerturbationSpec::fixed(std::move(deltas));
  } else if (mode == "sampled-uniform") {
    std::vector<LinkIntervals> intervals;
    if (node.contains("intervals")) {
      int index = 0;
      for (const auto& iv : node.at("intervals")) {
        const std::string ivw =
            where + ".intervals[" + std::to_string(index++) + "]";
        require_keys(iv, ivw, {"theta", "alpha", "a", "d"});
        LinkIntervals li;
        const auto read = [&](const char* key, Interval& out) {
          if (!iv.contains(key)) return;
          const Eigen::VectorXd v = get_vector(iv.at(key), ivw + "." + key, 2);
          out = Interval{v[0], v[1]};
        };
        read("theta", li.theta);
        read("alpha", li.alpha);
        read("a", li.a);
        read("d", li.d);
        intervals.push_back(li);
      }
    } else {
      // default to the robot's +-bound intervals
      for (const LinkBounds& b : robot.bounds())
        intervals.push_back(LinkIntervals{{-b.theta, b.theta},
                                          {-b.alpha, b.alpha},
                                          {-b.d, b.d},
                                          {-b.a, b.a}});
    }
    spec = PerturbationSpec::sampled_uniform(std::move(intervals));
  } else if (mode == "scaled") {
    const double percent = opt_number(node, "percent", 100.0, where);
    spec = PerturbationSpec::scaled(robot.bounds(), percent);
  } else {
    throw ConfigError(where + ".mode: unknown mode '" + mode + "'");
  }

  if (node.contains("additive")) {
    const auto& g = node.at("additive");
    require_keys(g, where + ".additive", {"type", "amplitude", "weights", "phase"});
    const std::string type = g.contains("type")
                                 ? g.at("type").get<std::string>()
                                 : std::string("sine");
    if (type != "sine")
      throw ConfigError(where + ".additive.type: only 'sine' is supported");
    SineField field;
    field.amplitude =
        get_vector(g.at("amplitude"), where + ".additive.amplitude", 7);
    field.weights = g.contains("weights")
                        ? get_vector(g.at("weights"), where + ".additive.weights", n)
                        : Eigen::VectorXd(Eigen::VectorXd::Ones(n));
    field.phase = g.contains("phase")
                      ? get_vector(g.at("phase"), where + ".additive.phase", 7)
                      : Eigen::VectorXd(Eigen::VectorXd::Zero(7));
    spec.additive = field;
  }
  spec.validate(n);
  return spec;
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& root) {
  using detail::get_number;
  using detail::get_vector;
  using detail::opt_bool;
  using detail::opt_number;
  using detail::require_keys;
  using nlohmann::json;

  require_keys(root, "config",
               {"robot", "perturbation", "measurement", "pool", "strategies",
                "budget", "seeds", "holdout", "beta", "refit", "gp",
                "sweep_levels", "histogram", "workers", "output_dir"});

  ExperimentConfig cfg;
  if (!root.contains("robot")) throw ConfigError("robot: required");
  if (root.at("robot").is_string())
    cfg.robot = builtin_robot(root.at("robot").get<std::string>());
  else
    cfg.robot = robot_from_json(root.at("robot"));
  const int dof = static_cast<int>(cfg.robot.rows.size());

  if (root.contains("perturbation"))
    cfg.perturbation = detail::perturbation_from_json(root.at("perturbation"),
                                                      cfg.robot, "perturbation");

  if (root.contains("measurement")) {
    const auto& m = root.at("measurement");
    require_keys(m, "measurement", {"noise_std", "rng_seed"});
    if (m.contains("noise_std")) {
      if (m.at("noise_std").is_number()) {
        cfg.measurement.noise_std =
            Vec7::Constant(get_number(m.at("noise_std"), "measurement.noise_std"));
      } else {
        cfg.measurement.noise_std =
            get_vector(m.at("noise_std"), "measurement.noise_std", 7);
      }
    }
    cfg.measurement.rng_seed = static_cast<std::uint64_t>(
        opt_number(m, "rng_seed", 0.0, "measurement"));
  }

  if (root.contains("pool")) {
    const auto& p = root.at("pool");
    require_keys(p, "pool", {"type", "resolution", "count", "seed"});
    const std::string type =
        p.contains("type") ? p.at("type").get<std::string>() : "lhs";
    if (type == "grid")
      cfg.pool.kind = PoolSpec::Kind::kGrid;
    else if (type == "lhs")
      cfg.pool.kind = PoolSpec::Kind::kLatinHypercube;
    else
      throw ConfigError("pool.type: expected 'grid' or 'lhs'");
    cfg.pool.resolution =
        static_cast<int>(opt_number(p, "resolution", 45.0, "pool"));
    cfg.pool.count = static_cast<int>(opt_number(p, "count", 2000.0, "pool"));
    cfg.pool.seed =
        static_cast<std::uint64_t>(opt_number(p, "seed", 12345.0, "pool"));
  } else if (dof <= 2) {
    cfg.pool.kind = PoolSpec::Kind::kGrid;
  }

  if (root.contains("strategies")) {
    cfg.strategies.clear();
    for (const auto& s : root.at("strategies"))
      cfg.strategies.push_back(parse_strategy(s.get<std::string>()));
  }
  cfg.budget = static_cast<int>(opt_number(root, "budget", 30.0, "config"));
  if (root.contains("seeds")) {
    cfg.seeds.clear();
    for (const auto& s : root.at("seeds"))
      cfg.seeds.push_back(static_cast<std::uint64_t>(
          get_number(s, "seeds")));
    if (cfg.seeds.empty()) throw ConfigError("seeds: must be nonempty");
  }

  if (root.contains("holdout")) {
    const auto& h = root.at("holdout");
    require_keys(h, "holdout", {"count", "from", "to"});
    cfg.holdout.count = static_cast<int>(opt_number(h, "count", 50.0, "holdout"));
    if (h.contains("from"))
      cfg.holdout.from = get_vector(h.at("from"), "holdout.from", dof);
    if (h.contains("to"))
      cfg.holdout.to = get_vector(h.at("to"), "holdout.to", dof);
  }

  cfg.beta.dim = dof;
  cfg.beta.r = cfg.robot.max_joint_range();
  if (root.contains("beta")) {
    const auto& b = root.at("beta");
    require_keys(b, "beta", {"delta", "a", "b", "r"});
    cfg.beta.delta = opt_number(b, "delta", cfg.beta.delta, "beta");
    cfg.beta.a = opt_number(b, "a", cfg.beta.a, "beta");
    cfg.beta.b = opt_number(b, "b", cfg.beta.b, "beta");
    const double r = opt_number(b, "r", 0.0, "beta");
    if (r > 0.0) cfg.beta.r = r;
  }

  if (root.contains("refit")) {
    const auto& rp = root.at("refit");
    require_keys(rp, "refit",
                 {"kind", "period", "warmup", "restarts_initial",
                  "restarts_refit"});
    const std::string kind =
        rp.contains("kind") ? rp.at("kind").get<std::string>() : "periodic";
    if (kind == "always")
      cfg.refit.kind = RefitPolicy::Kind::kAlways;
    else if (kind == "never")
      cfg.refit.kind = RefitPolicy::Kind::kNever;
    else if (kind == "periodic")
      cfg.refit.kind = RefitPolicy::Kind::kPeriodic;
    else
      throw ConfigError("refit.kind: expected always, never, or periodic");
    cfg.refit.period = static_cast<int>(opt_number(rp, "period", 5.0, "refit"));
    cfg.refit.warmup = static_cast<int>(opt_number(rp, "warmup", 5.0, "refit"));
    cfg.refit.restarts_initial =
        static_cast<int>(opt_number(rp, "restarts_initial", 8.0, "refit"));
    cfg.refit.restarts_refit =
        static_cast<int>(opt_number(rp, "restarts_refit", 8.0, "refit"));
  }

  if (root.contains("gp")) {
    const auto& g = root.at("gp");
    require_keys(g, "gp",
                 {"lengthscale", "signal_std", "obs_noise_std",
                  "kernel_noise_std", "min_obs_noise", "optimize_kernel_noise",
                  "per_dim_lengthscale", "signed_mean"});
    cfg.gp.lengthscale = opt_number(g, "lengthscale", cfg.gp.lengthscale, "gp");
    cfg.gp.signal_std = opt_number(g, "signal_std", cfg.gp.signal_std, "gp");
    cfg.gp.obs_noise_std =
        opt_number(g, "obs_noise_std", cfg.gp.obs_noise_std, "gp");
    cfg.gp.kernel_noise_std =
        opt_number(g, "kernel_noise_std", cfg.gp.kernel_noise_std, "gp");
    cfg.gp.min_obs_noise =
        opt_number(g, "min_obs_noise", cfg.gp.min_obs_noise, "gp");
    cfg.gp.optimize_kernel_noise =
        opt_bool(g, "optimize_kernel_noise", cfg.gp.optimize_kernel_noise, "gp");
    cfg.gp.per_dim_lengthscale =
        opt_bool(g, "per_dim_lengthscale", cfg.gp.per_dim_lengthscale, "gp");
    cfg.gp.signed_mean = opt_bool(g, "signed_mean", cfg.gp.signed_mean, "gp");
  }

  if (root.contains("sweep_levels")) {
    cfg.sweep_levels.clear();
    for (const auto& v : root.at("sweep_levels"))
      cfg.sweep_levels.push_back(get_number(v, "sweep_levels"));
  }

  if (root.contains("histogram")) {
    const auto& h = root.at("histogram");
    require_keys(h, "histogram", {"bins", "samples", "pos_range", "quat_range"});
    cfg.histogram.bins =
        static_cast<int>(opt_number(h, "bins", 50.0, "histogram"));
    cfg.histogram.samples =
        static_cast<int>(opt_number(h, "samples", 1500.0, "histogram"));
    cfg.histogram.pos_range = opt_number(h, "pos_range", 0.0, "histogram");
    cfg.histogram.quat_range = opt_number(h, "quat_range", 1.5, "histogram");
  }

  cfg.workers = static_cast<int>(opt_number(root, "workers", 1.0, "config"));
  if (root.contains("output_dir"))
    cfg.output_dir = root.at("output_dir").get<std::string>();

  cfg.hash = fnv1a64_hex(root.dump());
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  try {
    return config_from_json(root);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace kincal

#endif  // KINCAL_CONFIG_HPP
