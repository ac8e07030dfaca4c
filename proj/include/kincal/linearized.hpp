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
// Classical linearized recalibration: stack parameter Jacobians and pose
// residuals over the measurements, solve the box-constrained least-squares
// step by projected gradient, apply, re-linearize, repeat.

#ifndef KINCAL_LINEARIZED_HPP
#define KINCAL_LINEARIZED_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "kincal/common.hpp"
#include "kincal/kinematics.hpp"

namespace kincal {

/// min ||residual - jacobian * x||^2  s.t.  lb <= x <= ub.
struct QPProblem {
  Eigen::MatrixXd jacobian;  // (7m) x 3n
  Eigen::VectorXd residual;  // 7m
  Eigen::VectorXd lb, ub;    // 3n

  void validate() const {
    if (jacobian.rows() != residual.size())
      throw DomainError("QPProblem: row count mismatch");
    if (jacobian.rows() % 7 != 0)
      throw DomainError("QPProblem: stacked rows not divisible by 7");
    if (jacobian.cols() != lb.size() || jacobian.cols() != ub.size())
      throw DomainError("QPProblem: bound length mismatch");
    if (((ub - lb).array() < 0.0).any())
      throw DomainError("QPProblem: lb > ub");
  }
};

struct QPSolution {
  Eigen::VectorXd x;
  bool converged = false;
  int iterations = 0;
  double projected_grad_norm = 0.0;
};

namespace detail {

inline Eigen::VectorXd clamp_box(Eigen::VectorXd x, const Eigen::VectorXd& lb,
                                 const Eigen::VectorXd& ub) {
  for (int i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lb[i], ub[i]);
  return x;
}

/// KKT measure for the box: gradient components pointing into the feasible
/// set from an active bound are zeroed.
inline double projected_gradient_norm(const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& g,
                                      const Eigen::VectorXd& lb,
                                      const Eigen::VectorXd& ub) {
  double s = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    double gi = g[i];
    if (x[i] <= lb[i] && gi > 0.0) gi = 0.0;
    if (x[i] >= ub[i] && gi < 0.0) gi = 0.0;
    s += gi * gi;
  }
  return std::sqrt(s);
}

}  // namespace detail

/// Projected gradient with the exact quadratic line-search step
/// alpha = g'g / g'Hg, halved whenever the projected point fails to decrease
/// the objective. Tolerates rank-deficient jacobians (the iterates stay
/// bounded by the box).
inline QPSolution solve_qp(const QPProblem& problem, int max_iterations = 10000,
                           double kkt_tolerance = 1e-8) {
  problem.validate();
  const Eigen::MatrixXd H = problem.jacobian.transpose() * problem.jacobian;
  const Eigen::VectorXd b = problem.jacobian.transpose() * problem.residual;

  QPSolution sol;
  sol.x = detail::clamp_box(Eigen::VectorXd::Zero(H.rows()), problem.lb, problem.ub);
  double f = 0.5 * sol.x.dot(H * sol.x) - b.dot(sol.x);

  for (sol.iterations = 0; sol.iterations < max_iterations; ++sol.iterations) {
    const Eigen::VectorXd g = H * sol.x - b;
    sol.projected_grad_norm =
        detail::projected_gradient_norm(sol.x, g, problem.lb, problem.ub);
    if (sol.projected_grad_norm <= kkt_tolerance) {
      sol.converged = true;
      return sol;
    }

    const double gHg = g.dot(H * g);
    double alpha = gHg > 0.0 ? g.squaredNorm() / gHg : 1.0;
    bool moved = false;
    while (alpha > 1e-18) {
      const Eigen::VectorXd x_try =
          detail::clamp_box(sol.x - alpha * g, problem.lb, problem.ub);
      const double f_try = 0.5 * x_try.dot(H * x_try) - b.dot(x_try);
      if (f_try < f - 1e-18 * std::abs(f)) {
        sol.x = x_try;
        f = f_try;
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) break;  // stalled; KKT norm reported as-is
  }

  const Eigen::VectorXd g = H * sol.x - b;
  sol.projected_grad_norm =
      detail::projected_gradient_norm(sol.x, g, problem.lb, problem.ub);
  sol.converged = sol.projected_grad_norm <= kkt_tolerance;
  return sol;
}

struct CalibrationResult {
  Eigen::VectorXd phi_star;   // corrected (alpha, d, a) blocks per link
  int outer_iterations = 0;
  double final_residual_norm = 0.0;
  bool converged = false;
  bool rank_warning = false;  // stacked jacobian was rank deficient
};

namespace detail {

/// Hemisphere-aligned pose residuals of the measurements against the table,
/// stacked into a 7m vector.
inline Eigen::VectorXd stack_residuals(
    const DHTable& table,
    const std::vector<std::pair<Eigen::VectorXd, Pose7>>& measurements) {
  Eigen::VectorXd r(7 * measurements.size());
  for (std::size_t j = 0; j < measurements.size(); ++j) {
    const Pose7 predicted = forward_kinematics(table, measurements[j].first);
    const Pose7& measured = measurements[j].second;
    r.segment<4>(7 * j) =
        align_hemisphere(measured.quat, predicted.quat) - predicted.quat;
    r.segment<3>(7 * j + 4) = measured.pos - predicted.pos;
  }
  return r;
}

inline Eigen::MatrixXd stack_jacobians(
    const DHTable& table,
    const std::vector<std::pair<Eigen::VectorXd, Pose7>>& measurements) {
  Eigen::MatrixXd jac(7 * measurements.size(), 3 * table.dof());
  for (std::size_t j = 0; j < measurements.size(); ++j)
    jac.middleRows<7>(7 * j) = parameter_jacobian(table, measurements[j].first);
  return jac;
}

}  // namespace detail

/// Iterated linearized calibration. `lb`/`ub` bound the total correction
/// relative to the nominal (alpha, d, a) vector; each outer step solves the
/// QP within the remaining box, applies the step with halving if the stacked
/// residual norm would grow, and re-linearizes.
inline CalibrationResult calibrate_linearized(
    const DHTable& nominal,
    const std::vector<std::pair<Eigen::VectorXd, Pose7>>& measurements,
    const Eigen::VectorXd& lb, const Eigen::VectorXd& ub, int max_outer = 50) {
  nominal.validate();
  const int p = 3 * nominal.dof();
  if (lb.size() != p || ub.size() != p)
    throw DomainError("calibrate_linearized: bound length != 3n");
  const int min_measurements = (p + 6) / 7;
  if (static_cast<int>(measurements.size()) < min_measurements)
    throw DomainError("calibrate_linearized: need at least " +
                      std::to_string(min_measurements) + " measurements");

  const Eigen::VectorXd phi_nominal = phi_vector(nominal);
  Eigen::VectorXd phi = phi_nominal;
  DHTable current = nominal;
  Eigen::VectorXd res = detail::stack_residuals(current, measurements);
  double res_norm = res.norm();

  CalibrationResult out;
  out.rank_warning = false;
  for (out.outer_iterations = 1; out.outer_iterations <= max_outer;
       ++out.outer_iterations) {
    QPProblem qp;
    qp.jacobian = detail::stack_jacobians(current, measurements);
    qp.residual = res;
    qp.lb = phi_nominal + lb - phi;
    qp.ub = phi_nominal + ub - phi;
    if (!out.rank_warning) {
      const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(qp.jacobian);
      out.rank_warning = qr.rank() < qp.jacobian.cols();
    }

    const Eigen::VectorXd step = solve_qp(qp).x;

    // step halving keeps the accepted residual norm non-increasing
    double scale = 1.0;
    bool accepted = false;
    while (scale > 1e-12) {
      const Eigen::VectorXd phi_try = phi + scale * step;
      const DHTable table_try = with_phi(nominal, phi_try);
      const Eigen::VectorXd res_try = detail::stack_residuals(table_try, measurements);
      if (res_try.norm() <= res_norm) {
        phi = phi_try;
        current = table_try;
        res = res_try;
        res_norm = res_try.norm();
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) break;
    if ((scale * step).norm() <= 1e-10) {
      out.converged = true;
      break;
    }
  }

  out.phi_star = phi;
  out.final_residual_norm = res_norm;
  return out;
}

}  // namespace kincal

#endif  // KINCAL_LINEARIZED_HPP
