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
// Test-only reference computations, written independently of the library
// paths they check: closed-form planar kinematics, scalar DH matrix entries,
// dense (non-Cholesky) GP posteriors, finite-difference NLML gradients,
// exhaustive active-set QP enumeration, and the direct exploration-weight
// formula.

#ifndef KINCAL_TESTS_ORACLES_HPP
#define KINCAL_TESTS_ORACLES_HPP

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace oracles {

// --- planar 2R closed form --------------------------------------------------

struct PlanarPose {
  double x, y, z;
  Eigen::Vector4d quat;  // w, x, y, z of Rz(q1 + q2), w kept >= 0
};

inline PlanarPose planar2(double a1, double a2, double q1, double q2) {
  PlanarPose p;
  p.x = a1 * std::cos(q1) + a2 * std::cos(q1 + q2);
  p.y = a1 * std::sin(q1) + a2 * std::sin(q1 + q2);
  p.z = 0.0;
  const double half = 0.5 * (q1 + q2);
  p.quat << std::cos(half), 0.0, 0.0, std::sin(half);
  if (p.quat[0] < 0.0 || (p.quat[0] == 0.0 && p.quat[3] < 0.0)) p.quat = -p.quat;
  return p;
}

// --- scalar DH matrix (independent coding of the 4x4 entries) ---------------

using Mat4 = std::array<std::array<double, 4>, 4>;

inline Mat4 dh_matrix(double theta, double alpha, double a, double d) {
  const double ct = std::cos(theta), st = std::sin(theta);
  const double ca = std::cos(alpha), sa = std::sin(alpha);
  return Mat4{{{ct, -st * ca, st * sa, a * ct},
               {st, ct * ca, -ct * sa, a * st},
               {0.0, sa, ca, d},
               {0.0, 0.0, 0.0, 1.0}}};
}

inline Mat4 mat4_mul(const Mat4& lhs, const Mat4& rhs) {
  Mat4 out{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += lhs[i][k] * rhs[k][j];
      out[i][j] = s;
    }
  return out;
}

inline Mat4 mat4_identity() {
  Mat4 out{};
  for (int i = 0; i < 4; ++i) out[i][i] = 1.0;
  return out;
}

// --- dense GP posterior without Cholesky ------------------------------------

struct DensePosterior {
  double mean;
  double variance;
};

/// Full-pivot LU solve of (K + sigma_eps^2 I); the nugget sigma_n lands on
/// the training diagonal only.
inline DensePosterior dense_gp(const Eigen::MatrixXd& X,
                               const Eigen::VectorXd& y,
                               const Eigen::VectorXd& xq, double lengthscale,
                               double signal_std, double kernel_noise_std,
                               double obs_noise_std) {
  const int n = static_cast<int>(X.rows());
  const double sf2 = signal_std * signal_std;
  Eigen::MatrixXd K(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double d2 = (X.row(i) - X.row(j)).squaredNorm();
      K(i, j) = sf2 * std::exp(-0.5 * d2 / (lengthscale * lengthscale));
      if (i == j)
        K(i, j) += kernel_noise_std * kernel_noise_std +
                   obs_noise_std * obs_noise_std;
    }
  Eigen::VectorXd ks(n);
  for (int i = 0; i < n; ++i) {
    const double d2 = (X.row(i) - xq.transpose()).squaredNorm();
    ks[i] = sf2 * std::exp(-0.5 * d2 / (lengthscale * lengthscale));
  }
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
  DensePosterior out;
  out.mean = ks.dot(lu.solve(y));
  const double prior = sf2 + kernel_noise_std * kernel_noise_std;
  out.variance = prior - ks.dot(lu.solve(ks));
  return out;
}

// --- box-constrained least squares by exhaustive active-set enumeration -----

/// Minimize ||r - J x||^2 over the box by trying every {free, at-lb, at-ub}
/// pattern: solve the free block by least squares, check feasibility, keep
/// the best feasible candidate. Exact for small dimension.
inline Eigen::VectorXd enumerate_box_lsq(const Eigen::MatrixXd& J,
                                         const Eigen::VectorXd& r,
                                         const Eigen::VectorXd& lb,
                                         const Eigen::VectorXd& ub) {
  const int p = static_cast<int>(J.cols());
  int patterns = 1;
  for (int i = 0; i < p; ++i) patterns *= 3;

  Eigen::VectorXd best = Eigen::VectorXd::Zero(p);
  double best_f = std::numeric_limits<double>::infinity();
  for (int code = 0; code < patterns; ++code) {
    std::vector<int> state(p);  // 0 free, 1 at lb, 2 at ub
    int rem = code;
    for (int i = 0; i < p; ++i) {
      state[i] = rem % 3;
      rem /= 3;
    }
    std::vector<int> free_idx;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(p);
    for (int i = 0; i < p; ++i) {
      if (state[i] == 0)
        free_idx.push_back(i);
      else
        x[i] = state[i] == 1 ? lb[i] : ub[i];
    }
    if (!free_idx.empty()) {
      Eigen::MatrixXd Jf(J.rows(), free_idx.size());
      for (std::size_t k = 0; k < free_idx.size(); ++k)
        Jf.col(k) = J.col(free_idx[k]);
      const Eigen::VectorXd rhs = r - J * x;
      const Eigen::VectorXd xf =
          Jf.completeOrthogonalDecomposition().solve(rhs);
      bool feasible = true;
      for (std::size_t k = 0; k < free_idx.size(); ++k) {
        const int i = free_idx[k];
        if (xf[k] < lb[i] - 1e-12 || xf[k] > ub[i] + 1e-12) feasible = false;
        x[i] = xf[k];
      }
      if (!feasible) continue;
    }
    const double f = (r - J * x).squaredNorm();
    if (f < best_f) {
      best_f = f;
      best = x;
    }
  }
  return best;
}

// --- exploration weight, coded directly from the printed formula ------------

inline double beta_formula(double t, double delta, double d, double a, double b,
                           double r) {
  return 2.0 * std::log(t * t * 2.0 * M_PI * M_PI / (3.0 * delta)) +
         2.0 * d *
             std::log(t * t * d * a * b * r * std::sqrt(std::log(4.0 * d / delta)));
}

}  // namespace oracles

#endif  // KINCAL_TESTS_ORACLES_HPP
