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
// Single-output Gaussian Process regression: squared-exponential kernel with
// an index-based nugget, exact Cholesky posterior, negative log marginal
// likelihood with analytic log-space gradient, and multi-start gradient
// descent over the hyperparameters.

#ifndef KINCAL_GP_HPP
#define KINCAL_GP_HPP

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "kincal/common.hpp"
#include "kincal/rng.hpp"

namespace kincal {

/// Kernel and noise hyperparameters. `lengthscale` holds a single entry for
/// the isotropic kernel (the default) or one per input dimension when
/// per-dimension lengthscales are enabled. Optimization always runs on the
/// log-parameters.
struct Hyperparams {
  Eigen::VectorXd lengthscale = Eigen::VectorXd::Constant(1, 1.0);
  double signal_std = 1.0;       // sigma_f
  double kernel_noise_std = 0.0; // sigma_n, the index-based nugget
  double obs_noise_std = 1e-3;   // sigma_eps

  static Hyperparams isotropic(double l, double sf, double sn, double se) {
    Hyperparams h;
    h.lengthscale = Eigen::VectorXd::Constant(1, l);
    h.signal_std = sf;
    h.kernel_noise_std = sn;
    h.obs_noise_std = se;
    return h;
  }

  bool isotropic_kernel() const { return lengthscale.size() == 1; }

  void validate() const {
    if (lengthscale.size() < 1 || (lengthscale.array() <= 0.0).any() ||
        !lengthscale.allFinite())
      throw DomainError("Hyperparams: lengthscale must be finite and > 0");
    if (!(signal_std > 0.0) || !std::isfinite(signal_std))
      throw DomainError("Hyperparams: signal_std must be finite and > 0");
    if (kernel_noise_std < 0.0 || !std::isfinite(kernel_noise_std))
      throw DomainError("Hyperparams: kernel_noise_std must be finite and >= 0");
    if (obs_noise_std < 0.0 || !std::isfinite(obs_noise_std))
      throw DomainError("Hyperparams: obs_noise_std must be finite and >= 0");
  }
};

struct TrainingSet {
  Eigen::MatrixXd inputs;   // N x d, one row per observation
  Eigen::VectorXd targets;  // N

  int size() const { return static_cast<int>(inputs.rows()); }
  int dim() const { return static_cast<int>(inputs.cols()); }

  void validate() const {
    if (inputs.rows() == 0) throw DomainError("TrainingSet: empty");
    if (inputs.rows() != targets.size())
      throw DomainError("TrainingSet: inputs/targets length mismatch");
    if (!inputs.allFinite() || !targets.allFinite())
      throw DomainError("TrainingSet: non-finite entries");
  }
};

namespace detail {

/// Squared distance in lengthscale units: sum_k ((x_k - y_k) / l_k)^2.
inline double scaled_sqdist(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                            const Eigen::Ref<const Eigen::RowVectorXd>& y,
                            const Eigen::VectorXd& lengthscale) {
  if (lengthscale.size() == 1) {
    return (x - y).squaredNorm() / (lengthscale[0] * lengthscale[0]);
  }
  double s = 0.0;
  for (int k = 0; k < x.size(); ++k) {
    const double d = (x[k] - y[k]) / lengthscale[k];
    s += d * d;
  }
  return s;
}

}  // namespace detail

/// Squared-exponential covariance. `same_element` marks the pair as the
/// identical training element, which is the only place the sigma_n nugget
/// applies; the delta is index-based, not value-based, so duplicated inputs
/// keep the matrix positive semi-definite.
inline double se_kernel(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                        const Eigen::Ref<const Eigen::RowVectorXd>& y,
                        const Hyperparams& hyper, bool same_element = false) {
  if (x.size() != y.size()) throw DomainError("se_kernel: dimension mismatch");
  const double sf2 = hyper.signal_std * hyper.signal_std;
  double k = sf2 * std::exp(-0.5 * detail::scaled_sqdist(x, y, hyper.lengthscale));
  if (same_element) k += hyper.kernel_noise_std * hyper.kernel_noise_std;
  return k;
}

/// Prior variance at a query point, k(x*, x*).
inline double prior_variance(const Hyperparams& hyper) {
  return hyper.signal_std * hyper.signal_std +
         hyper.kernel_noise_std * hyper.kernel_noise_std;
}

namespace detail {

/// Inputs divided columnwise by the lengthscale(s).
inline Eigen::MatrixXd scale_inputs(const Eigen::MatrixXd& X,
                                    const Eigen::VectorXd& lengthscale) {
  if (lengthscale.size() == 1) return X / lengthscale[0];
  return X * lengthscale.cwiseInverse().asDiagonal();
}

/// Pairwise squared distances between the rows of A and B via the Gram trick,
/// clamped at zero against cancellation.
inline Eigen::MatrixXd pairwise_sqdist(const Eigen::MatrixXd& A,
                                       const Eigen::MatrixXd& B) {
  const Eigen::VectorXd a2 = A.rowwise().squaredNorm();
  const Eigen::VectorXd b2 = B.rowwise().squaredNorm();
  Eigen::MatrixXd D2 = -2.0 * A * B.transpose();
  D2.colwise() += a2;
  D2.rowwise() += b2.transpose();
  return D2.cwiseMax(0.0);
}

/// Training covariance K = K_se + sigma_n^2 I (the index-based delta is the
/// diagonal of the training matrix).
inline Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& X,
                                     const Hyperparams& hyper) {
  const double sf2 = hyper.signal_std * hyper.signal_std;
  const Eigen::MatrixXd Xs = scale_inputs(X, hyper.lengthscale);
  Eigen::MatrixXd K = (-0.5 * pairwise_sqdist(Xs, Xs)).array().exp().matrix() * sf2;
  K.diagonal().array() =
      sf2 + hyper.kernel_noise_std * hyper.kernel_noise_std;
  return K;
}

/// Cross covariance between query rows and training rows (no nugget).
inline Eigen::MatrixXd cross_kernel(const Eigen::MatrixXd& Xq,
                                    const Eigen::MatrixXd& X,
                                    const Hyperparams& hyper) {
  const double sf2 = hyper.signal_std * hyper.signal_std;
  const Eigen::MatrixXd Xs = scale_inputs(X, hyper.lengthscale);
  const Eigen::MatrixXd Qs = scale_inputs(Xq, hyper.lengthscale);
  return (-0.5 * pairwise_sqdist(Xs, Qs)).array().exp().matrix() * sf2;
}

struct CholResult {
  Eigen::MatrixXd L;
  double jitter = 0.0;
};

/// Cholesky of K + sigma_eps^2 I with an escalating jitter ladder:
/// 1e-10 * mean(diag), x10 per retry, capped at 1e-4 * mean(diag).
inline CholResult robust_cholesky(Eigen::MatrixXd K_full) {
  const int n = static_cast<int>(K_full.rows());
  const double mean_diag = K_full.trace() / n;
  double jitter = 0.0;
  double level = 1e-10 * mean_diag;
  const double max_jitter = 1e-4 * mean_diag;
  for (;;) {
    Eigen::MatrixXd trial = K_full;
    if (jitter > 0.0) trial.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(trial);
    if (llt.info() == Eigen::Success) {
      return CholResult{Eigen::MatrixXd(llt.matrixL()), jitter};
    }
    if (jitter >= max_jitter || level > max_jitter) {
      throw IllConditionedError(
          "gp: kernel matrix not positive definite at max jitter " +
              std::to_string(max_jitter),
          jitter);
    }
    jitter = level;
    level *= 10.0;
  }
}

}  // namespace detail

/// One fitted single-output GP. Immutable after fit; predictions are pure
/// reads and safe under arbitrary concurrency. The explicit inverse backs
/// the batched variance path (a matrix product instead of a triangular
/// solve per query block); single-point prediction sticks to the factor.
struct GPModel {
  Hyperparams hyper;
  TrainingSet data;
  Eigen::MatrixXd chol_lower;  // L with L L^T = K + sigma_eps^2 I (+ jitter)
  Eigen::VectorXd alpha;       // (K + sigma_eps^2 I)^{-1} Y
  Eigen::MatrixXd kinv;        // (K + sigma_eps^2 I)^{-1}
  double jitter = 0.0;         // applied conditioning jitter, diagnostic
};

inline GPModel fit(const TrainingSet& data, const Hyperparams& hyper) {
  data.validate();
  hyper.validate();
  if (!hyper.isotropic_kernel() && hyper.lengthscale.size() != data.dim())
    throw DomainError("fit: lengthscale dimension != input dimension");

  Eigen::MatrixXd K_full = detail::kernel_matrix(data.inputs, hyper);
  K_full.diagonal().array() += hyper.obs_noise_std * hyper.obs_noise_std;
  detail::CholResult chol = detail::robust_cholesky(std::move(K_full));

  GPModel model;
  model.hyper = hyper;
  model.data = data;
  model.alpha = chol.L.triangularView<Eigen::Lower>().solve(data.targets);
  chol.L.triangularView<Eigen::Lower>().transpose().solveInPlace(model.alpha);
  model.kinv = chol.L.triangularView<Eigen::Lower>().solve(
      Eigen::MatrixXd::Identity(data.size(), data.size()));
  model.kinv = chol.L.triangularView<Eigen::Lower>().transpose().solve(model.kinv);
  model.chol_lower = std::move(chol.L);
  model.jitter = chol.jitter;
  return model;
}

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
};

inline Prediction predict(const GPModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.data.dim())
    throw DomainError("predict: query dimension mismatch");
  const Eigen::MatrixXd ks =
      detail::cross_kernel(x.transpose(), model.data.inputs, model.hyper);
  Prediction out;
  out.mean = ks.col(0).dot(model.alpha);
  const Eigen::VectorXd v =
      model.chol_lower.triangularView<Eigen::Lower>().solve(ks.col(0));
  out.variance = std::max(0.0, prior_variance(model.hyper) - v.squaredNorm());
  return out;
}

/// Posterior mean/variance at every row of Xq; variance via the explicit
/// inverse so the heavy step is a single matrix product.
inline void predict_batch(const GPModel& model, const Eigen::MatrixXd& Xq,
                          Eigen::VectorXd& means, Eigen::VectorXd& variances) {
  if (Xq.cols() != model.data.dim())
    throw DomainError("predict_batch: query dimension mismatch");
  const Eigen::MatrixXd ks =
      detail::cross_kernel(Xq, model.data.inputs, model.hyper);
  means = ks.transpose() * model.alpha;
  const Eigen::MatrixXd w = model.kinv.selfadjointView<Eigen::Lower>() * ks;
  const double prior = prior_variance(model.hyper);
  variances = (prior - (ks.array() * w.array()).colwise().sum())
                  .cwiseMax(0.0)
                  .transpose();
}

/// NLML value plus gradient over the log-hyperparameters. Gradient layout:
/// [log l (1 or d entries), log sigma_f, log sigma_n, log sigma_eps].
struct NlmlResult {
  double value = 0.0;
  Eigen::VectorXd grad;
};

inline NlmlResult nlml(const TrainingSet& data, const Hyperparams& hyper) {
  data.validate();
  hyper.validate();
  const int n = data.size();
  const Eigen::VectorXd& l = hyper.lengthscale;
  const int nl = static_cast<int>(l.size());

  Eigen::MatrixXd K_se = detail::kernel_matrix(data.inputs, hyper);
  K_se.diagonal().array() -= hyper.kernel_noise_std * hyper.kernel_noise_std;
  Eigen::MatrixXd K_full = K_se;
  K_full.diagonal().array() += hyper.kernel_noise_std * hyper.kernel_noise_std +
                               hyper.obs_noise_std * hyper.obs_noise_std;
  const detail::CholResult chol = detail::robust_cholesky(std::move(K_full));

  Eigen::VectorXd alpha = chol.L.triangularView<Eigen::Lower>().solve(data.targets);
  const double quad = alpha.squaredNorm();  // Y^T K^{-1} Y via L^{-1}Y
  chol.L.triangularView<Eigen::Lower>().transpose().solveInPlace(alpha);

  NlmlResult out;
  out.value = 0.5 * quad + chol.L.diagonal().array().log().sum() +
              0.5 * n * std::log(2.0 * kPi);

  // A = K^{-1} - alpha alpha^T; each gradient entry is 0.5 tr(A dK/dtheta).
  Eigen::MatrixXd Kinv = chol.L.triangularView<Eigen::Lower>().solve(
      Eigen::MatrixXd::Identity(n, n));
  Kinv = chol.L.triangularView<Eigen::Lower>().transpose().solve(Kinv);
  const Eigen::MatrixXd A = Kinv - alpha * alpha.transpose();

  out.grad = Eigen::VectorXd::Zero(nl + 3);
  const Eigen::MatrixXd AK = A.cwiseProduct(K_se);
  if (nl == 1) {
    // dK/dlog l = K_se .* D2 / l^2
    const Eigen::MatrixXd D2 =
        detail::pairwise_sqdist(data.inputs, data.inputs);
    out.grad[0] = 0.5 * AK.cwiseProduct(D2).sum() / (l[0] * l[0]);
  } else {
    for (int k = 0; k < nl; ++k) {
      const Eigen::VectorXd xk = data.inputs.col(k);
      Eigen::MatrixXd diff = xk.replicate(1, n);
      diff -= xk.transpose().replicate(n, 1);
      out.grad[k] =
          0.5 * AK.cwiseProduct(diff.cwiseAbs2()).sum() / (l[k] * l[k]);
    }
  }
  out.grad[nl] = AK.sum();  // dK/dlog sf = 2 K_se
  const double sn2 = hyper.kernel_noise_std * hyper.kernel_noise_std;
  const double se2 = hyper.obs_noise_std * hyper.obs_noise_std;
  out.grad[nl + 1] = sn2 * A.trace();
  out.grad[nl + 2] = se2 * A.trace();
  return out;
}

struct OptimizeOptions {
  int max_iterations = 500;
  double grad_tolerance = 1e-6;
  double value_tolerance = 1e-10;      // stop once improvement stalls
  bool optimize_kernel_noise = false;  // sigma_n stays fixed unless enabled
  double min_obs_noise = 1e-6;         // floor keeps the posterior well posed
  double log_bound = 12.0;             // box on every log-parameter
};

struct OptimizeResult {
  Hyperparams hyper;
  double nlml = std::numeric_limits<double>::infinity();
  bool fell_back = false;  // every restart failed numerically
};

namespace detail {

/// Data-driven starting point: lengthscale at the median pairwise distance,
/// signal at the target spread, noise at a tenth of it. Escapes the
/// all-noise local minimum that plagues warm starts.
inline Hyperparams anchor_hyper(const TrainingSet& data, const Hyperparams& base,
                                double min_obs_noise) {
  const int n = data.size();
  Hyperparams h = base;
  double l = 1.0;
  if (n >= 2) {
    const Eigen::MatrixXd D2 = pairwise_sqdist(data.inputs, data.inputs);
    std::vector<double> dists;
    dists.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) dists.push_back(std::sqrt(D2(i, j)));
    std::nth_element(dists.begin(), dists.begin() + dists.size() / 2,
                     dists.end());
    l = std::max(dists[dists.size() / 2], 1e-3);
  }
  h.lengthscale.setConstant(l);
  const double spread = std::max(
      std::sqrt((data.targets.array() - data.targets.mean()).square().sum() /
                std::max(1, n - 1)),
      1e-6);
  h.signal_std = spread;
  h.obs_noise_std = std::max(0.1 * spread, min_obs_noise);
  return h;
}

inline Eigen::VectorXd pack_log(const Hyperparams& h, bool with_sn) {
  const int nl = static_cast<int>(h.lengthscale.size());
  Eigen::VectorXd z(nl + 2 + (with_sn ? 1 : 0));
  for (int i = 0; i < nl; ++i) z[i] = std::log(h.lengthscale[i]);
  z[nl] = std::log(h.signal_std);
  int at = nl + 1;
  if (with_sn) z[at++] = std::log(std::max(h.kernel_noise_std, 1e-12));
  z[at] = std::log(std::max(h.obs_noise_std, 1e-12));
  return z;
}

inline Hyperparams unpack_log(const Eigen::VectorXd& z, const Hyperparams& base,
                              bool with_sn) {
  const int nl = static_cast<int>(base.lengthscale.size());
  Hyperparams h = base;
  for (int i = 0; i < nl; ++i) h.lengthscale[i] = std::exp(z[i]);
  h.signal_std = std::exp(z[nl]);
  int at = nl + 1;
  if (with_sn) h.kernel_noise_std = std::exp(z[at++]);
  h.obs_noise_std = std::exp(z[at]);
  return h;
}

/// Map the active-parameter gradient out of the full nlml gradient
/// (drops the sigma_n slot when it is not being optimized).
inline Eigen::VectorXd active_grad(const Eigen::VectorXd& full, int nl,
                                   bool with_sn) {
  if (with_sn) return full;
  Eigen::VectorXd g(nl + 2);
  g.head(nl + 1) = full.head(nl + 1);
  g[nl + 1] = full[nl + 2];
  return g;
}

}  // namespace detail

/// Multi-start projected gradient descent with backtracking line search on
/// the log-parameters. Restart 1 starts at `init`, restart 2 at the
/// data-driven anchor, later restarts jitter every log-parameter uniformly
/// in [log 0.1, log 10] around `init`. Returns the best restart; never worse
/// than `init` unless everything failed, in which case `fell_back` is set.
inline OptimizeResult optimize_hyper(const TrainingSet& data,
                                     const Hyperparams& init, int restarts,
                                     std::uint64_t seed,
                                     const OptimizeOptions& options = {}) {
  if (restarts < 1) throw DomainError("optimize_hyper: restarts must be >= 1");
  data.validate();
  init.validate();

  const bool with_sn = options.optimize_kernel_noise;
  const int nl = static_cast<int>(init.lengthscale.size());
  const double lo = -options.log_bound, hi = options.log_bound;
  const double log_min_se = std::log(options.min_obs_noise);

  const auto project = [&](Eigen::VectorXd z) {
    for (int i = 0; i < z.size(); ++i) z[i] = std::clamp(z[i], lo, hi);
    z[z.size() - 1] = std::max(z[z.size() - 1], log_min_se);  // sigma_eps floor
    return z;
  };
  const auto objective = [&](const Eigen::VectorXd& z) -> double {
    try {
      return nlml(data, detail::unpack_log(z, init, with_sn)).value;
    } catch (const IllConditionedError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  Rng rng(mix_seed(seed, 0x68797065ULL));
  const Eigen::VectorXd z_init = project(detail::pack_log(init, with_sn));
  const Eigen::VectorXd z_anchor = project(detail::pack_log(
      detail::anchor_hyper(data, init, options.min_obs_noise), with_sn));

  OptimizeResult best;
  bool any_success = false;
  const bool use_anchor = data.size() >= 3;  // needs a spread estimate
  for (int r = 0; r < restarts; ++r) {
    Eigen::VectorXd z = z_init;
    if (r == 1 && use_anchor) {
      z = z_anchor;
    } else if (r > 0) {
      for (int i = 0; i < z.size(); ++i)
        z[i] += rng.uniform(std::log(0.1), std::log(10.0));
      z = project(z);
    }
    double f = objective(z);
    if (!std::isfinite(f)) continue;

    // adaptive step: Barzilai-Borwein initialization with Armijo backtracking
    Eigen::VectorXd z_prev, g_prev;
    double step = 1.0;
    int stalled = 0;
    for (int iter = 0; iter < options.max_iterations; ++iter) {
      NlmlResult res;
      try {
        res = nlml(data, detail::unpack_log(z, init, with_sn));
      } catch (const IllConditionedError&) {
        break;
      }
      f = res.value;
      const Eigen::VectorXd g = detail::active_grad(res.grad, nl, with_sn);
      if (g.lpNorm<Eigen::Infinity>() < options.grad_tolerance) break;

      if (iter == 0) {
        step = 1.0 / std::max(1.0, g.lpNorm<Eigen::Infinity>());
      } else {
        const Eigen::VectorXd dz = z - z_prev;
        const Eigen::VectorXd dg = g - g_prev;
        const double sy = dz.dot(dg);
        if (sy > 1e-18) step = dz.squaredNorm() / sy;
      }
      step = std::clamp(step, 1e-12, 1e3);
      z_prev = z;
      g_prev = g;

      const double g2 = g.squaredNorm();
      double s = step;
      bool moved = false;
      double f_new = f;
      while (s > 1e-16) {
        const Eigen::VectorXd z_try = project(z - s * g);
        const double f_try = objective(z_try);
        if (f_try <= f - 1e-4 * s * g2) {
          z = z_try;
          f_new = f_try;
          step = s;
          moved = true;
          break;
        }
        s *= 0.5;
      }
      if (!moved) break;
      const double improvement = f - f_new;
      f = f_new;
      // slow grind is fine; stop only once progress stalls for a stretch
      if (improvement < options.value_tolerance * std::max(1.0, std::abs(f))) {
        if (++stalled >= 5) break;
      } else {
        stalled = 0;
      }
    }

    if (std::isfinite(f) && f < best.nlml) {
      best.nlml = f;
      best.hyper = detail::unpack_log(z, init, with_sn);
      any_success = true;
    }
  }

  if (!any_success) {
    best.hyper = init;
    best.fell_back = true;
    try {
      best.nlml = nlml(data, init).value;
    } catch (const IllConditionedError&) {
      best.nlml = std::numeric_limits<double>::infinity();
    }
  }
  return best;
}

}  // namespace kincal

#endif  // KINCAL_GP_HPP
