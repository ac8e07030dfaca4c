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

#ifndef KINCAL_COMMON_HPP
#define KINCAL_COMMON_HPP

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace kincal {

/// Pose vector layout: [quat w, x, y, z, pos x, y, z].
using Vec7 = Eigen::Matrix<double, 7, 1>;

inline constexpr double kPi = 3.141592653589793238462643383279502884;

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid argument to a kinematic or numeric operation.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(what) {}
};

/// Configuration file could not be parsed or validated.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

/// Kernel matrix stayed non-positive-definite through the whole jitter ladder.
class IllConditionedError : public Error {
 public:
  IllConditionedError(const std::string& what, double attempted_jitter)
      : Error(what), attempted_jitter_(attempted_jitter) {}
  double attempted_jitter() const { return attempted_jitter_; }

 private:
  double attempted_jitter_;
};

/// Query against a model that has no observations yet.
class NotFittedError : public Error {
 public:
  explicit NotFittedError(const std::string& what) : Error(what) {}
};

/// Sampler asked for a point after the candidate pool was used up.
class PoolExhaustedError : public Error {
 public:
  explicit PoolExhaustedError(const std::string& what) : Error(what) {}
};

/// Normalize an angle to (-pi, pi].
inline double wrap_angle(double x) {
  double y = std::fmod(x + kPi, 2.0 * kPi);
  if (y <= 0.0) y += 2.0 * kPi;
  return y - kPi;
}

/// Flip `q` onto the hemisphere of `ref` (dot >= 0). Both unit quaternions.
inline Eigen::Vector4d align_hemisphere(const Eigen::Vector4d& q,
                                        const Eigen::Vector4d& ref) {
  return q.dot(ref) < 0.0 ? Eigen::Vector4d(-q) : q;
}

inline bool all_finite(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return v.allFinite();
}

}  // namespace kincal

#endif  // KINCAL_COMMON_HPP
