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

#ifndef KINCAL_STATS_HPP
#define KINCAL_STATS_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "kincal/common.hpp"

namespace kincal {

/// Quantile with linear interpolation at p*(n-1), p in [0, 1].
inline double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw DomainError("quantile: empty sample");
  std::sort(v.begin(), v.end());
  const double idx = p * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(idx));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(idx));
  if (lo == hi) return v[lo];
  const double w = idx - static_cast<double>(lo);
  return (1.0 - w) * v[lo] + w * v[hi];
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

struct Moments {
  double mean = 0.0;
  double std = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
};

/// Sample moments (std uses the n-1 denominator; skew/kurtosis the biased
/// central-moment ratios).
inline Moments moments(const std::vector<double>& v) {
  if (v.empty()) throw DomainError("moments: empty sample");
  const double n = static_cast<double>(v.size());
  Moments m;
  for (double x : v) m.mean += x;
  m.mean /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double x : v) {
    const double d = x - m.mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m3 /= n;
  m4 /= n;
  const double var_pop = m2 / n;
  m.std = v.size() > 1 ? std::sqrt(m2 / (n - 1.0)) : 0.0;
  if (var_pop > 0.0) {
    m.skewness = m3 / std::pow(var_pop, 1.5);
    m.excess_kurtosis = m4 / (var_pop * var_pop) - 3.0;
  }
  return m;
}

}  // namespace kincal

#endif  // KINCAL_STATS_HPP
