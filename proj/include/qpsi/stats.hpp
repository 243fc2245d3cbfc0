// Copyright 2026 The qpsi Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

namespace qpsi::stats {

// Two-sided tail mass beyond 4 standard deviations of a normal.
inline double four_sigma_p_value() { return std::erfc(4.0 / std::sqrt(2.0)); }

struct Proportion {
  std::uint64_t hits = 0;
  std::uint64_t trials = 0;

  double mean() const {
    return trials == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(trials);
  }
  // Standard error under the binomial model at probability p.
  double sigma_at(double p) const {
    return trials == 0 ? 0.0 : std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
  }
  double sigma() const { return sigma_at(mean()); }
  bool within_sigmas(double expected, double k = 4.0) const {
    double s = sigma_at(expected);
    double diff = std::abs(mean() - expected);
    return s == 0.0 ? diff == 0.0 : diff <= k * s;
  }
  void add(bool hit) {
    ++trials;
    if (hit) ++hits;
  }
  Proportion& operator+=(const Proportion& o) {
    hits += o.hits;
    trials += o.trials;
    return *this;
  }
};

// Mean and standard error of a real-valued sample (sum / sum of squares).
struct Moments {
  std::uint64_t count = 0;
  double sum = 0.0;
  double sum_sq = 0.0;

  void add(double x) {
    ++count;
    sum += x;
    sum_sq += x * x;
  }
  double mean() const { return count == 0 ? 0.0 : sum / static_cast<double>(count); }
  double variance() const {
    if (count < 2) return 0.0;
    double n = static_cast<double>(count);
    double v = (sum_sq - sum * sum / n) / (n - 1.0);
    return v < 0.0 ? 0.0 : v;
  }
  double standard_error() const {
    return count == 0 ? 0.0 : std::sqrt(variance() / static_cast<double>(count));
  }
  Moments& operator+=(const Moments& o) {
    count += o.count;
    sum += o.sum;
    sum_sq += o.sum_sq;
    return *this;
  }
};

struct ChiSquaredResult {
  double statistic = 0.0;
  int degrees_of_freedom = 0;
  double p_value = 1.0;
};

// Pearson chi-squared test of homogeneity for two count vectors over the same
// categories. Categories empty in both samples are dropped.
inline ChiSquaredResult chi_squared_homogeneity(const std::vector<std::uint64_t>& a,
                                                const std::vector<std::uint64_t>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("category count mismatch");
  double total_a = 0.0, total_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    total_a += static_cast<double>(a[i]);
    total_b += static_cast<double>(b[i]);
  }
  if (total_a == 0.0 || total_b == 0.0) throw std::invalid_argument("empty sample");
  double total = total_a + total_b;
  ChiSquaredResult r;
  int used = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double col = static_cast<double>(a[i] + b[i]);
    if (col == 0.0) continue;
    ++used;
    double ea = col * total_a / total;
    double eb = col * total_b / total;
    double da = static_cast<double>(a[i]) - ea;
    double db = static_cast<double>(b[i]) - eb;
    r.statistic += da * da / ea + db * db / eb;
  }
  r.degrees_of_freedom = used - 1;
  if (r.degrees_of_freedom <= 0) {
    r.degrees_of_freedom = 0;
    r.p_value = 1.0;
    return r;
  }
  boost::math::chi_squared dist(r.degrees_of_freedom);
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
  return r;
}

}  // namespace qpsi::stats
