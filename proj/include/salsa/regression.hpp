// Copyright 2026 The salsa Authors.
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

// Scalar targets as distributions over a fixed grid of states.
//
//   predict:  y_hat = sum_i P(s_i) * s_i
//   encode:   s_i <= y <= s_{i+1}, alpha = (s_{i+1} - y) / (s_{i+1} - s_i),
//             P(s_i) = alpha, P(s_{i+1}) = 1 - alpha

#ifndef SALSA_REGRESSION_HPP_
#define SALSA_REGRESSION_HPP_

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "salsa/error.hpp"
#include "salsa/inference.hpp"
#include "salsa/prompt.hpp"

namespace salsa {

class DiscreteGrid {
 public:
  DiscreteGrid(std::vector<double> states, ClassMapping mapping)
      : states_(std::move(states)), mapping_(std::move(mapping)) {
    if (states_.size() < 2) raise(ErrorKind::kConfiguration, "a grid needs at least 2 states");
    for (std::size_t i = 1; i < states_.size(); ++i) {
      if (!(states_[i] > states_[i - 1])) {
        raise(ErrorKind::kConfiguration, "grid states must be strictly increasing (state ", i,
              " = ", states_[i], ")");
      }
    }
    if (mapping_.size() != states_.size()) {
      raise(ErrorKind::kStructural, "grid has ", states_.size(), " states but mapping has ",
            mapping_.size(), " classes");
    }
  }

  /// Grid of a regression task block.
  static DiscreteGrid from_task(const TaskBlock& task) { return {task.grid, task.mapping}; }

  const std::vector<double>& states() const { return states_; }
  const ClassMapping& mapping() const { return mapping_; }
  std::size_t size() const { return states_.size(); }
  double low() const { return states_.front(); }
  double high() const { return states_.back(); }

 private:
  std::vector<double> states_;
  ClassMapping mapping_;
};

inline double expected_value(const std::vector<double>& states,
                             const std::vector<double>& probabilities) {
  if (states.size() != probabilities.size()) {
    raise(ErrorKind::kStructural, probabilities.size(), " probabilities for ", states.size(),
          " grid states");
  }
  double y = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) y += probabilities[i] * states[i];
  return y;
}

inline double expected_value(const DiscreteGrid& grid, const ClassDistribution& dist) {
  return expected_value(grid.states(), dist.probabilities);
}

/// Two-point distribution over grid states whose expectation is y. A value
/// sitting exactly on an interior state belongs to the lower interval, which
/// puts all mass on that state.
inline std::vector<double> encode_target(const DiscreteGrid& grid, double y) {
  const auto& s = grid.states();
  if (!(y >= grid.low() && y <= grid.high())) {
    raise(ErrorKind::kRange, "target ", y, " outside grid range [", grid.low(), ", ",
          grid.high(), "]");
  }
  std::vector<double> p(s.size(), 0.0);
  // First i with y <= s[i + 1].
  std::size_t i = 0;
  while (i + 2 < s.size() && y > s[i + 1]) ++i;
  if (y == s[i + 1] && i + 2 < s.size()) {
    p[i + 1] = 1.0;
    return p;
  }
  const double alpha = (s[i + 1] - y) / (s[i + 1] - s[i]);
  p[i] = alpha;
  p[i + 1] = 1.0 - alpha;
  return p;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    raise(ErrorKind::kStructural, "correlation needs two equal-length series of length >= 2");
  }
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) {
    raise(ErrorKind::kNumeric, "correlation of a constant series is undefined");
  }
  return sxy / std::sqrt(sxx * syy);
}

/// Ranks with ties sharing their average rank.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(average_ranks(x), average_ranks(y));
}

}  // namespace salsa

#endif  // SALSA_REGRESSION_HPP_
