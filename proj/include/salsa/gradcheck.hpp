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

#ifndef SALSA_GRADCHECK_HPP_
#define SALSA_GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "salsa/error.hpp"
#include "salsa/tensor.hpp"

namespace salsa {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::map<std::string, double> per_parameter_errors;
  double epsilon_used = 0.0;
  std::size_t scalars_checked = 0;
};

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

/// Compares reverse-mode gradients of `loss_fn` against central finite
/// differences for every scalar of every named parameter. `loss_fn` must
/// read the parameters through the handles in `params`.
inline GradCheckReport check_gradients(const std::function<Tensor()>& loss_fn,
                                       NamedTensors params, double epsilon) {
  if (!(epsilon > 0.0)) raise(ErrorKind::kConfiguration, "epsilon must be positive");

  auto finite_loss = [&]() {
    const double value = loss_fn().item();
    if (!std::isfinite(value)) raise(ErrorKind::kNumeric, "loss is not finite: ", value);
    return value;
  };

  for (auto& [name, p] : params) p.zero_grad();
  Tensor loss = loss_fn();
  if (!std::isfinite(loss.item())) {
    raise(ErrorKind::kNumeric, "loss is not finite: ", loss.item());
  }
  loss.backward();

  GradCheckReport report;
  report.epsilon_used = epsilon;
  NoGradGuard no_grad;
  for (auto& [name, p] : params) {
    double worst = 0.0;
    auto values = p.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + epsilon;
      const double up = finite_loss();
      values[i] = saved - epsilon;
      const double down = finite_loss();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      worst = std::max(worst, relative_error(p.grad_at(i), numeric));
      ++report.scalars_checked;
    }
    report.per_parameter_errors[name] = worst;
    report.max_relative_error = std::max(report.max_relative_error, worst);
  }
  return report;
}

}  // namespace salsa

#endif  // SALSA_GRADCHECK_HPP_
