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

#ifndef SALSA_LORA_ADAPTER_HPP_
#define SALSA_LORA_ADAPTER_HPP_

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "salsa/error.hpp"
#include "salsa/tensor.hpp"

namespace salsa {

/// Low-rank update W + (alpha / rank) * B * A for a base matrix W of shape
/// [d_out, d_in]. A is [rank, d_in], B is [d_out, rank].
struct LoraAdapter {
  std::string target_name;
  Tensor a;
  Tensor b;
  std::size_t rank = 0;
  double alpha = 0.0;
  double dropout_p = 0.0;

  double scaling() const { return alpha / static_cast<double>(rank); }
  std::size_t d_in() const { return a.cols(); }
  std::size_t d_out() const { return b.rows(); }
  std::size_t parameter_count() const { return a.size() + b.size(); }

  LoraAdapter clone() const {
    return {target_name, a.clone(a.requires_grad()), b.clone(b.requires_grad()),
            rank, alpha, dropout_p};
  }
};

class AdapterSet {
 public:
  AdapterSet() = default;
  explicit AdapterSet(std::vector<LoraAdapter> adapters) : adapters_(std::move(adapters)) {}

  const LoraAdapter* find(const std::string& target) const {
    for (const LoraAdapter& adapter : adapters_)
      if (adapter.target_name == target) return &adapter;
    return nullptr;
  }

  const std::vector<LoraAdapter>& adapters() const { return adapters_; }
  std::vector<LoraAdapter>& adapters() { return adapters_; }
  bool empty() const { return adapters_.empty(); }

  /// Trainable tensors named "<target>.lora_A" / "<target>.lora_B".
  std::vector<std::pair<std::string, Tensor>> parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (const LoraAdapter& adapter : adapters_) {
      out.emplace_back(adapter.target_name + ".lora_A", adapter.a);
      out.emplace_back(adapter.target_name + ".lora_B", adapter.b);
    }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t total = 0;
    for (const LoraAdapter& adapter : adapters_) total += adapter.parameter_count();
    return total;
  }

  /// Deep copy; the copy owns fresh leaves.
  AdapterSet clone() const {
    std::vector<LoraAdapter> copies;
    for (const LoraAdapter& adapter : adapters_) copies.push_back(adapter.clone());
    return AdapterSet(std::move(copies));
  }

 private:
  std::vector<LoraAdapter> adapters_;
};

/// Dropout randomness for the adapter path. Absent in inference mode.
struct DropoutContext {
  bool training = false;
  std::mt19937_64* rng = nullptr;
};

/// x * W^T + scaling * dropout(x) * A^T * B^T for x of shape [T, d_in].
inline Tensor lora_apply(const LoraAdapter& adapter, const Tensor& base, const Tensor& x,
                         const DropoutContext& dropout = {}) {
  if (base.cols() != adapter.d_in() || base.rows() != adapter.d_out()) {
    raise(ErrorKind::kDimension, "adapter '", adapter.target_name, "' expects base [",
          adapter.d_out(), ",", adapter.d_in(), "], got ", shape_string(base.shape()));
  }
  if (x.cols() != adapter.d_in()) {
    raise(ErrorKind::kDimension, "adapter '", adapter.target_name, "' input ",
          shape_string(x.shape()), " does not match d_in ", adapter.d_in());
  }
  Tensor out = matmul_transposed(x, base);
  Tensor adapter_in = x;
  if (dropout.training && adapter.dropout_p > 0.0) {
    if (!dropout.rng) raise(ErrorKind::kConfiguration, "training dropout needs an rng");
    std::bernoulli_distribution keep(1.0 - adapter.dropout_p);
    const double inv_keep = 1.0 / (1.0 - adapter.dropout_p);
    std::vector<double> mask(x.size());
    for (double& m : mask) m = keep(*dropout.rng) ? inv_keep : 0.0;
    adapter_in = mul(x, Tensor(x.shape(), std::move(mask)));
  }
  Tensor low = matmul_transposed(adapter_in, adapter.a);
  Tensor update = matmul_transposed(low, adapter.b);
  return add(out, scale(update, adapter.scaling()));
}

/// base + scaling * B * A as a fresh leaf.
inline Tensor lora_merge(const LoraAdapter& adapter, const Tensor& base) {
  if (base.cols() != adapter.d_in() || base.rows() != adapter.d_out()) {
    raise(ErrorKind::kDimension, "adapter '", adapter.target_name, "' expects base [",
          adapter.d_out(), ",", adapter.d_in(), "], got ", shape_string(base.shape()));
  }
  NoGradGuard no_grad;
  Tensor delta = matmul(adapter.b, adapter.a);
  std::vector<double> merged(base.size());
  for (std::size_t i = 0; i < merged.size(); ++i)
    merged[i] = base[i] + adapter.scaling() * delta[i];
  return Tensor(base.shape(), std::move(merged));
}

}  // namespace salsa

#endif  // SALSA_LORA_ADAPTER_HPP_
