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

#ifndef SALSA_LORA_HPP_
#define SALSA_LORA_HPP_

#include <algorithm>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "salsa/checkpoint.hpp"
#include "salsa/lora_adapter.hpp"
#include "salsa/model.hpp"

namespace salsa {

struct LoraConfig {
  std::size_t rank = 8;
  double alpha = 16.0;
  double dropout_p = 0.05;
  // Empty means every layer's attention wq and wv.
  std::vector<std::string> targets;
};

inline std::vector<std::string> default_lora_targets(const ModelConfig& config) {
  std::vector<std::string> targets;
  for (std::size_t i = 0; i < config.n_layers; ++i) {
    targets.push_back("layers." + std::to_string(i) + ".attn.wq");
    targets.push_back("layers." + std::to_string(i) + ".attn.wv");
  }
  return targets;
}

/// Creates adapters for `targets` with A ~ N(0, 1/sqrt(d_in)) and B = 0, and
/// freezes every base weight.
inline AdapterSet attach(TransformerWeights& weights, const LoraConfig& config,
                         std::uint64_t seed) {
  if (config.rank == 0) raise(ErrorKind::kConfiguration, "LoRA rank must be positive");
  if (!(config.dropout_p >= 0.0 && config.dropout_p < 1.0)) {
    raise(ErrorKind::kConfiguration, "LoRA dropout ", config.dropout_p, " not in [0,1)");
  }
  const std::vector<std::string> targets =
      config.targets.empty() ? default_lora_targets(weights.config) : config.targets;

  weights.set_trainable(false);
  std::mt19937_64 rng(seed);
  std::vector<LoraAdapter> adapters;
  for (const std::string& name : targets) {
    if (!weights.has(name)) {
      raise(ErrorKind::kConfiguration, "unknown LoRA target '", name, "'");
    }
    const Tensor base = weights.get(name);
    if (base.shape().size() != 2) {
      raise(ErrorKind::kConfiguration, "LoRA target '", name, "' is not a matrix");
    }
    const std::size_t d_out = base.rows(), d_in = base.cols();
    if (config.rank > std::min(d_in, d_out)) {
      raise(ErrorKind::kConfiguration, "LoRA rank ", config.rank, " exceeds min(", d_in, ",",
            d_out, ") for '", name, "'");
    }
    LoraAdapter adapter;
    adapter.target_name = name;
    adapter.a = detail::random_normal({config.rank, d_in},
                                      1.0 / std::sqrt(static_cast<double>(d_in)), rng);
    adapter.a.set_requires_grad(true);
    adapter.b = Tensor::zeros({d_out, config.rank}, true);
    adapter.rank = config.rank;
    adapter.alpha = config.alpha;
    adapter.dropout_p = config.dropout_p;
    adapters.push_back(std::move(adapter));
  }
  return AdapterSet(std::move(adapters));
}

/// Base weights with every adapter folded in, as fresh frozen leaves.
inline TransformerWeights merge(const TransformerWeights& weights, const AdapterSet& adapters) {
  TransformerWeights merged = weights.clone();
  for (const LoraAdapter& adapter : adapters.adapters()) {
    merged = merged.with_replaced(adapter.target_name,
                                  lora_merge(adapter, merged.get(adapter.target_name)));
  }
  return merged;
}

// ---------------------------------------------------------------------------
// Adapter checkpoints: only A/B per target plus the LoRA settings, tagged
// with the base model config for compatibility checks.

inline Checkpoint adapter_checkpoint(const AdapterSet& adapters, const ModelConfig& base) {
  Checkpoint checkpoint;
  checkpoint.meta.emplace_back("kind", "adapters");
  for (auto& field : base.fields()) checkpoint.meta.push_back(field);
  std::string targets;
  for (const LoraAdapter& adapter : adapters.adapters()) {
    if (!targets.empty()) targets += ",";
    targets += adapter.target_name;
  }
  checkpoint.meta.emplace_back("lora.targets", targets);
  if (!adapters.empty()) {
    const LoraAdapter& first = adapters.adapters().front();
    std::ostringstream alpha, dropout;
    alpha.precision(17);
    dropout.precision(17);
    alpha << first.alpha;
    dropout << first.dropout_p;
    checkpoint.meta.emplace_back("lora.rank", std::to_string(first.rank));
    checkpoint.meta.emplace_back("lora.alpha", alpha.str());
    checkpoint.meta.emplace_back("lora.dropout_p", dropout.str());
  }
  checkpoint.tensors = adapters.parameters();
  return checkpoint;
}

inline void save_adapters(const AdapterSet& adapters, const ModelConfig& base,
                          const std::string& prefix,
                          std::vector<std::pair<std::string, std::string>> extra_meta = {}) {
  Checkpoint checkpoint = adapter_checkpoint(adapters, base);
  for (auto& kv : extra_meta) checkpoint.meta.push_back(std::move(kv));
  save_checkpoint(checkpoint, prefix);
}

/// Names of config fields that differ between `expected` and `found`.
inline std::vector<std::string> config_mismatches(const ModelConfig& expected,
                                                  const ModelConfig& found) {
  std::vector<std::string> out;
  auto a = expected.fields(), b = found.fields();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].first == "config.seed") continue;
    if (a[i].second != b[i].second) {
      out.push_back(a[i].first.substr(7) + " (model " + a[i].second + ", checkpoint " +
                    b[i].second + ")");
    }
  }
  return out;
}

inline AdapterSet adapters_from_checkpoint(const Checkpoint& checkpoint,
                                           const ModelConfig& base) {
  if (checkpoint.meta_value("kind") != "adapters") {
    raise(ErrorKind::kFormat, "checkpoint is not an adapter checkpoint");
  }
  const auto mismatched = config_mismatches(base, config_from_checkpoint(checkpoint));
  if (!mismatched.empty()) {
    std::string joined;
    for (const auto& m : mismatched) joined += (joined.empty() ? "" : ", ") + m;
    raise(ErrorKind::kCompatibility, "adapter checkpoint does not match model config: ", joined);
  }
  std::vector<LoraAdapter> adapters;
  const std::string& targets = checkpoint.meta_value("lora.targets");
  if (targets.empty()) return AdapterSet{};
  const std::size_t rank = std::stoull(checkpoint.meta_value("lora.rank"));
  const double alpha = std::stod(checkpoint.meta_value("lora.alpha"));
  const double dropout_p = std::stod(checkpoint.meta_value("lora.dropout_p"));
  std::stringstream in(targets);
  std::string name;
  while (std::getline(in, name, ',')) {
    LoraAdapter adapter;
    adapter.target_name = name;
    adapter.a = checkpoint.tensor(name + ".lora_A").clone(true);
    adapter.b = checkpoint.tensor(name + ".lora_B").clone(true);
    adapter.rank = rank;
    adapter.alpha = alpha;
    adapter.dropout_p = dropout_p;
    if (adapter.a.rows() != rank || adapter.b.cols() != rank) {
      raise(ErrorKind::kFormat, "adapter '", name, "' tensors do not have rank ", rank);
    }
    adapters.push_back(std::move(adapter));
  }
  return AdapterSet(std::move(adapters));
}

inline AdapterSet load_adapters(const std::string& prefix, const ModelConfig& base) {
  return adapters_from_checkpoint(load_checkpoint(prefix), base);
}

}  // namespace salsa

#endif  // SALSA_LORA_HPP_
