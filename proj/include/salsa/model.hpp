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

// Toy decoder-only transformer: learned absolute positions, pre-norm blocks
// (causal multi-head attention + GELU MLP), final layer norm, output
// projection tied to the token embedding.

#ifndef SALSA_MODEL_HPP_
#define SALSA_MODEL_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "salsa/checkpoint.hpp"
#include "salsa/error.hpp"
#include "salsa/lora_adapter.hpp"
#include "salsa/tensor.hpp"
#include "salsa/tokenizer.hpp"

namespace salsa {

struct ModelConfig {
  std::size_t vocab_size = 128;
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t d_ff = 256;
  std::size_t max_seq_len = 256;
  std::uint64_t seed = 0;

  void validate() const {
    if (vocab_size == 0 || d_model == 0 || n_layers == 0 || n_heads == 0 || d_ff == 0 ||
        max_seq_len == 0) {
      raise(ErrorKind::kConfiguration, "model dimensions must be positive");
    }
    if (d_model % n_heads != 0) {
      raise(ErrorKind::kConfiguration, "d_model ", d_model, " is not divisible by n_heads ",
            n_heads);
    }
  }

  std::vector<std::pair<std::string, std::string>> fields() const {
    return {{"config.vocab_size", std::to_string(vocab_size)},
            {"config.d_model", std::to_string(d_model)},
            {"config.n_layers", std::to_string(n_layers)},
            {"config.n_heads", std::to_string(n_heads)},
            {"config.d_ff", std::to_string(d_ff)},
            {"config.max_seq_len", std::to_string(max_seq_len)},
            {"config.seed", std::to_string(seed)}};
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct LayerWeights {
  Tensor ln1_gain, ln1_bias;
  Tensor wq, wk, wv, wo;  // [d_model, d_model], stored [out, in]
  Tensor ln2_gain, ln2_bias;
  Tensor w1, b1;  // [d_ff, d_model], [d_ff]
  Tensor w2, b2;  // [d_model, d_ff], [d_model]
};

struct TransformerWeights {
  ModelConfig config;
  Tensor token_embedding;       // [vocab, d_model]; also the output projection
  Tensor positional_embedding;  // [max_seq_len, d_model]
  std::vector<LayerWeights> layers;
  Tensor final_gain, final_bias;

  /// Every parameter with its stable name, in checkpoint order. Handles
  /// share storage with this object.
  std::vector<std::pair<std::string, Tensor>> named() const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("token_embedding", token_embedding);
    out.emplace_back("positional_embedding", positional_embedding);
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const std::string p = "layers." + std::to_string(i) + ".";
      const LayerWeights& l = layers[i];
      out.emplace_back(p + "ln1.gain", l.ln1_gain);
      out.emplace_back(p + "ln1.bias", l.ln1_bias);
      out.emplace_back(p + "attn.wq", l.wq);
      out.emplace_back(p + "attn.wk", l.wk);
      out.emplace_back(p + "attn.wv", l.wv);
      out.emplace_back(p + "attn.wo", l.wo);
      out.emplace_back(p + "ln2.gain", l.ln2_gain);
      out.emplace_back(p + "ln2.bias", l.ln2_bias);
      out.emplace_back(p + "mlp.w1", l.w1);
      out.emplace_back(p + "mlp.b1", l.b1);
      out.emplace_back(p + "mlp.w2", l.w2);
      out.emplace_back(p + "mlp.b2", l.b2);
    }
    out.emplace_back("final.gain", final_gain);
    out.emplace_back("final.bias", final_bias);
    return out;
  }

  bool has(const std::string& name) const {
    for (const auto& [n, t] : named())
      if (n == name) return true;
    return false;
  }

  Tensor get(const std::string& name) const {
    for (const auto& [n, t] : named())
      if (n == name) return t;
    raise(ErrorKind::kConfiguration, "no weight named '", name, "'");
  }

  void set_trainable(bool trainable) {
    for (auto& [n, t] : named()) {
      t.set_requires_grad(trainable);
      t.zero_grad();
    }
  }

  /// Deep copy with fresh, frozen leaves.
  TransformerWeights clone() const;

  /// Copy in which `name` is replaced by `replacement`; other tensors shared.
  TransformerWeights with_replaced(const std::string& name, const Tensor& replacement) const;
};

namespace detail {

inline Tensor random_normal(Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> values(shape_size(shape));
  for (double& v : values) v = dist(rng);
  return Tensor(std::move(shape), std::move(values));
}

inline TransformerWeights rebuild(const ModelConfig& config,
                                  const std::vector<std::pair<std::string, Tensor>>& named) {
  TransformerWeights w;
  w.config = config;
  std::size_t i = 0;
  auto next = [&]() { return named.at(i++).second; };
  w.token_embedding = next();
  w.positional_embedding = next();
  w.layers.resize(config.n_layers);
  for (LayerWeights& l : w.layers) {
    l.ln1_gain = next();
    l.ln1_bias = next();
    l.wq = next();
    l.wk = next();
    l.wv = next();
    l.wo = next();
    l.ln2_gain = next();
    l.ln2_bias = next();
    l.w1 = next();
    l.b1 = next();
    l.w2 = next();
    l.b2 = next();
  }
  w.final_gain = next();
  w.final_bias = next();
  return w;
}

}  // namespace detail

inline TransformerWeights TransformerWeights::clone() const {
  auto parts = named();
  for (auto& [n, t] : parts) t = t.clone();
  return detail::rebuild(config, parts);
}

inline TransformerWeights TransformerWeights::with_replaced(const std::string& name,
                                                            const Tensor& replacement) const {
  auto parts = named();
  bool found = false;
  for (auto& [n, t] : parts) {
    if (n == name) {
      if (t.shape() != replacement.shape()) {
        raise(ErrorKind::kDimension, "replacement for '", name, "' has shape ",
              shape_string(replacement.shape()), ", expected ", shape_string(t.shape()));
      }
      t = replacement;
      found = true;
    }
  }
  if (!found) raise(ErrorKind::kConfiguration, "no weight named '", name, "'");
  return detail::rebuild(config, parts);
}

/// Seeded initialization: N(0, 0.02) for embeddings and projections, zeros
/// for biases, ones for layer-norm gains.
inline TransformerWeights init_weights(const ModelConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  const std::size_t d = config.d_model, f = config.d_ff;
  constexpr double kStd = 0.02;
  TransformerWeights w;
  w.config = config;
  w.token_embedding = detail::random_normal({config.vocab_size, d}, kStd, rng);
  w.positional_embedding = detail::random_normal({config.max_seq_len, d}, kStd, rng);
  for (std::size_t i = 0; i < config.n_layers; ++i) {
    LayerWeights l;
    l.ln1_gain = Tensor::full({d}, 1.0);
    l.ln1_bias = Tensor::zeros({d});
    l.wq = detail::random_normal({d, d}, kStd, rng);
    l.wk = detail::random_normal({d, d}, kStd, rng);
    l.wv = detail::random_normal({d, d}, kStd, rng);
    l.wo = detail::random_normal({d, d}, kStd, rng);
    l.ln2_gain = Tensor::full({d}, 1.0);
    l.ln2_bias = Tensor::zeros({d});
    l.w1 = detail::random_normal({f, d}, kStd, rng);
    l.b1 = Tensor::zeros({f});
    l.w2 = detail::random_normal({d, f}, kStd, rng);
    l.b2 = Tensor::zeros({d});
    w.layers.push_back(std::move(l));
  }
  w.final_gain = Tensor::full({d}, 1.0);
  w.final_bias = Tensor::zeros({d});
  return w;
}

/// Counts transformer forward passes made on behalf of one caller.
struct ForwardCounter {
  std::size_t passes = 0;
};

struct ForwardOptions {
  bool training = false;           // enables adapter dropout
  std::mt19937_64* dropout_rng = nullptr;
  ForwardCounter* counter = nullptr;
};

namespace detail {

inline Tensor project(const Tensor& x, const Tensor& weight, const std::string& name,
                      const AdapterSet* adapters, const DropoutContext& dropout) {
  if (adapters) {
    if (const LoraAdapter* adapter = adapters->find(name)) {
      return lora_apply(*adapter, weight, x, dropout);
    }
  }
  return matmul_transposed(x, weight);
}

}  // namespace detail

/// Final-layer-normed hidden states [len(ids), d_model]. One call is one
/// forward pass.
inline Tensor hidden_states(const TransformerWeights& weights, const AdapterSet* adapters,
                            std::span<const TokenId> ids, const ForwardOptions& options = {}) {
  const ModelConfig& config = weights.config;
  if (ids.empty()) raise(ErrorKind::kLength, "forward on an empty sequence");
  if (ids.size() > config.max_seq_len) {
    raise(ErrorKind::kLength, "sequence of ", ids.size(), " tokens exceeds max_seq_len ",
          config.max_seq_len);
  }
  for (TokenId id : ids) {
    if (id >= config.vocab_size) {
      raise(ErrorKind::kLength, "token id ", id, " >= vocab_size ", config.vocab_size);
    }
  }
  if (options.counter) ++options.counter->passes;

  const std::size_t t = ids.size();
  const std::size_t d = config.d_model;
  const std::size_t heads = config.n_heads;
  const std::size_t head_dim = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  const DropoutContext dropout{options.training, options.dropout_rng};

  std::vector<std::size_t> token_index(ids.begin(), ids.end());
  std::vector<std::size_t> positions(t);
  for (std::size_t i = 0; i < t; ++i) positions[i] = i;
  Tensor x = add(gather_rows(weights.token_embedding, token_index),
                 gather_rows(weights.positional_embedding, positions));

  for (std::size_t li = 0; li < weights.layers.size(); ++li) {
    const LayerWeights& layer = weights.layers[li];
    const std::string prefix = "layers." + std::to_string(li) + ".attn.";

    Tensor h = layer_norm(x, layer.ln1_gain, layer.ln1_bias);
    Tensor q = detail::project(h, layer.wq, prefix + "wq", adapters, dropout);
    Tensor k = detail::project(h, layer.wk, prefix + "wk", adapters, dropout);
    Tensor v = detail::project(h, layer.wv, prefix + "wv", adapters, dropout);
    std::vector<Tensor> head_outputs;
    head_outputs.reserve(heads);
    for (std::size_t hi = 0; hi < heads; ++hi) {
      Tensor qh = slice_columns(q, hi * head_dim, head_dim);
      Tensor kh = slice_columns(k, hi * head_dim, head_dim);
      Tensor vh = slice_columns(v, hi * head_dim, head_dim);
      Tensor scores = causal_mask(scale(matmul_transposed(qh, kh), inv_sqrt));
      head_outputs.push_back(matmul(softmax(scores, 1), vh));
    }
    Tensor attn = detail::project(concat_columns(head_outputs), layer.wo, prefix + "wo",
                                  adapters, dropout);
    x = add(x, attn);

    const std::string mlp = "layers." + std::to_string(li) + ".mlp.";
    Tensor h2 = layer_norm(x, layer.ln2_gain, layer.ln2_bias);
    Tensor ff = add_rowwise(detail::project(h2, layer.w1, mlp + "w1", adapters, dropout),
                            layer.b1);
    ff = add_rowwise(detail::project(gelu(ff), layer.w2, mlp + "w2", adapters, dropout),
                     layer.b2);
    x = add(x, ff);
  }
  return layer_norm(x, weights.final_gain, weights.final_bias);
}

/// Tied output projection of hidden rows: [rows, vocab_size].
inline Tensor project_logits(const TransformerWeights& weights, const Tensor& hidden) {
  return matmul_transposed(hidden, weights.token_embedding);
}

/// Next-token logits for every position: [len(ids), vocab_size].
inline Tensor forward(const TransformerWeights& weights, const AdapterSet* adapters,
                      std::span<const TokenId> ids, const ForwardOptions& options = {}) {
  return project_logits(weights, hidden_states(weights, adapters, ids, options));
}

// ---------------------------------------------------------------------------
// Checkpoints

inline Checkpoint model_checkpoint(const TransformerWeights& weights) {
  Checkpoint checkpoint;
  checkpoint.meta.emplace_back("kind", "model");
  for (auto& field : weights.config.fields()) checkpoint.meta.push_back(field);
  checkpoint.tensors = weights.named();
  return checkpoint;
}

inline ModelConfig config_from_checkpoint(const Checkpoint& checkpoint) {
  auto get = [&](const char* key) -> std::uint64_t {
    const std::string& v = checkpoint.meta_value(std::string("config.") + key);
    try {
      return std::stoull(v);
    } catch (const std::exception&) {
      raise(ErrorKind::kFormat, "config.", key, " is not an integer: '", v, "'");
    }
  };
  ModelConfig config;
  config.vocab_size = get("vocab_size");
  config.d_model = get("d_model");
  config.n_layers = get("n_layers");
  config.n_heads = get("n_heads");
  config.d_ff = get("d_ff");
  config.max_seq_len = get("max_seq_len");
  config.seed = get("seed");
  return config;
}

inline void save_model(const TransformerWeights& weights, const std::string& prefix) {
  save_checkpoint(model_checkpoint(weights), prefix);
}

inline TransformerWeights load_model(const std::string& prefix) {
  Checkpoint checkpoint = load_checkpoint(prefix);
  if (checkpoint.meta_value("kind") != "model") {
    raise(ErrorKind::kFormat, prefix, " is not a model checkpoint");
  }
  ModelConfig config = config_from_checkpoint(checkpoint);
  config.validate();
  TransformerWeights reference = init_weights(config);
  auto parts = reference.named();
  for (auto& [name, t] : parts) {
    const Tensor& loaded = checkpoint.tensor(name);
    if (loaded.shape() != t.shape()) {
      raise(ErrorKind::kFormat, "tensor '", name, "' has shape ", shape_string(loaded.shape()),
            ", expected ", shape_string(t.shape()));
    }
    t = loaded;
  }
  return detail::rebuild(config, parts);
}

}  // namespace salsa

#endif  // SALSA_MODEL_HPP_
