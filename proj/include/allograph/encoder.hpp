// allograph/encoder.hpp
//
// Copyright 2026 The Allograph Authors
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
// Trainable acoustic encoder: an optional mean-pool frame subsampling stage
// followed by a per-frame feed-forward stack, plus the affine projection
// that turns hidden states into frame-normalized log posteriors over
// phones (or phonemes) and the blank.

#ifndef ALLOGRAPH_ENCODER_HPP_
#define ALLOGRAPH_ENCODER_HPP_

#include <map>
#include <random>
#include <string>
#include <vector>

#include "allograph/autodiff.hpp"
#include "allograph/common.hpp"
#include "allograph/graph.hpp"
#include "allograph/tensor.hpp"

namespace allograph {

enum class Nonlinearity { kNone, kTanh, kRelu };

inline const char* nonlinearity_name(Nonlinearity n) {
  switch (n) {
    case Nonlinearity::kNone: return "none";
    case Nonlinearity::kTanh: return "tanh";
    case Nonlinearity::kRelu: return "relu";
  }
  return "?";
}

inline Nonlinearity nonlinearity_from(const std::string& s) {
  if (s == "none") return Nonlinearity::kNone;
  if (s == "tanh") return Nonlinearity::kTanh;
  if (s == "relu") return Nonlinearity::kRelu;
  throw_config("unknown nonlinearity '" + s + "'");
}

struct EncoderConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden;  // widths of intermediate layers
  std::size_t output_dim = 0;       // hidden state dimension d
  std::size_t subsample = 1;        // mean-pool factor over input frames
  Nonlinearity act = Nonlinearity::kTanh;

  void validate() const {
    if (input_dim == 0 || output_dim == 0)
      throw_config("encoder dimensions must be positive");
    if (subsample == 0) throw_config("subsample factor must be >= 1");
  }

  std::vector<std::size_t> layer_dims() const {
    std::vector<std::size_t> dims{input_dim};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(output_dim);
    return dims;
  }
};

// Named parameter tensors with a stable creation order. The order drives
// initialization, optimizer iteration, and checkpoint layout.
struct ParamSet {
  std::vector<std::string> order;
  std::map<std::string, Tensor> values;

  bool contains(const std::string& name) const { return values.count(name) > 0; }

  Tensor& at(const std::string& name) {
    auto it = values.find(name);
    if (it == values.end()) throw_data("unknown parameter '" + name + "'");
    return it->second;
  }
  const Tensor& at(const std::string& name) const {
    auto it = values.find(name);
    if (it == values.end()) throw_data("unknown parameter '" + name + "'");
    return it->second;
  }

  void add(const std::string& name, Tensor t) {
    if (contains(name)) throw_data("duplicate parameter '" + name + "'");
    order.push_back(name);
    values.emplace(name, std::move(t));
  }
};

// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)], drawn from a single
// sequential stream so identical architectures reproduce identical values.
inline Tensor init_linear_weight(std::size_t in, std::size_t out,
                                 std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(double(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor w = Tensor::zeros({in, out});
  for (double& v : w.data) v = dist(rng);
  return w;
}

inline Tensor init_linear_bias(std::size_t in, std::size_t out,
                               std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(double(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor b = Tensor::zeros({out});
  for (double& v : b.data) v = dist(rng);
  return b;
}

inline void init_encoder_params(const EncoderConfig& cfg, std::mt19937_64& rng,
                                ParamSet& params) {
  cfg.validate();
  const auto dims = cfg.layer_dims();
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::string prefix = "encoder.layer" + std::to_string(l);
    params.add(prefix + ".W", init_linear_weight(dims[l], dims[l + 1], rng));
    params.add(prefix + ".b", init_linear_bias(dims[l], dims[l + 1], rng));
  }
}

inline void init_projection_params(const std::string& name, std::size_t in,
                                   std::size_t out, std::mt19937_64& rng,
                                   ParamSet& params) {
  params.add(name + ".W", init_linear_weight(in, out, rng));
  params.add(name + ".b", init_linear_bias(in, out, rng));
}

// One tape's view of a parameter set: every tensor becomes a trainable leaf.
struct BoundParams {
  std::map<std::string, ad::Var> vars;

  ad::Var at(const std::string& name) const {
    auto it = vars.find(name);
    if (it == vars.end()) throw_data("unbound parameter '" + name + "'");
    return it->second;
  }
};

inline BoundParams bind_params(ad::Tape& tape, const ParamSet& params) {
  BoundParams bound;
  for (const auto& name : params.order)
    bound.vars.emplace(name, tape.leaf(params.at(name), true));
  return bound;
}

// Hidden states for one utterance: subsampled frames through the
// feed-forward stack. Output has ceil(T / subsample) rows of output_dim.
inline ad::Var encode(ad::Tape& tape, const EncoderConfig& cfg,
                      const BoundParams& params, const Tensor& features) {
  cfg.validate();
  if (features.rank() != 2 || features.shape[1] != cfg.input_dim)
    throw_data("encode: features " + features.shape_str() +
               " do not match encoder input dim " +
               std::to_string(cfg.input_dim));
  ad::Var h = tape.leaf(features, false);
  if (cfg.subsample > 1) h = tape.mean_pool_rows(h, cfg.subsample);
  const auto dims = cfg.layer_dims();
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::string prefix = "encoder.layer" + std::to_string(l);
    h = tape.add(tape.matmul(h, params.at(prefix + ".W")),
                 params.at(prefix + ".b"));
    switch (cfg.act) {
      case Nonlinearity::kNone: break;
      case Nonlinearity::kTanh: h = tape.tanh(h); break;
      case Nonlinearity::kRelu: h = tape.relu(h); break;
    }
  }
  return h;
}

// Affine projection of hidden states followed by a per-frame log softmax.
// `projection` names the head parameter pair; the resulting lattice is
// frame-normalized with blank at column 0.
inline Lattice softmax_out(ad::Tape& tape, ad::Var hidden,
                           const BoundParams& params,
                           const std::string& projection, SymbolSpace space) {
  ad::Var logits = tape.add(tape.matmul(hidden, params.at(projection + ".W")),
                            params.at(projection + ".b"));
  ad::Var lp = tape.log_softmax(logits);
  return make_lattice(tape, lp, space, ValueKind::kLogPosterior);
}

// Raw projection logits (needed when masking or the matrix baseline sits
// between the projection and the softmax).
inline Lattice project_logits(ad::Tape& tape, ad::Var hidden,
                              const BoundParams& params,
                              const std::string& projection, SymbolSpace space) {
  ad::Var logits = tape.add(tape.matmul(hidden, params.at(projection + ".W")),
                            params.at(projection + ".b"));
  return make_lattice(tape, logits, space, ValueKind::kLogit);
}

inline Lattice normalize_logits(ad::Tape& tape, const Lattice& logits) {
  if (logits.kind != ValueKind::kLogit)
    throw_numeric("normalize_logits: lattice must hold logits");
  ad::Var lp = tape.log_softmax(logits.var);
  return make_lattice(tape, lp, logits.space, ValueKind::kLogPosterior);
}

}  // namespace allograph

#endif  // ALLOGRAPH_ENCODER_HPP_
