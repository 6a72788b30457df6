// allograph/graph.hpp
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
// Allophone graphs: single-state weighted finite-state transducers whose
// arcs map universal phones to one language's phonemes, with one learnable
// weight parameter per arc plus a fixed blank self-arc. Composition with a
// frame-wise phone lattice runs in log space and participates in the
// gradient tape.
//
// Two weight modes:
//   free:  arc weight = exp(parameter), strictly positive and unconstrained;
//          composed frames are renormalized to distributions downstream.
//   uc:    arc weights over each source phone's outgoing arcs softmax to 1,
//          so composition is mass-preserving ("universal constraint").
//
// The AlloMatrix baseline is the binary pass-through variant that sums raw
// phone logits into phoneme logits.

#ifndef ALLOGRAPH_GRAPH_HPP_
#define ALLOGRAPH_GRAPH_HPP_

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "allograph/autodiff.hpp"
#include "allograph/common.hpp"
#include "allograph/inventory.hpp"
#include "allograph/mapping.hpp"
#include "allograph/tensor.hpp"

namespace allograph {

enum class SymbolSpace { kPhones, kPhonemes };
enum class ValueKind { kLogit, kLogPosterior };

// A frame-by-symbol matrix on a tape. Column 0 is the CTC blank; phone or
// phoneme i lives at column i+1.
struct Lattice {
  SymbolSpace space = SymbolSpace::kPhones;
  ValueKind kind = ValueKind::kLogit;
  ad::Var var;
  std::size_t frames = 0;
  std::size_t columns = 0;  // symbols + blank
};

inline Lattice make_lattice(ad::Tape& tape, ad::Var var, SymbolSpace space,
                            ValueKind kind) {
  const Tensor& v = tape.value(var);
  if (v.rank() != 2) throw_numeric("lattice requires a rank-2 tensor");
  return Lattice{space, kind, var, v.shape[0], v.shape[1]};
}

enum class GraphMode { kFree, kUniversalConstraint };

inline const char* graph_mode_name(GraphMode m) {
  return m == GraphMode::kFree ? "free" : "uc";
}

inline GraphMode graph_mode_from(const std::string& s) {
  if (s == "free") return GraphMode::kFree;
  if (s == "uc") return GraphMode::kUniversalConstraint;
  throw_data("unknown graph mode '" + s + "'");
}

struct GraphArc {
  std::size_t phone;    // universal inventory id
  std::size_t phoneme;  // language phoneme id
};

struct AllophoneGraph {
  std::string language;
  GraphMode mode = GraphMode::kUniversalConstraint;
  std::size_t n_phones = 0;  // universal inventory size
  std::vector<GraphArc> arcs;
  std::vector<std::string> phoneme_symbols;
  Tensor params;  // one raw parameter per arc

  std::size_t num_phonemes() const { return phoneme_symbols.size(); }

  std::vector<int> phone_groups() const {
    std::vector<int> g(arcs.size());
    for (std::size_t i = 0; i < arcs.size(); ++i)
      g[i] = static_cast<int>(arcs[i].phone);
    return g;
  }

  bool phone_is_mapped(std::size_t phone) const {
    for (const auto& a : arcs)
      if (a.phone == phone) return true;
    return false;
  }

  void validate() const {
    if (arcs.empty()) throw_data("graph '" + language + "' has no arcs");
    if (params.data.size() != arcs.size())
      throw_data("graph '" + language + "': parameter/arc count mismatch");
    std::vector<bool> covered(phoneme_symbols.size(), false);
    for (const auto& a : arcs) {
      if (a.phone >= n_phones || a.phoneme >= phoneme_symbols.size())
        throw_data("graph '" + language + "': arc index out of range");
      covered[a.phoneme] = true;
    }
    for (bool c : covered)
      if (!c) throw_data("graph '" + language + "': uncovered phoneme");
  }
};

// Builds a graph from a mapping table with all parameters at 0, which in uc
// mode yields uniform weights over each phone's arcs.
inline AllophoneGraph build_graph(const MappingTable& mapping, GraphMode mode,
                                  std::size_t n_phones) {
  mapping.validate();
  AllophoneGraph g;
  g.language = mapping.language;
  g.mode = mode;
  g.n_phones = n_phones;
  g.phoneme_symbols = mapping.phoneme_symbols;
  for (const auto& [n, m] : mapping.tuples) g.arcs.push_back({n, m});
  g.params = Tensor::zeros({g.arcs.size()});
  return g;
}

// Per-arc log weights on the tape. In uc mode arcs sharing a source phone
// are normalized together; in free mode the raw parameter is the log weight.
inline ad::Var graph_log_weights(ad::Tape& tape, const AllophoneGraph& g,
                                 ad::Var params) {
  if (tape.value(params).data.size() != g.arcs.size())
    throw_numeric("graph '" + g.language + "': parameter tensor has " +
                  std::to_string(tape.value(params).data.size()) +
                  " entries for " + std::to_string(g.arcs.size()) + " arcs");
  if (g.mode == GraphMode::kUniversalConstraint)
    return tape.segment_log_softmax(params, g.phone_groups());
  return params;
}

// Effective per-arc weights as plain values (inspection, decoding).
inline Tensor effective_log_weights(const AllophoneGraph& g) {
  ad::Tape scratch;
  ad::Var lw = graph_log_weights(scratch, g, scratch.leaf(g.params));
  return scratch.value(lw);
}

inline Tensor effective_weights(const AllophoneGraph& g) {
  Tensor lw = effective_log_weights(g);
  for (double& v : lw.data) v = std::exp(v);
  return lw;
}

// Log-space composition core: phoneme mass is the log-sum over incoming
// arcs of (arc log weight + phone log mass); blank passes through column 0
// with weight 1.
inline Tensor compose_forward(const Tensor& emissions, const Tensor& log_weights,
                              const std::vector<GraphArc>& arcs,
                              std::size_t n_phonemes) {
  const std::size_t frames = emissions.shape[0];
  Tensor out = Tensor::full({frames, n_phonemes + 1}, kLogZero);
  for (std::size_t t = 0; t < frames; ++t) {
    out.at(t, 0) = emissions.at(t, 0);
    for (std::size_t a = 0; a < arcs.size(); ++a) {
      const double term = log_weights.data[a] + emissions.at(t, arcs[a].phone + 1);
      double& cell = out.at(t, arcs[a].phoneme + 1);
      cell = (cell <= kLogZero) ? term : logadd(cell, term);
    }
  }
  return out;
}

namespace detail {

// Records composition on the tape. Gradients flow to both the emission
// lattice and the arc log weights through the usual softmax responsibilities.
inline ad::Var compose_op(ad::Tape& tape, ad::Var emissions, ad::Var log_weights,
                          std::vector<GraphArc> arcs, std::size_t n_phonemes) {
  const Tensor& in = tape.value(emissions);
  Tensor out = compose_forward(in, tape.value(log_weights), arcs, n_phonemes);
  const std::size_t frames = in.shape[0];
  return tape.record(
      "graph_compose", std::move(out),
      [emissions, log_weights, arcs, frames](ad::Tape& t, ad::Var o) {
        const Tensor& g = t.grad(o);
        const Tensor& vo = t.value(o);
        const Tensor& vin = t.value(emissions);
        const Tensor& vlw = t.value(log_weights);
        Tensor& gin = t.grad_ref(emissions);
        Tensor& glw = t.grad_ref(log_weights);
        for (std::size_t tt = 0; tt < frames; ++tt) {
          gin.at(tt, 0) += g.at(tt, 0);
          for (std::size_t a = 0; a < arcs.size(); ++a) {
            const std::size_t j = arcs[a].phoneme + 1;
            const double gv = g.at(tt, j);
            if (gv == 0.0) continue;
            const double r = std::exp(vlw.data[a] +
                                      vin.at(tt, arcs[a].phone + 1) - vo.at(tt, j));
            gin.at(tt, arcs[a].phone + 1) += gv * r;
            glw.data[a] += gv * r;
          }
        }
      });
}

}  // namespace detail

// Transduces a phone lattice (log posteriors over phones + blank) into a
// phoneme lattice. In free mode the composed frames are renormalized to
// distributions so that uniform weight inflation cannot game the loss.
inline Lattice compose(ad::Tape& tape, const Lattice& emissions,
                       const AllophoneGraph& graph, ad::Var params) {
  if (emissions.space != SymbolSpace::kPhones)
    throw_numeric("compose: emission lattice must be in phone space");
  if (emissions.kind != ValueKind::kLogPosterior)
    throw_numeric("compose: emission lattice must hold log posteriors");
  if (emissions.columns != graph.n_phones + 1)
    throw_numeric("compose: lattice has " + std::to_string(emissions.columns) +
                  " columns, graph '" + graph.language + "' expects " +
                  std::to_string(graph.n_phones + 1));
  ad::Var lw = graph_log_weights(tape, graph, params);
  ad::Var out = detail::compose_op(tape, emissions.var, lw, graph.arcs,
                                   graph.num_phonemes());
  if (graph.mode == GraphMode::kFree) out = tape.log_softmax(out);
  return make_lattice(tape, out, SymbolSpace::kPhonemes, ValueKind::kLogPosterior);
}

// Plain-value composition for decoding and alignment.
inline Tensor compose_values(const Tensor& phone_log_posteriors,
                             const AllophoneGraph& graph) {
  if (phone_log_posteriors.rank() != 2 ||
      phone_log_posteriors.shape[1] != graph.n_phones + 1)
    throw_numeric("compose_values: lattice/graph inventory mismatch");
  Tensor out = compose_forward(phone_log_posteriors, effective_log_weights(graph),
                               graph.arcs, graph.num_phonemes());
  if (graph.mode == GraphMode::kFree) {
    for (std::size_t t = 0; t < out.shape[0]; ++t) {
      double lse = kLogZero;
      for (std::size_t c = 0; c < out.shape[1]; ++c)
        lse = (c == 0) ? out.at(t, 0) : logadd(lse, out.at(t, c));
      for (std::size_t c = 0; c < out.shape[1]; ++c) out.at(t, c) -= lse;
    }
  }
  return out;
}

// ---- AlloMatrix baseline ----

struct AlloMatrix {
  std::string language;
  std::size_t n_phones = 0;
  std::vector<GraphArc> ones;
  std::vector<std::string> phoneme_symbols;

  std::size_t num_phonemes() const { return phoneme_symbols.size(); }

  // Dense (phones+blank) x (phonemes+blank) pass-through matrix.
  Tensor dense_with_blank() const {
    Tensor m = Tensor::zeros({n_phones + 1, phoneme_symbols.size() + 1});
    m.at(0, 0) = 1.0;
    for (const auto& a : ones) m.at(a.phone + 1, a.phoneme + 1) = 1.0;
    return m;
  }
};

inline AlloMatrix build_allomatrix(const MappingTable& mapping,
                                   std::size_t n_phones) {
  mapping.validate();
  AlloMatrix m;
  m.language = mapping.language;
  m.n_phones = n_phones;
  m.phoneme_symbols = mapping.phoneme_symbols;
  for (const auto& [n, mm] : mapping.tuples) m.ones.push_back({n, mm});
  return m;
}

// Sums phone logits into phoneme logits through the binary matrix; the
// blank column passes through unchanged. Softmax over phonemes + blank is
// applied downstream by the caller.
inline Lattice allomatrix_project(ad::Tape& tape, const Lattice& logits,
                                  const AlloMatrix& matrix) {
  if (logits.space != SymbolSpace::kPhones)
    throw_numeric("allomatrix_project: lattice must be in phone space");
  if (logits.kind != ValueKind::kLogit)
    throw_numeric("allomatrix_project: lattice must hold logits");
  if (logits.columns != matrix.n_phones + 1)
    throw_numeric("allomatrix_project: lattice has " +
                  std::to_string(logits.columns) + " columns, matrix '" +
                  matrix.language + "' expects " +
                  std::to_string(matrix.n_phones + 1));
  ad::Var out = tape.matmul(logits.var, tape.constant(matrix.dense_with_blank()));
  return make_lattice(tape, out, SymbolSpace::kPhonemes, ValueKind::kLogit);
}

// Masks the logits of phones the language never uses so they receive no
// probability mass after normalization. Blank is never masked.
inline Lattice mask_unmapped(ad::Tape& tape, const Lattice& logits,
                             const MappingTable& mapping) {
  if (logits.space != SymbolSpace::kPhones)
    throw_numeric("mask_unmapped: lattice must be in phone space");
  if (logits.kind != ValueKind::kLogit)
    throw_numeric("mask_unmapped: lattice must hold logits");
  const std::vector<bool> keep = mapping.keep_columns(logits.columns - 1);
  bool all = true;
  for (bool k : keep) all = all && k;
  if (all) return logits;
  ad::Var out = tape.mask_cols(logits.var, keep);
  return make_lattice(tape, out, SymbolSpace::kPhones, ValueKind::kLogit);
}

// ---- graph checkpoint files ----

inline void save_graph(const AllophoneGraph& graph, const PhoneInventory& inventory,
                       std::ostream& out, const std::string& config_hash,
                       std::uint64_t seed) {
  out << "# allograph graph\n";
  out << "version " << kVersion << '\n';
  out << "config_hash " << config_hash << '\n';
  out << "seed " << seed << '\n';
  out << "language " << graph.language << '\n';
  out << "mode " << graph_mode_name(graph.mode) << '\n';
  out << "phones " << graph.n_phones << '\n';
  out << "phonemes";
  for (const auto& s : graph.phoneme_symbols) out << ' ' << s;
  out << '\n';
  out << "arcs " << graph.arcs.size() << '\n';
  for (std::size_t i = 0; i < graph.arcs.size(); ++i)
    out << "arc " << inventory.symbol(graph.arcs[i].phone) << ' '
        << graph.phoneme_symbols[graph.arcs[i].phoneme] << ' '
        << precise(graph.params.data[i]) << '\n';
}

inline void save_graph(const AllophoneGraph& graph, const PhoneInventory& inventory,
                       const std::string& path, const std::string& config_hash,
                       std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw_data("cannot write graph file '" + path + "'");
  save_graph(graph, inventory, out, config_hash, seed);
}

inline AllophoneGraph load_graph(std::istream& in, const std::string& origin,
                                 const PhoneInventory& inventory) {
  AllophoneGraph g;
  g.n_phones = inventory.size();
  std::string line;
  std::size_t lineno = 0;
  std::size_t declared_arcs = 0;
  bool have_mode = false;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto f = split_ws(t);
    const std::string& key = f[0];
    if (key == "version" || key == "config_hash" || key == "seed" ||
        key == "blank")
      continue;
    if (key == "language" && f.size() == 2) {
      g.language = f[1];
    } else if (key == "mode" && f.size() == 2) {
      g.mode = graph_mode_from(f[1]);
      have_mode = true;
    } else if (key == "phones" && f.size() == 2) {
      const std::size_t n = std::strtoull(f[1].c_str(), nullptr, 10);
      if (n != inventory.size())
        throw_data(origin + ":" + std::to_string(lineno) + ": graph expects " +
                   f[1] + " phones, inventory has " +
                   std::to_string(inventory.size()));
    } else if (key == "phonemes") {
      g.phoneme_symbols.assign(f.begin() + 1, f.end());
    } else if (key == "arcs" && f.size() == 2) {
      declared_arcs = std::strtoull(f[1].c_str(), nullptr, 10);
    } else if (key == "arc" && f.size() == 4) {
      auto phone = inventory.find(f[1]);
      if (!phone)
        throw_data(origin + ":" + std::to_string(lineno) +
                   ": unknown phone symbol '" + f[1] + "'");
      std::size_t m = 0;
      for (; m < g.phoneme_symbols.size(); ++m)
        if (g.phoneme_symbols[m] == f[2]) break;
      if (m == g.phoneme_symbols.size())
        throw_data(origin + ":" + std::to_string(lineno) +
                   ": unknown phoneme symbol '" + f[2] + "'");
      for (const auto& a : g.arcs)
        if (a.phone == *phone && a.phoneme == m)
          throw_data(origin + ":" + std::to_string(lineno) + ": duplicate arc (" +
                     f[1] + ", " + f[2] + ")");
      g.arcs.push_back({*phone, m});
      g.params.shape = {g.arcs.size()};
      g.params.data.push_back(std::strtod(f[3].c_str(), nullptr));
    } else {
      throw_data(origin + ":" + std::to_string(lineno) +
                 ": unrecognized graph line '" + t + "'");
    }
  }
  if (!have_mode) throw_data(origin + ": graph file is missing `mode`");
  if (declared_arcs != g.arcs.size())
    throw_data(origin + ": declared " + std::to_string(declared_arcs) +
               " arcs, found " + std::to_string(g.arcs.size()));
  g.validate();
  return g;
}

inline AllophoneGraph load_graph(const std::string& path,
                                 const PhoneInventory& inventory) {
  std::ifstream in(path);
  if (!in) throw_data("cannot open graph file '" + path + "'");
  return load_graph(in, path, inventory);
}

}  // namespace allograph

#endif  // ALLOGRAPH_GRAPH_HPP_
