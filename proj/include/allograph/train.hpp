// allograph/train.hpp
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
// The multilingual training loop. One shared encoder and phone projection
// feed per-language transduction heads according to the mode:
//
//   phoneme-only    hidden states project straight to each language's
//                   phonemes; no phone layer exists
//   allomatrix      phone logits pass through the binary matrix into
//                   phoneme logits, then softmax
//   allograph-free  phone posteriors composed with a free-weight graph,
//                   frames renormalized
//   allograph-uc    phone posteriors composed with a sum-to-one graph
//
// Batches interleave languages round-robin; utterances are bucketed by
// length within a language. The loss is the per-utterance CTC negative log
// likelihood normalized by target length, averaged over the batch.
// Infeasible utterances are counted and skipped. With more than one worker
// the batch splits into contiguous shards, one tape per shard, and the
// gradient maps are summed in shard order at the step barrier.

#ifndef ALLOGRAPH_TRAIN_HPP_
#define ALLOGRAPH_TRAIN_HPP_

#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "allograph/corpus.hpp"
#include "allograph/ctc.hpp"
#include "allograph/encoder.hpp"
#include "allograph/graph.hpp"
#include "allograph/inventory.hpp"
#include "allograph/mapping.hpp"
#include "allograph/optim.hpp"

namespace allograph {

enum class TrainMode { kPhonemeOnly, kAlloMatrix, kAllographFree, kAllographUc };

inline const char* train_mode_name(TrainMode m) {
  switch (m) {
    case TrainMode::kPhonemeOnly: return "phoneme-only";
    case TrainMode::kAlloMatrix: return "allomatrix";
    case TrainMode::kAllographFree: return "allograph-free";
    case TrainMode::kAllographUc: return "allograph-uc";
  }
  return "?";
}

inline TrainMode train_mode_from(const std::string& s) {
  if (s == "phoneme-only") return TrainMode::kPhonemeOnly;
  if (s == "allomatrix") return TrainMode::kAlloMatrix;
  if (s == "allograph-free") return TrainMode::kAllographFree;
  if (s == "allograph-uc") return TrainMode::kAllographUc;
  throw_config("unknown mode '" + s +
               "' (expected phoneme-only | allomatrix | allograph-free | "
               "allograph-uc)");
}

inline bool mode_uses_phones(TrainMode m) { return m != TrainMode::kPhonemeOnly; }

struct TrainConfig {
  TrainMode mode = TrainMode::kAllographUc;
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  AdamConfig adam;
  double graph_lr = -1.0;  // negative means: same as adam.lr
  std::uint64_t seed = 0;
  std::vector<std::string> languages;  // empty: every corpus language
  std::size_t threads = 1;
  EncoderConfig encoder;  // input_dim filled from the corpus when 0

  double graph_lr_scale() const {
    return graph_lr < 0.0 ? 1.0 : graph_lr / adam.lr;
  }

  std::map<std::string, std::string> snapshot_fields() const {
    std::map<std::string, std::string> kv;
    kv["mode"] = train_mode_name(mode);
    kv["epochs"] = std::to_string(epochs);
    kv["batch_size"] = std::to_string(batch_size);
    kv["lr"] = precise(adam.lr);
    kv["beta1"] = precise(adam.beta1);
    kv["beta2"] = precise(adam.beta2);
    kv["eps"] = precise(adam.eps);
    kv["warmup_steps"] = std::to_string(adam.warmup_steps);
    kv["graph_lr"] = precise(graph_lr < 0.0 ? adam.lr : graph_lr);
    kv["seed"] = std::to_string(seed);
    std::string langs;
    for (const auto& l : languages) langs += (langs.empty() ? "" : " ") + l;
    kv["languages"] = langs;
    kv["threads"] = std::to_string(threads);
    kv["encoder.input_dim"] = std::to_string(encoder.input_dim);
    std::string hidden;
    for (auto h : encoder.hidden)
      hidden += (hidden.empty() ? "" : " ") + std::to_string(h);
    kv["encoder.hidden"] = hidden;
    kv["encoder.output_dim"] = std::to_string(encoder.output_dim);
    kv["encoder.subsample"] = std::to_string(encoder.subsample);
    kv["encoder.activation"] = nonlinearity_name(encoder.act);
    return kv;
  }
};

inline std::string canonical_snapshot(const std::map<std::string, std::string>& kv) {
  std::string s;
  for (const auto& [k, v] : kv) s += k + "=" + v + "\n";
  return s;
}

// ---- the model ----

struct Model {
  TrainMode mode = TrainMode::kAllographUc;
  EncoderConfig encoder;
  PhoneInventory inventory;
  std::vector<std::string> languages;
  ParamSet params;  // encoder trunk + projection heads
  std::map<std::string, AllophoneGraph> graphs;   // allograph modes
  std::map<std::string, AlloMatrix> matrices;     // allomatrix mode
  std::map<std::string, MappingTable> mappings;   // all phone modes
  std::map<std::string, std::vector<std::string>> phoneme_axes;

  const std::vector<std::string>& phoneme_axis(const std::string& lang) const {
    auto it = phoneme_axes.find(lang);
    if (it == phoneme_axes.end())
      throw_data("model has no language '" + lang + "'");
    return it->second;
  }

  bool has_language(const std::string& lang) const {
    return phoneme_axes.count(lang) > 0;
  }

  // Every trainable tensor in deterministic order.
  std::vector<std::pair<std::string, Tensor*>> trainable() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (const auto& name : params.order) out.push_back({name, &params.at(name)});
    for (const auto& lang : languages) {
      auto it = graphs.find(lang);
      if (it != graphs.end()) out.push_back({"graph." + lang, &it->second.params});
    }
    return out;
  }

  std::vector<int> target_ids(const std::string& lang,
                              const std::vector<std::string>& symbols) const {
    const auto& axis = phoneme_axis(lang);
    std::vector<int> ids;
    ids.reserve(symbols.size());
    for (const auto& s : symbols) {
      std::size_t i = 0;
      for (; i < axis.size(); ++i)
        if (axis[i] == s) break;
      if (i == axis.size())
        throw_data("language '" + lang + "': transcript phoneme '" + s +
                   "' is not in the model's phoneme set");
      ids.push_back(static_cast<int>(i));
    }
    return ids;
  }
};

// Phoneme axis for languages trained without a mapping table: first
// appearance order over the corpus transcripts.
inline std::vector<std::string> axis_from_transcripts(
    const std::vector<Utterance>& utts) {
  std::vector<std::string> axis;
  std::set<std::string> seen;
  for (const auto& u : utts)
    for (const auto& s : u.phonemes)
      if (seen.insert(s).second) axis.push_back(s);
  return axis;
}

inline Model build_model(const TrainConfig& config, const PhoneInventory& inventory,
                         const std::map<std::string, MappingTable>& mappings,
                         const Corpus& corpus) {
  Model model;
  model.mode = config.mode;
  model.encoder = config.encoder;
  if (model.encoder.input_dim == 0) model.encoder.input_dim = corpus.feature_dim;
  if (model.encoder.input_dim != corpus.feature_dim)
    throw_config("encoder input dim " + std::to_string(model.encoder.input_dim) +
                 " does not match corpus feature dim " +
                 std::to_string(corpus.feature_dim));
  model.inventory = inventory;
  model.languages =
      config.languages.empty() ? corpus.languages : config.languages;
  for (const auto& lang : model.languages)
    if (!corpus.utterances.count(lang))
      throw_config("corpus has no language '" + lang + "'");

  for (const auto& lang : model.languages) {
    auto it = mappings.find(lang);
    if (mode_uses_phones(config.mode)) {
      if (it == mappings.end())
        throw_config("mode " + std::string(train_mode_name(config.mode)) +
                     " needs a mapping table for language '" + lang + "'");
      model.mappings.emplace(lang, it->second);
      model.phoneme_axes[lang] = it->second.phoneme_symbols;
    } else {
      model.phoneme_axes[lang] = it != mappings.end()
                                     ? it->second.phoneme_symbols
                                     : axis_from_transcripts(
                                           corpus.utterances.at(lang));
      if (model.phoneme_axes[lang].empty())
        throw_data("language '" + lang + "' has no phonemes");
    }
  }

  // One sequential stream in creation order keeps equal architectures
  // bit-identical across modes.
  std::mt19937_64 rng(config.seed);
  init_encoder_params(model.encoder, rng, model.params);
  if (mode_uses_phones(config.mode)) {
    init_projection_params("phone_head", model.encoder.output_dim,
                           inventory.size() + 1, rng, model.params);
    for (const auto& lang : model.languages) {
      const MappingTable& table = model.mappings.at(lang);
      if (config.mode == TrainMode::kAlloMatrix)
        model.matrices.emplace(lang, build_allomatrix(table, inventory.size()));
      else
        model.graphs.emplace(
            lang, build_graph(table,
                              config.mode == TrainMode::kAllographUc
                                  ? GraphMode::kUniversalConstraint
                                  : GraphMode::kFree,
                              inventory.size()));
    }
  } else {
    for (const auto& lang : model.languages)
      init_projection_params("head." + lang, model.encoder.output_dim,
                             model.phoneme_axes.at(lang).size() + 1, rng,
                             model.params);
  }
  return model;
}

// ---- forward pass ----

struct ForwardResult {
  Lattice phoneme_lattice;                 // log posteriors over phonemes+blank
  std::optional<Lattice> phone_lattice;    // log posteriors over phones+blank
};

// `graph_vars` supplies the per-language graph parameter leaves for the
// current tape (empty outside allograph modes). `training` applies the
// unmapped-phone mask, which is a training-time device.
inline ForwardResult model_forward(ad::Tape& tape, const Model& model,
                                   const BoundParams& bound,
                                   const std::map<std::string, ad::Var>& graph_vars,
                                   const Tensor& features, const std::string& lang,
                                   bool training) {
  ad::Var h = encode(tape, model.encoder, bound, features);
  if (model.mode == TrainMode::kPhonemeOnly) {
    Lattice lat = softmax_out(tape, h, bound, "head." + lang,
                              SymbolSpace::kPhonemes);
    return {lat, std::nullopt};
  }
  Lattice logits =
      project_logits(tape, h, bound, "phone_head", SymbolSpace::kPhones);
  if (model.mode == TrainMode::kAlloMatrix) {
    Lattice projected =
        allomatrix_project(tape, logits, model.matrices.at(lang));
    Lattice phoneme = normalize_logits(tape, projected);
    Lattice phone = normalize_logits(tape, logits);
    return {phoneme, phone};
  }
  Lattice masked =
      training ? mask_unmapped(tape, logits, model.mappings.at(lang)) : logits;
  Lattice phone = normalize_logits(tape, masked);
  auto gv = graph_vars.find(lang);
  ad::Var params = gv != graph_vars.end()
                       ? gv->second
                       : tape.leaf(model.graphs.at(lang).params, false);
  Lattice phoneme = compose(tape, phone, model.graphs.at(lang), params);
  return {phoneme, phone};
}

// Plain-value phone posteriors for decoding and alignment (no masking).
inline Tensor phone_log_posteriors(const Model& model, const Tensor& features) {
  if (!mode_uses_phones(model.mode))
    throw_infeasible("no phone predictions: model was trained phoneme-only");
  ad::Tape tape;
  BoundParams bound = bind_params(tape, model.params);
  ad::Var h = encode(tape, model.encoder, bound, features);
  Lattice logits =
      project_logits(tape, h, bound, "phone_head", SymbolSpace::kPhones);
  return tape.value(tape.log_softmax(logits.var));
}

// Plain-value phoneme posteriors (evaluation path, no masking).
inline Tensor phoneme_log_posteriors(const Model& model, const Tensor& features,
                                     const std::string& lang) {
  ad::Tape tape;
  BoundParams bound = bind_params(tape, model.params);
  ForwardResult fwd =
      model_forward(tape, model, bound, {}, features, lang, false);
  return tape.value(fwd.phoneme_lattice.var);
}

// ---- training ----

struct TrainResult {
  Model model;
  AdamState optim;
  std::vector<double> loss_curve;  // per-epoch mean loss
  std::size_t skipped_infeasible = 0;
  std::string snapshot;
  std::string config_hash;
};

namespace detail {

struct PreparedUtterance {
  const Utterance* utt = nullptr;
  std::vector<int> labels;
};

struct ShardResult {
  std::map<std::string, Tensor> grads;
  double loss_sum = 0.0;
  std::size_t count = 0;
};

inline ShardResult run_shard(const Model& model,
                             const std::vector<const PreparedUtterance*>& shard) {
  ShardResult result;
  ad::Tape tape;
  BoundParams bound = bind_params(tape, model.params);
  std::map<std::string, ad::Var> graph_vars;
  for (const auto& [lang, graph] : model.graphs)
    graph_vars.emplace(lang, tape.leaf(graph.params, true));

  ad::Var total;
  for (const PreparedUtterance* pu : shard) {
    ForwardResult fwd = model_forward(tape, model, bound, graph_vars,
                                      pu->utt->features, pu->utt->language, true);
    CtcLossResult loss = ctc_loss(tape, fwd.phoneme_lattice,
                                  {pu->utt->language, pu->labels});
    if (!loss.feasible) continue;  // feasibility is pre-checked per utterance
    ad::Var scaled = tape.scale(loss.loss, 1.0 / double(pu->labels.size()));
    total = total.valid() ? tape.add(total, scaled) : scaled;
    ++result.count;
  }
  if (!result.count) return result;
  result.loss_sum = tape.value(total).data[0];
  tape.backward(total);
  for (const auto& [name, var] : bound.vars) result.grads[name] = tape.grad(var);
  for (const auto& [lang, var] : graph_vars)
    result.grads["graph." + lang] = tape.grad(var);
  return result;
}

}  // namespace detail

struct Checkpoint;
inline Checkpoint load_checkpoint(const std::string& dir);

inline TrainResult train(const Corpus& corpus, const PhoneInventory& inventory,
                         const std::map<std::string, MappingTable>& mappings,
                         const TrainConfig& config,
                         const Checkpoint* resume = nullptr);

// Mean per-utterance loss (normalized by target length) of a model on a
// corpus; deterministic, no masking state involved beyond the mode.
inline double evaluate_mean_loss(const Model& model, const Corpus& corpus,
                                 bool training_path = true) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& lang : model.languages) {
    auto it = corpus.utterances.find(lang);
    if (it == corpus.utterances.end()) continue;
    for (const auto& utt : it->second) {
      std::vector<int> labels = model.target_ids(lang, utt.phonemes);
      if (labels.empty()) continue;
      ad::Tape tape;
      BoundParams bound = bind_params(tape, model.params);
      ForwardResult fwd =
          model_forward(tape, model, bound, {}, utt.features, lang, training_path);
      CtcLossResult loss = ctc_loss(tape, fwd.phoneme_lattice, {lang, labels});
      if (!loss.feasible) continue;
      sum += tape.value(loss.loss).data[0] / double(labels.size());
      ++count;
    }
  }
  if (!count) throw_data("no feasible utterances to evaluate");
  return sum / double(count);
}

// ---- checkpoints ----

namespace detail {

inline void write_artifact_header(std::ostream& out, const std::string& kind,
                                  const std::string& config_hash,
                                  std::uint64_t seed) {
  out << "# allograph " << kind << '\n';
  out << "version " << kVersion << '\n';
  out << "config_hash " << config_hash << '\n';
  out << "seed " << seed << '\n';
}

inline void save_tensors(std::ostream& out,
                         const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
  for (const auto& [name, t] : tensors) {
    out << "tensor " << name << ' ' << t->shape.size();
    for (auto d : t->shape) out << ' ' << d;
    out << '\n';
    for (std::size_t i = 0; i < t->data.size(); ++i) {
      if (i) out << ' ';
      out << precise(t->data[i]);
    }
    out << '\n';
  }
}

inline std::vector<std::pair<std::string, Tensor>> load_tensors(
    std::istream& in, const std::string& origin) {
  std::vector<std::pair<std::string, Tensor>> tensors;
  std::string line;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto f = split_ws(t);
    if (f[0] != "tensor") continue;
    if (f.size() < 3) throw_data(origin + ": malformed tensor header");
    const std::string name = f[1];
    const std::size_t rank = std::strtoull(f[2].c_str(), nullptr, 10);
    if (f.size() != 3 + rank) throw_data(origin + ": malformed tensor header");
    std::vector<std::size_t> shape;
    for (std::size_t i = 0; i < rank; ++i)
      shape.push_back(std::strtoull(f[3 + i].c_str(), nullptr, 10));
    Tensor tensor = Tensor::zeros(shape);
    if (!std::getline(in, line))
      throw_data(origin + ": missing values for tensor '" + name + "'");
    auto vals = split_ws(line);
    if (vals.size() != tensor.data.size())
      throw_data(origin + ": tensor '" + name + "' has " +
                 std::to_string(vals.size()) + " values, expected " +
                 std::to_string(tensor.data.size()));
    for (std::size_t i = 0; i < vals.size(); ++i)
      tensor.data[i] = std::strtod(vals[i].c_str(), nullptr);
    tensors.emplace_back(name, std::move(tensor));
  }
  return tensors;
}

}  // namespace detail

inline void save_checkpoint(const TrainResult& result, const std::string& dir,
                            std::uint64_t seed) {
  namespace fs = std::filesystem;
  const Model& model = result.model;
  if (fs::exists(dir) && !fs::is_empty(dir))
    throw_config("checkpoint directory '" + dir + "' already exists");
  const fs::path partial = fs::path(dir).string() + ".partial";
  fs::remove_all(partial);
  fs::create_directories(partial);

  {
    std::ofstream out(partial / "meta");
    detail::write_artifact_header(out, "checkpoint", result.config_hash, seed);
    out << "mode " << train_mode_name(model.mode) << '\n';
    out << "languages";
    for (const auto& l : model.languages) out << ' ' << l;
    out << '\n';
    out << "skipped_infeasible " << result.skipped_infeasible << '\n';
  }
  {
    std::ofstream out(partial / "config.snapshot");
    out << result.snapshot;
  }
  {
    std::ofstream out(partial / "encoder.params");
    detail::write_artifact_header(out, "params", result.config_hash, seed);
    std::vector<std::pair<std::string, const Tensor*>> tensors;
    for (const auto& name : model.params.order)
      tensors.push_back({name, &model.params.at(name)});
    detail::save_tensors(out, tensors);
  }
  {
    std::ofstream out(partial / "optim.state");
    detail::write_artifact_header(out, "optimizer", result.config_hash, seed);
    out << "step " << result.optim.step << '\n';
    out << "skipped " << result.optim.skipped << '\n';
    std::vector<std::pair<std::string, const Tensor*>> tensors;
    for (const auto& [name, slot] : result.optim.slots) {
      tensors.push_back({"m." + name, &slot.m});
      tensors.push_back({"v." + name, &slot.v});
    }
    detail::save_tensors(out, tensors);
  }
  {
    std::ofstream out(partial / "loss_curve.tsv");
    detail::write_artifact_header(out, "loss-curve", result.config_hash, seed);
    out << "skipped_infeasible " << result.skipped_infeasible << '\n';
    for (std::size_t i = 0; i < result.loss_curve.size(); ++i)
      out << "epoch " << i << " loss " << precise(result.loss_curve[i]) << '\n';
  }
  {
    std::ofstream out(partial / "axes.tsv");
    for (const auto& lang : model.languages) {
      out << lang;
      for (const auto& s : model.phoneme_axis(lang)) out << '\t' << s;
      out << '\n';
    }
  }
  save_inventory(model.inventory, (partial / "phones.tsv").string());
  if (!model.mappings.empty()) {
    std::ofstream out(partial / "mappings.tsv");
    save_mappings(model.mappings, model.inventory, out);
  }
  for (const auto& [lang, graph] : model.graphs)
    save_graph(graph, model.inventory, (partial / (lang + ".graph")).string(),
               result.config_hash, seed);

  fs::remove_all(dir);
  fs::rename(partial, dir);
}

struct Checkpoint {
  Model model;
  AdamState optim;
  std::map<std::string, std::string> snapshot;
  std::string config_hash;
  std::uint64_t seed = 0;
};

inline Checkpoint load_checkpoint(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::exists(fs::path(dir) / "meta"))
    throw_data("'" + dir + "' is not a checkpoint directory (no meta)");
  Checkpoint ckpt;
  auto meta = load_keyvalue((fs::path(dir) / "meta").string());
  ckpt.config_hash = meta.count("config_hash") ? meta["config_hash"] : "";
  ckpt.seed =
      meta.count("seed") ? std::strtoull(meta["seed"].c_str(), nullptr, 10) : 0;

  Model& model = ckpt.model;
  model.mode = train_mode_from(meta.at("mode"));
  model.languages = split_ws(meta.at("languages"));
  model.inventory = load_inventory((fs::path(dir) / "phones.tsv").string());

  {
    std::ifstream in(fs::path(dir) / "config.snapshot");
    if (!in) throw_data(dir + ": missing config.snapshot");
    std::string line;
    while (std::getline(in, line)) {
      const auto pos = line.find('=');
      if (pos != std::string::npos)
        ckpt.snapshot[line.substr(0, pos)] = line.substr(pos + 1);
    }
  }
  model.encoder.input_dim =
      std::strtoull(ckpt.snapshot.at("encoder.input_dim").c_str(), nullptr, 10);
  model.encoder.output_dim =
      std::strtoull(ckpt.snapshot.at("encoder.output_dim").c_str(), nullptr, 10);
  for (const auto& h : split_ws(ckpt.snapshot.at("encoder.hidden")))
    model.encoder.hidden.push_back(std::strtoull(h.c_str(), nullptr, 10));
  model.encoder.subsample =
      std::strtoull(ckpt.snapshot.at("encoder.subsample").c_str(), nullptr, 10);
  model.encoder.act = nonlinearity_from(ckpt.snapshot.at("encoder.activation"));

  {
    std::ifstream in(fs::path(dir) / "encoder.params");
    if (!in) throw_data(dir + ": missing encoder.params");
    for (auto& [name, tensor] :
         detail::load_tensors(in, (fs::path(dir) / "encoder.params").string()))
      model.params.add(name, std::move(tensor));
  }
  {
    const auto path = fs::path(dir) / "optim.state";
    if (fs::exists(path)) {
      std::ifstream in(path);
      auto kv = load_keyvalue(path.string());
      ckpt.optim.step = kv.count("step")
                            ? std::strtoull(kv["step"].c_str(), nullptr, 10)
                            : 0;
      ckpt.optim.skipped =
          kv.count("skipped") ? std::strtoull(kv["skipped"].c_str(), nullptr, 10)
                              : 0;
      std::ifstream tin(path);
      for (auto& [name, tensor] : detail::load_tensors(tin, path.string())) {
        if (name.rfind("m.", 0) == 0)
          ckpt.optim.slots[name.substr(2)].m = std::move(tensor);
        else if (name.rfind("v.", 0) == 0)
          ckpt.optim.slots[name.substr(2)].v = std::move(tensor);
      }
    }
  }
  {
    std::ifstream in(fs::path(dir) / "axes.tsv");
    if (!in) throw_data(dir + ": missing axes.tsv");
    std::string line;
    while (std::getline(in, line)) {
      std::string t = trim(line);
      if (t.empty()) continue;
      auto cols = split(t, '\t');
      model.phoneme_axes[cols[0]] =
          std::vector<std::string>(cols.begin() + 1, cols.end());
    }
  }
  if (fs::exists(fs::path(dir) / "mappings.tsv")) {
    auto mappings =
        load_mappings((fs::path(dir) / "mappings.tsv").string(), model.inventory);
    for (auto& [lang, table] : mappings) model.mappings.emplace(lang, table);
  }
  for (const auto& lang : model.languages) {
    const auto gpath = fs::path(dir) / (lang + ".graph");
    if (fs::exists(gpath))
      model.graphs.emplace(lang, load_graph(gpath.string(), model.inventory));
    else if (model.mode == TrainMode::kAlloMatrix)
      model.matrices.emplace(
          lang, build_allomatrix(model.mappings.at(lang),
                                 model.inventory.size()));
  }
  return ckpt;
}

inline TrainResult train(const Corpus& corpus, const PhoneInventory& inventory,
                         const std::map<std::string, MappingTable>& mappings,
                         const TrainConfig& config, const Checkpoint* resume) {
  if (config.epochs == 0) throw_config("epochs must be >= 1");
  if (config.batch_size == 0) throw_config("batch size must be >= 1");

  TrainResult result;
  if (resume) {
    if (resume->model.mode != config.mode)
      throw_config("resume checkpoint was trained in mode " +
                   std::string(train_mode_name(resume->model.mode)) +
                   ", requested " + train_mode_name(config.mode));
    if (resume->model.encoder.input_dim != corpus.feature_dim)
      throw_data("resume checkpoint expects feature dim " +
                 std::to_string(resume->model.encoder.input_dim) +
                 ", corpus has " + std::to_string(corpus.feature_dim));
    result.model = resume->model;
    result.optim = resume->optim;
  } else {
    result.model = build_model(config, inventory, mappings, corpus);
  }
  Model& model = result.model;
  {
    auto fields = config.snapshot_fields();
    if (fields["languages"].empty()) {
      std::string langs;
      for (const auto& l : model.languages)
        langs += (langs.empty() ? "" : " ") + l;
      fields["languages"] = langs;
    }
    fields["encoder.input_dim"] = std::to_string(model.encoder.input_dim);
    result.snapshot = canonical_snapshot(fields);
    result.config_hash = hash_hex(result.snapshot);
  }

  // Convert transcripts once; drop infeasible utterances with a count.
  std::map<std::string, std::vector<detail::PreparedUtterance>> prepared;
  for (const auto& lang : model.languages) {
    if (!corpus.utterances.count(lang))
      throw_data("corpus has no language '" + lang + "'");
    for (const auto& utt : corpus.utterances.at(lang)) {
      detail::PreparedUtterance pu;
      pu.utt = &utt;
      pu.labels = model.target_ids(lang, utt.phonemes);
      const std::size_t frames =
          (utt.features.shape[0] + model.encoder.subsample - 1) /
          model.encoder.subsample;
      if (pu.labels.empty() || frames < ctc_min_frames(pu.labels)) {
        ++result.skipped_infeasible;
        continue;
      }
      prepared[lang].push_back(std::move(pu));
    }
    if (prepared[lang].empty())
      throw_data("language '" + lang + "' has no trainable utterances");
  }

  auto trainable = model.trainable();
  std::map<std::string, double> lr_scales;
  for (const auto& [name, _] : trainable)
    if (name.rfind("graph.", 0) == 0) lr_scales[name] = config.graph_lr_scale();

  AdamState& optim = result.optim;
  std::mt19937_64 shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ull);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    // Length-bucketed batches per language, bucket order shuffled per epoch,
    // then interleaved round-robin across languages.
    std::map<std::string, std::vector<std::vector<const detail::PreparedUtterance*>>>
        buckets;
    for (const auto& lang : model.languages) {
      auto& pus = prepared[lang];
      std::vector<const detail::PreparedUtterance*> ptrs;
      for (const auto& pu : pus) ptrs.push_back(&pu);
      std::stable_sort(ptrs.begin(), ptrs.end(),
                       [](const auto* a, const auto* b) {
                         return a->utt->features.shape[0] <
                                b->utt->features.shape[0];
                       });
      auto& lang_buckets = buckets[lang];
      for (std::size_t i = 0; i < ptrs.size(); i += config.batch_size) {
        lang_buckets.emplace_back(
            ptrs.begin() + i,
            ptrs.begin() + std::min(ptrs.size(), i + config.batch_size));
      }
      std::shuffle(lang_buckets.begin(), lang_buckets.end(), shuffle_rng);
    }

    double epoch_loss = 0.0;
    std::size_t epoch_count = 0;
    bool any = true;
    std::size_t round = 0;
    while (any) {
      any = false;
      for (const auto& lang : model.languages) {
        auto& lang_buckets = buckets[lang];
        if (round >= lang_buckets.size()) continue;
        any = true;
        const auto& batch = lang_buckets[round];

        std::vector<detail::ShardResult> shards;
        if (config.threads <= 1 || batch.size() < 2 * config.threads) {
          shards.push_back(detail::run_shard(model, batch));
        } else {
          const std::size_t per =
              (batch.size() + config.threads - 1) / config.threads;
          std::vector<std::future<detail::ShardResult>> futures;
          for (std::size_t s = 0; s < batch.size(); s += per) {
            std::vector<const detail::PreparedUtterance*> shard(
                batch.begin() + s,
                batch.begin() + std::min(batch.size(), s + per));
            futures.push_back(std::async(std::launch::async, [&model,
                                                              shard]() {
              return detail::run_shard(model, shard);
            }));
          }
          for (auto& f : futures) shards.push_back(f.get());
        }

        std::map<std::string, Tensor> grads;
        double loss_sum = 0.0;
        std::size_t count = 0;
        for (const auto& shard : shards) {  // fixed order merge
          loss_sum += shard.loss_sum;
          count += shard.count;
          for (const auto& [name, g] : shard.grads) {
            auto it = grads.find(name);
            if (it == grads.end()) {
              grads.emplace(name, g);
            } else {
              for (std::size_t i = 0; i < g.data.size(); ++i)
                it->second.data[i] += g.data[i];
            }
          }
        }
        if (count == 0) continue;
        for (auto& [name, g] : grads)
          for (double& v : g.data) v /= double(count);
        adam_step(config.adam, optim, trainable, grads, lr_scales);
        epoch_loss += loss_sum;
        epoch_count += count;
      }
      ++round;
    }
    result.loss_curve.push_back(epoch_count ? epoch_loss / double(epoch_count)
                                            : 0.0);
  }
  return result;
}

}  // namespace allograph

#endif  // ALLOGRAPH_TRAIN_HPP_
