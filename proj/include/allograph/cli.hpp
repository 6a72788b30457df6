// allograph/cli.hpp
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
// Command-line entry points. Subcommands:
//
//   gen-synthetic  generate a corpus from a synthetic spec (seed required)
//   train          train a model on a corpus (seed required)
//   eval           score phoneme and phone decodes of a corpus
//   align          dump joint phone/phoneme forced alignments
//   inspect-graph  print a language's learned arc weights
//   discover       allophone discovery report over alignments
//   pronunciations pronunciation-variant report against a lexicon
//   gradcheck      finite-difference check battery
//
// Flags are long-form only. `--config FILE` names a key=value file whose
// entries override flags. Errors print one machine-parseable line
// `ERROR <category>: <message>` and exit with 2 (config), 3 (data),
// 4 (numeric), or 5 (infeasible).

#ifndef ALLOGRAPH_CLI_HPP_
#define ALLOGRAPH_CLI_HPP_

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "allograph/common.hpp"
#include "allograph/corpus.hpp"
#include "allograph/ctc.hpp"
#include "allograph/discovery.hpp"
#include "allograph/encoder.hpp"
#include "allograph/graph.hpp"
#include "allograph/inventory.hpp"
#include "allograph/mapping.hpp"
#include "allograph/metrics.hpp"
#include "allograph/synthetic.hpp"
#include "allograph/train.hpp"

namespace allograph::cli {

namespace fs = std::filesystem;

// ---- option registry ----

class Options {
 public:
  void add(const std::string& name, std::string* target, const char* help,
           bool required = false) {
    register_option(name, help, required,
                    [target](const std::string& v) { *target = v; });
  }
  void add(const std::string& name, std::size_t* target, const char* help,
           bool required = false) {
    register_option(name, help, required, [target, name](const std::string& v) {
      char* end = nullptr;
      *target = std::strtoull(v.c_str(), &end, 10);
      if (end == v.c_str() || *end)
        throw_config("--" + name + " expects an integer, got '" + v + "'");
    });
  }
  void add(const std::string& name, double* target, const char* help,
           bool required = false) {
    register_option(name, help, required, [target, name](const std::string& v) {
      char* end = nullptr;
      *target = std::strtod(v.c_str(), &end);
      if (end == v.c_str() || *end)
        throw_config("--" + name + " expects a number, got '" + v + "'");
    });
  }

  // Applies flag values then config-file values; the file wins.
  void parse(const std::vector<std::pair<std::string, std::string>>& args) {
    std::map<std::string, std::string> merged;
    std::string config_path;
    for (const auto& [key, value] : args) {
      if (key == "config") {
        config_path = value;
        continue;
      }
      merged[key] = value;
    }
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw_config("cannot open config file '" + config_path + "'");
      std::string line;
      std::size_t lineno = 0;
      while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto pos = t.find('=');
        if (pos == std::string::npos)
          throw_config(config_path + ":" + std::to_string(lineno) +
                       ": expected key=value");
        merged[trim(t.substr(0, pos))] = trim(t.substr(pos + 1));
      }
    }
    for (const auto& [key, value] : merged) {
      auto it = setters_.find(key);
      if (it == setters_.end()) throw_config("unknown option --" + key);
      it->second(value);
      provided_.insert(key);
    }
    for (const auto& name : required_)
      if (!provided_.count(name))
        throw_config("missing required option --" + name);
    resolved_ = merged;
  }

  bool provided(const std::string& name) const { return provided_.count(name); }

  // Canonical resolved-option text; its hash stamps every artifact.
  std::string snapshot(const std::string& command) const {
    std::string s = "command=" + command + "\n";
    for (const auto& [k, v] : resolved_) s += k + "=" + v + "\n";
    return s;
  }

  std::string usage() const {
    std::string s;
    for (const auto& [name, help] : help_) {
      s += "  --" + name;
      if (required_.count(name)) s += " (required)";
      s += "\n      " + help + "\n";
    }
    return s;
  }

 private:
  void register_option(const std::string& name, const char* help, bool required,
                       std::function<void(const std::string&)> setter) {
    setters_[name] = std::move(setter);
    help_[name] = help;
    if (required) required_.insert(name);
  }

  std::map<std::string, std::function<void(const std::string&)>> setters_;
  std::map<std::string, std::string> help_;
  std::set<std::string> required_;
  std::set<std::string> provided_;
  std::map<std::string, std::string> resolved_;
};

inline std::vector<std::pair<std::string, std::string>> split_flags(
    int argc, char** argv, int start) {
  std::vector<std::pair<std::string, std::string>> args;
  for (int i = start; i < argc; ++i) {
    std::string a = argv[i];
    if (a.rfind("--", 0) != 0)
      throw_config("expected a --flag, got '" + a + "' (flags are long-form only)");
    a = a.substr(2);
    const auto eq = a.find('=');
    if (eq != std::string::npos) {
      args.push_back({a.substr(0, eq), a.substr(eq + 1)});
    } else {
      if (i + 1 >= argc) throw_config("--" + a + " needs a value");
      args.push_back({a, argv[++i]});
    }
  }
  return args;
}

// Writes a whole file through a temporary so error paths leave nothing
// half-written.
inline void write_file_atomic(const std::string& path, const std::string& body) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw_data("cannot write '" + path + "'");
    out << body;
  }
  fs::rename(tmp, path);
}

inline void artifact_header(std::ostream& out, const std::string& kind,
                            const std::string& config_hash, std::uint64_t seed) {
  out << "# allograph " << kind << '\n';
  out << "version " << kVersion << '\n';
  out << "config_hash " << config_hash << '\n';
  out << "seed " << seed << '\n';
}

// ---- shared helpers ----

struct LoadedCheckpoint {
  Checkpoint ckpt;
  std::string dir;
};

inline LoadedCheckpoint open_checkpoint(const std::string& dir) {
  return {load_checkpoint(dir), dir};
}

inline void check_corpus_compatible(const Model& model, const Corpus& corpus) {
  if (corpus.feature_dim != model.encoder.input_dim)
    throw_data("corpus feature dim " + std::to_string(corpus.feature_dim) +
               " does not match the checkpoint's encoder input dim " +
               std::to_string(model.encoder.input_dim));
}

inline std::vector<std::string> decode_phonemes(const Model& model,
                                                const Tensor& features,
                                                const std::string& lang) {
  const Tensor lat = phoneme_log_posteriors(model, features, lang);
  const auto& axis = model.phoneme_axis(lang);
  std::vector<std::string> out;
  for (int id : best_path_decode(lat)) out.push_back(axis.at(id));
  return out;
}

inline std::vector<std::string> decode_phones(const Model& model,
                                              const Tensor& features) {
  const Tensor lat = phone_log_posteriors(model, features);
  std::vector<std::string> out;
  for (int id : best_path_decode(lat)) out.push_back(model.inventory.symbol(id));
  return out;
}

inline Tensor slice_rows(const Tensor& t, std::size_t begin, std::size_t end) {
  Tensor out = Tensor::zeros({end - begin, t.shape[1]});
  for (std::size_t r = begin; r < end; ++r)
    for (std::size_t c = 0; c < t.shape[1]; ++c)
      out.at(r - begin, c) = t.at(r, c);
  return out;
}

// ---- subcommands ----

inline int cmd_gen_synthetic(const std::vector<std::pair<std::string, std::string>>& args) {
  std::string spec_path, inventory_path, out_dir;
  std::uint64_t seed = 0;
  Options opt;
  opt.add("spec", &spec_path, "synthetic spec JSON", true);
  opt.add("inventory", &inventory_path, "phone inventory / feature table", true);
  opt.add("out", &out_dir, "output corpus directory", true);
  opt.add("seed", &seed, "generation seed", true);
  opt.parse(args);

  PhoneInventory inventory = load_inventory(inventory_path);
  SyntheticSpec spec = load_synthetic_spec(spec_path);
  GeneratedCorpus gen = generate_synthetic(spec, inventory, seed);
  gen.corpus.config_hash = hash_hex(opt.snapshot("gen-synthetic"));
  if (fs::exists(out_dir) && !fs::is_empty(fs::path(out_dir)))
    throw_config("output directory '" + out_dir + "' already exists");
  write_generated(gen, inventory, out_dir);
  std::cout << "wrote " << gen.corpus.total() << " utterances across "
            << gen.corpus.languages.size() << " languages to " << out_dir
            << "\n";
  return 0;
}

inline int cmd_train(const std::vector<std::pair<std::string, std::string>>& args) {
  std::string corpus_dir, out_dir, mode_str = "allograph-uc";
  std::string inventory_path, mappings_path, languages_str, hidden_str = "32";
  std::string activation = "tanh", resume_dir;
  TrainConfig config;
  std::uint64_t seed = 0;
  std::size_t encoder_dim = 32, subsample = 1, verbosity = 1;
  Options opt;
  opt.add("corpus", &corpus_dir, "corpus directory", true);
  opt.add("out", &out_dir, "checkpoint output directory", true);
  opt.add("mode", &mode_str,
          "phoneme-only | allomatrix | allograph-free | allograph-uc");
  opt.add("seed", &seed, "training seed", true);
  opt.add("inventory", &inventory_path, "phone inventory (default: corpus copy)");
  opt.add("mappings", &mappings_path, "mapping file (default: corpus copy)");
  opt.add("languages", &languages_str, "space-separated language subset");
  opt.add("epochs", &config.epochs, "training epochs");
  opt.add("batch-size", &config.batch_size, "utterances per step");
  opt.add("lr", &config.adam.lr, "Adam learning rate");
  opt.add("graph-lr", &config.graph_lr, "learning rate for graph weights");
  opt.add("beta1", &config.adam.beta1, "Adam beta1");
  opt.add("beta2", &config.adam.beta2, "Adam beta2");
  opt.add("eps", &config.adam.eps, "Adam epsilon");
  opt.add("warmup-steps", &config.adam.warmup_steps, "linear warmup steps");
  opt.add("threads", &config.threads, "parallel shard workers per step");
  opt.add("hidden", &hidden_str, "encoder hidden widths, space-separated");
  opt.add("encoder-dim", &encoder_dim, "encoder output dimension");
  opt.add("subsample", &subsample, "mean-pool frame subsampling factor");
  opt.add("activation", &activation, "none | tanh | relu");
  opt.add("resume", &resume_dir, "checkpoint directory to continue from");
  opt.add("verbosity", &verbosity, "0 silent, 1 progress");
  opt.parse(args);

  config.mode = train_mode_from(mode_str);
  config.seed = seed;
  config.languages = split_ws(languages_str);
  config.encoder.output_dim = encoder_dim;
  config.encoder.subsample = subsample;
  config.encoder.act = nonlinearity_from(activation);
  config.encoder.hidden.clear();
  for (const auto& h : split_ws(hidden_str))
    config.encoder.hidden.push_back(std::strtoull(h.c_str(), nullptr, 10));

  if (fs::exists(out_dir) && !fs::is_empty(fs::path(out_dir)))
    throw_config("checkpoint directory '" + out_dir + "' already exists");

  Corpus corpus = load_corpus(corpus_dir);
  if (inventory_path.empty())
    inventory_path = (fs::path(corpus_dir) / "phones.tsv").string();
  if (!fs::exists(inventory_path))
    throw_config("no inventory file at '" + inventory_path + "'");
  PhoneInventory inventory = load_inventory(inventory_path);

  std::map<std::string, MappingTable> mappings;
  if (mappings_path.empty()) {
    const auto candidate = fs::path(corpus_dir) / "mappings.tsv";
    if (fs::exists(candidate)) mappings_path = candidate.string();
  }
  if (!mappings_path.empty()) {
    if (!fs::exists(mappings_path))
      throw_config("no mapping file at '" + mappings_path + "'");
    mappings = load_mappings(mappings_path, inventory);
  } else if (mode_uses_phones(config.mode)) {
    throw_config("mode " + mode_str +
                 " needs a mapping file (none given, none in the corpus)");
  }

  std::optional<Checkpoint> resume;
  if (!resume_dir.empty()) resume = load_checkpoint(resume_dir);

  TrainResult result =
      train(corpus, inventory, mappings, config, resume ? &*resume : nullptr);
  if (verbosity > 0) {
    std::cerr << "trained " << config.epochs << " epochs; loss "
              << precise(result.loss_curve.front()) << " -> "
              << precise(result.loss_curve.back());
    if (result.skipped_infeasible)
      std::cerr << " (skipped " << result.skipped_infeasible
                << " infeasible utterances)";
    if (result.optim.skipped)
      std::cerr << " (skipped " << result.optim.skipped
                << " steps on non-finite gradients)";
    std::cerr << "\n";
  }
  save_checkpoint(result, out_dir, seed);
  std::cout << "checkpoint written to " << out_dir << "\n";
  return 0;
}

namespace detail {

struct EvalAccumulator {
  std::map<std::string, std::vector<std::string>> hyp, ref;
};

inline void write_language_report(std::ostream& out, const std::string& lang,
                                  const ScoreReport& report,
                                  const std::string& level) {
  out << "language " << lang << '\n';
  write_score_report(report, level, out);
  out << "end_language " << lang << '\n';
}

}  // namespace detail

inline int cmd_eval(const std::vector<std::pair<std::string, std::string>>& args) {
  std::string ckpt_dir, corpus_dir, out_prefix, languages_str;
  Options opt;
  opt.add("checkpoint", &ckpt_dir, "checkpoint directory", true);
  opt.add("corpus", &corpus_dir, "corpus directory", true);
  opt.add("out", &out_prefix, "report path prefix", true);
  opt.add("languages", &languages_str, "space-separated language subset");
  opt.parse(args);

  LoadedCheckpoint loaded = open_checkpoint(ckpt_dir);
  const Model& model = loaded.ckpt.model;
  Corpus corpus = load_corpus(corpus_dir);
  check_corpus_compatible(model, corpus);
  const std::string config_hash = hash_hex(opt.snapshot("eval"));

  std::vector<std::string> langs =
      languages_str.empty() ? corpus.languages : split_ws(languages_str);

  // Phoneme-level scoring for seen languages.
  std::ostringstream phoneme_out;
  artifact_header(phoneme_out, "score-report", config_hash, loaded.ckpt.seed);
  detail::EvalAccumulator total;
  for (const auto& lang : langs) {
    if (!model.has_language(lang)) continue;  // unseen: no phoneme head
    detail::EvalAccumulator acc;
    for (const auto& utt : corpus.utterances.at(lang)) {
      acc.hyp[utt.id] = decode_phonemes(model, utt.features, lang);
      acc.ref[utt.id] = utt.phonemes;
      total.hyp[utt.id] = acc.hyp[utt.id];
      total.ref[utt.id] = utt.phonemes;
    }
    detail::write_language_report(phoneme_out, lang,
                                  score(acc.hyp, acc.ref, model.inventory),
                                  "phoneme");
  }
  if (!total.ref.empty())
    detail::write_language_report(phoneme_out, "TOTAL",
                                  score(total.hyp, total.ref, model.inventory),
                                  "phoneme");
  write_file_atomic(out_prefix + ".phoneme.report", phoneme_out.str());

  // Phone-level scoring wherever a phone reference sidecar exists.
  std::vector<std::string> phone_langs;
  for (const auto& lang : langs)
    if (fs::exists(fs::path(corpus_dir) / (lang + ".refphones")))
      phone_langs.push_back(lang);

  if (!phone_langs.empty()) {
    std::ostringstream phone_out;
    artifact_header(phone_out, "score-report", config_hash, loaded.ckpt.seed);
    if (!mode_uses_phones(model.mode)) {
      phone_out << "no_phone_predictions 1\n";
    } else {
      detail::EvalAccumulator ptotal;
      for (const auto& lang : phone_langs) {
        auto refs = load_ref_phones(corpus_dir, lang);
        detail::EvalAccumulator acc;
        for (const auto& utt : corpus.utterances.at(lang)) {
          auto it = refs.find(utt.id);
          if (it == refs.end()) continue;
          acc.hyp[utt.id] = decode_phones(model, utt.features);
          acc.ref[utt.id] = it->second;
          ptotal.hyp[utt.id] = acc.hyp[utt.id];
          ptotal.ref[utt.id] = it->second;
        }
        detail::write_language_report(phone_out, lang,
                                      score(acc.hyp, acc.ref, model.inventory),
                                      "phone");
      }
      if (!ptotal.ref.empty())
        detail::write_language_report(phone_out, "TOTAL",
                                      score(ptotal.hyp, ptotal.ref,
                                            model.inventory),
                                      "phone");
    }
    write_file_atomic(out_prefix + ".phone.report", phone_out.str());
  }
  std::cout << "reports written to " << out_prefix << ".*.report\n";
  return 0;
}

// Alignments for every utterance of one language; alignment failures are
// counted, not fatal.
inline std::vector<std::pair<const Utterance*, AlignmentPath>> align_language(
    const Model& model, const Corpus& corpus, const std::string& lang,
    std::size_t* infeasible) {
  if (!model.has_language(lang))
    throw_data("checkpoint has no language '" + lang + "'");
  if (!mode_uses_phones(model.mode))
    throw_infeasible("no phone predictions: model was trained phoneme-only");
  auto git = model.graphs.find(lang);
  if (git == model.graphs.end())
    throw_data("checkpoint has no allophone graph for language '" + lang +
               "' (mode " + train_mode_name(model.mode) + ")");
  std::vector<std::pair<const Utterance*, AlignmentPath>> out;
  if (infeasible) *infeasible = 0;
  auto cit = corpus.utterances.find(lang);
  if (cit == corpus.utterances.end())
    throw_data("corpus has no language '" + lang + "'");
  for (const auto& utt : cit->second) {
    const Tensor phones = phone_log_posteriors(model, utt.features);
    const std::vector<int> target = model.target_ids(lang, utt.phonemes);
    auto path = forced_align(phones, git->second, target);
    if (!path) {
      if (infeasible) ++*infeasible;
      continue;
    }
    out.emplace_back(&utt, std::move(*path));
  }
  return out;
}

inline int cmd_align(const std::vector<std::pair<std::string, std::string>>& args) {
  std::string ckpt_dir, corpus_dir, lang, out_path;
  Options opt;
  opt.add("checkpoint", &ckpt_dir, "checkpoint directory", true);
  opt.add("corpus", &corpus_dir, "corpus directory", true);
  opt.add("language", &lang, "language to align", true);
  opt.add("out", &out_path, "alignment dump path", true);
  opt.parse(args);

  LoadedCheckpoint loaded = open_checkpoint(ckpt_dir);
  Corpus corpus = load_corpus(corpus_dir);
  check_corpus_compatible(loaded.ckpt.model, corpus);

  std::size_t infeasible = 0;
  auto aligned = align_language(loaded.ckpt.model, corpus, lang, &infeasible);

  std::ostringstream out;
  artifact_header(out, "alignments", hash_hex(opt.snapshot("align")),
                  loaded.ckpt.seed);
  out << "language " << lang << '\n';
  out << "infeasible " << infeasible << '\n';
  const Model& model = loaded.ckpt.model;
  const auto& axis = model.phoneme_axis(lang);
  for (const auto& [utt, path] : aligned) {
    out << "utt " << utt->id << " log_prob " << precise(path.log_prob) << '\n';
    for (const auto& f : path.frames) {
      out << "frame " << f.frame << ' '
          << (f.phone < 0 ? "∅" : model.inventory.symbol(f.phone)) << ' '
          << (f.phoneme < 0 ? "∅" : axis.at(f.phoneme)) << ' '
          << precise(f.log_score) << '\n';
    }
    out << "phones";
    for (int p : path.collapsed_phones) out << ' ' << model.inventory.symbol(p);
    out << '\n' << "phonemes";
    for (int m : path.phoneme_tokens) out << ' ' << axis.at(m);
    out << '\n';
  }
  write_file_atomic(out_path, out.str());
  std::cout << "aligned " << aligned.size() << " utterances ("
            << infeasible << " infeasible) to " << out_path << "\n";
  return 0;
}

inline int cmd_inspect_graph(
    const std::vector<std::pair<std::string, std::string>>& args) {
  std::string ckpt_dir, lang, out_path;
  Options opt;
  opt.add("checkpoint", &ckpt_dir, "checkpoint directory", true);
  opt.add("language", &lang, "language whose graph to print", true);
  opt.add("out", &out_path, "output path (default stdout)");
  opt.parse(args);

  LoadedCheckpoint loaded = open_checkpoint(ckpt_dir);
  const Model& model = loaded.ckpt.model;
  auto git = model.graphs.find(lang);
  if (git == model.graphs.end())
    throw_data("checkpoint has no allophone graph for language '" + lang + "'");
  const AllophoneGraph& graph = git->second;
  const Tensor weights = effective_weights(graph);

  std::ostringstream out;
  artifact_header(out, "graph-inspection", hash_hex(opt.snapshot("inspect-graph")),
                  loaded.ckpt.seed);
  out << "language " << lang << '\n';
  out << "mode " << graph_mode_name(graph.mode) << '\n';

  // Stable order: phones by universal index, arcs by phoneme index.
  std::map<std::size_t, std::vector<std::size_t>> by_phone;
  for (std::size_t a = 0; a < graph.arcs.size(); ++a)
    by_phone[graph.arcs[a].phone].push_back(a);
  for (auto& [phone, arcs] : by_phone) {
    std::sort(arcs.begin(), arcs.end(), [&](std::size_t x, std::size_t y) {
      return graph.arcs[x].phoneme < graph.arcs[y].phoneme;
    });
    out << "phone [" << model.inventory.symbol(phone) << "]\n";
    for (std::size_t a : arcs) {
      out << "  -> /" << graph.phoneme_symbols[graph.arcs[a].phoneme] << "/ "
          << fixed6(weights.data[a]);
      if (weights.data[a] > 0.5) out << " *";  // dominant arc
      out << '\n';
    }
  }
  out << "blank ∅ -> ∅ 1\n";

  if (out_path.empty())
    std::cout << out.str();
  else {
    write_file_atomic(out_path, out.str());
    std::cout << "graph inspection written to " << out_path << "\n";
  }
  return 0;
}

inline int cmd_discover(const std::vector<std::pair<std::string, std::string>>& args) {
  std::string ckpt_dir, corpus_dir, lang, out_path;
  std::size_t min_count = 5;
  Options opt;
  opt.add("checkpoint", &ckpt_dir, "checkpoint directory", true);
  opt.add("corpus", &corpus_dir, "corpus directory", true);
  opt.add("language", &lang, "language to analyze", true);
  opt.add("out", &out_path, "report path", true);
  opt.add("min-count", &min_count, "hypothesized-mapping token threshold");
  opt.parse(args);

  LoadedCheckpoint loaded = open_checkpoint(ckpt_dir);
  Corpus corpus = load_corpus(corpus_dir);
  check_corpus_compatible(loaded.ckpt.model, corpus);
  const Model& model = loaded.ckpt.model;
  auto mit = model.mappings.find(lang);
  if (mit == model.mappings.end())
    throw_data("checkpoint has no mapping table for language '" + lang + "'");

  std::size_t infeasible = 0;
  auto aligned = align_language(model, corpus, lang, &infeasible);
  std::vector<AlignmentPath> paths;
  paths.reserve(aligned.size());
  for (auto& [utt, path] : aligned) paths.push_back(std::move(path));
  auto stats =
      discover_allophones(paths, mit->second, model.inventory, min_count);

  std::ostringstream out;
  artifact_header(out, "discovery-report", hash_hex(opt.snapshot("discover")),
                  loaded.ckpt.seed);
  out << "infeasible " << infeasible << '\n';
  write_discovery_report(stats, lang, out);
  write_file_atomic(out_path, out.str());
  std::cout << "discovery report (" << stats.size() << " rows) written to "
            << out_path << "\n";
  return 0;
}

inline int cmd_pronunciations(
    const std::vector<std::pair<std::string, std::string>>& args) {
  std::string ckpt_dir, corpus_dir, lang, lexicon_path, out_path;
  Options opt;
  opt.add("checkpoint", &ckpt_dir, "checkpoint directory", true);
  opt.add("corpus", &corpus_dir, "corpus directory", true);
  opt.add("language", &lang, "language to analyze", true);
  opt.add("lexicon", &lexicon_path, "word lexicon (default: corpus copy)");
  opt.add("out", &out_path, "report path", true);
  opt.parse(args);

  LoadedCheckpoint loaded = open_checkpoint(ckpt_dir);
  Corpus corpus = load_corpus(corpus_dir);
  check_corpus_compatible(loaded.ckpt.model, corpus);
  const Model& model = loaded.ckpt.model;
  if (lexicon_path.empty()) {
    const auto candidate = fs::path(corpus_dir) / "lexicon.tsv";
    if (!fs::exists(candidate))
      throw_config("no lexicon given and none bundled with the corpus");
    lexicon_path = candidate.string();
  }
  auto lexicon = load_lexicon(lexicon_path);
  auto lit = lexicon.find(lang);
  if (lit == lexicon.end())
    throw_data("lexicon has no entries for language '" + lang + "'");

  std::size_t infeasible = 0;
  auto aligned = align_language(model, corpus, lang, &infeasible);
  const auto& axis = model.phoneme_axis(lang);
  auto git = model.graphs.find(lang);

  std::size_t unannotated = 0;
  std::vector<WordOccurrence> occurrences;
  for (const auto& [utt, path] : aligned) {
    if (utt->word_spans.empty()) {
      ++unannotated;
      continue;
    }
    const Tensor phones = phone_log_posteriors(model, utt->features);
    const Tensor composed = compose_values(phones, git->second);
    for (const auto& [b, e] : utt->word_spans) {
      if (e > path.token_frames.size()) continue;
      WordOccurrence occ;
      occ.ref_phonemes.assign(utt->phonemes.begin() + b,
                              utt->phonemes.begin() + e);
      const std::size_t f0 = path.token_frames[b].first;
      const std::size_t f1 = path.token_frames[e - 1].second;
      for (int id : best_path_decode(slice_rows(composed, f0, f1)))
        occ.recognized.push_back(axis.at(id));
      for (std::size_t i = b; i < e; ++i)
        occ.realized.push_back(model.inventory.symbol(path.phone_tokens[i]));
      occurrences.push_back(std::move(occ));
    }
  }

  std::size_t skipped = 0;
  auto entries = collect_pronunciations(lang, occurrences, lit->second, &skipped);

  std::ostringstream out;
  artifact_header(out, "pronunciation-report",
                  hash_hex(opt.snapshot("pronunciations")), loaded.ckpt.seed);
  out << "infeasible " << infeasible << '\n';
  out << "unannotated_utterances " << unannotated << '\n';
  out << "skipped_no_lexicon " << skipped << '\n';
  write_pronunciation_report(entries, out);
  write_file_atomic(out_path, out.str());
  std::cout << "pronunciation report (" << entries.size()
            << " words) written to " << out_path << "\n";
  return 0;
}

inline int cmd_gradcheck(const std::vector<std::pair<std::string, std::string>>& args) {
  std::uint64_t seed = 1;
  std::string out_path;
  Options opt;
  opt.add("seed", &seed, "seed for the random instances");
  opt.add("out", &out_path, "report path (default stdout)");
  opt.parse(args);

  std::mt19937_64 rng(seed);
  auto random_tensor = [&](std::vector<std::size_t> shape, double lo, double hi) {
    Tensor t = Tensor::zeros(std::move(shape));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : t.data) v = dist(rng);
    return t;
  };
  auto random_log_post = [&](std::size_t T, std::size_t C) {
    Tensor t = random_tensor({T, C}, -2.0, 2.0);
    for (std::size_t r = 0; r < T; ++r) {
      double lse = kLogZero;
      for (std::size_t c = 0; c < C; ++c) lse = logadd(lse, t.at(r, c));
      for (std::size_t c = 0; c < C; ++c) t.at(r, c) -= lse;
    }
    return t;
  };

  std::ostringstream out;
  artifact_header(out, "gradcheck-report", hash_hex(opt.snapshot("gradcheck")),
                  seed);
  bool all_pass = true;
  auto run = [&](const std::string& name, auto build,
                 std::vector<std::pair<std::string, Tensor>> leaves,
                 double tolerance) {
    ad::GradCheckReport rep =
        ad::gradcheck(build, std::move(leaves), 1e-5, tolerance);
    out << "check " << name << " worst_rel_err " << precise(rep.worst) << ' '
        << (rep.all_pass ? "pass" : "FAIL") << " tolerance "
        << precise(tolerance) << '\n';
    all_pass = all_pass && rep.all_pass;
  };

  run("ctc_emissions",
      [](ad::Tape& t, const std::vector<ad::Var>& l) {
        auto res = ctc_loss(t, l[0], {2, 0, 1});
        return res.loss;
      },
      {{"emissions", random_log_post(6, 4)}}, 1e-4);

  for (GraphMode mode : {GraphMode::kUniversalConstraint, GraphMode::kFree}) {
    MappingTable m;
    m.language = "g";
    m.phoneme_symbols = {"A", "B"};
    m.tuples = {{0, 0}, {0, 1}, {1, 1}, {2, 0}};
    AllophoneGraph g = build_graph(m, mode, 3);
    g.params = random_tensor({4}, -1.0, 1.0);
    const Tensor emissions = random_log_post(5, 4);
    run(std::string("compose_") + graph_mode_name(mode),
        [&, g](ad::Tape& t, const std::vector<ad::Var>& l) {
          Lattice lat = make_lattice(t, t.leaf(emissions), SymbolSpace::kPhones,
                                     ValueKind::kLogPosterior);
          Lattice composed = compose(t, lat, g, l[0]);
          auto res = ctc_loss(t, composed.var, {0, 1});
          return res.loss;
        },
        {{"graph_params", g.params}}, 1e-4);
  }

  {
    EncoderConfig cfg;
    cfg.input_dim = 3;
    cfg.hidden = {5};
    cfg.output_dim = 4;
    ParamSet params;
    std::mt19937_64 prng(seed + 1);
    init_encoder_params(cfg, prng, params);
    init_projection_params("phone_head", 4, 4, prng, params);
    MappingTable m;
    m.language = "g";
    m.phoneme_symbols = {"A", "B"};
    m.tuples = {{0, 0}, {1, 1}, {2, 1}};
    AllophoneGraph g = build_graph(m, GraphMode::kUniversalConstraint, 3);
    const Tensor x = random_tensor({4, 3}, -1.0, 1.0);
    std::vector<std::pair<std::string, Tensor>> leaves;
    for (const auto& name : params.order) leaves.push_back({name, params.at(name)});
    leaves.push_back({"graph", g.params});
    run("end_to_end_encoder",
        [&, g](ad::Tape& t, const std::vector<ad::Var>& l) {
          BoundParams bound;
          for (std::size_t i = 0; i + 1 < l.size(); ++i)
            bound.vars.emplace(params.order[i], l[i]);
          ad::Var h = encode(t, cfg, bound, x);
          Lattice lp = softmax_out(t, h, bound, "phone_head", SymbolSpace::kPhones);
          Lattice composed = compose(t, lp, g, l.back());
          auto res = ctc_loss(t, composed.var, {0, 1});
          return res.loss;
        },
        leaves, 1e-3);
  }

  out << (all_pass ? "all_pass 1\n" : "all_pass 0\n");
  if (out_path.empty())
    std::cout << out.str();
  else {
    write_file_atomic(out_path, out.str());
    std::cout << "gradcheck report written to " << out_path << "\n";
  }
  if (!all_pass) throw_numeric("gradient check failed");
  return 0;
}

// ---- dispatch ----

inline int usage() {
  std::cerr
      << "usage: allograph <subcommand> [--flag value ...]\n"
         "subcommands:\n"
         "  gen-synthetic   generate a synthetic corpus (requires --seed)\n"
         "  train           train a model (requires --seed)\n"
         "  eval            score a corpus against a checkpoint\n"
         "  align           dump joint phone/phoneme alignments\n"
         "  inspect-graph   print learned allophone graph weights\n"
         "  discover        allophone discovery report\n"
         "  pronunciations  pronunciation-variant report\n"
         "  gradcheck       finite-difference gradient checks\n"
         "Every subcommand accepts --config FILE (key=value lines override "
         "flags).\n";
  return 2;
}

inline int run(int argc, char** argv) {
  try {
    if (argc < 2) return usage();
    const std::string cmd = argv[1];
    auto args = split_flags(argc, argv, 2);
    if (cmd == "gen-synthetic") return cmd_gen_synthetic(args);
    if (cmd == "train") return cmd_train(args);
    if (cmd == "eval") return cmd_eval(args);
    if (cmd == "align") return cmd_align(args);
    if (cmd == "inspect-graph") return cmd_inspect_graph(args);
    if (cmd == "discover") return cmd_discover(args);
    if (cmd == "pronunciations") return cmd_pronunciations(args);
    if (cmd == "gradcheck") return cmd_gradcheck(args);
    if (cmd == "--help" || cmd == "help") return usage();
    std::cerr << "ERROR config: unknown subcommand '" << cmd << "'\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "ERROR " << error_category_name(e.category()) << ": "
              << e.what() << "\n";
    switch (e.category()) {
      case ErrorCategory::kConfig: return 2;
      case ErrorCategory::kData: return 3;
      case ErrorCategory::kNumeric: return 4;
      case ErrorCategory::kInfeasible: return 5;
    }
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "ERROR internal: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace allograph::cli

#endif  // ALLOGRAPH_CLI_HPP_
