// allograph/synthetic.hpp
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
// Synthetic corpus generation with planted phone-to-phoneme realization
// priors. Each phone gets an orthogonal prototype feature vector; each
// sampled phoneme draws a realized phone from its prior and emits a few
// noisy copies of the prototype. The realized phone strings go to an
// evaluation-only sidecar; training sees phonemic transcripts alone.
//
// Spec files are JSON; see data/specs/ for worked examples.

#ifndef ALLOGRAPH_SYNTHETIC_HPP_
#define ALLOGRAPH_SYNTHETIC_HPP_

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "allograph/common.hpp"
#include "allograph/corpus.hpp"
#include "allograph/inventory.hpp"
#include "allograph/mapping.hpp"

namespace allograph {

struct SyntheticMappingEntry {
  std::string phone;
  std::string phoneme;
  double prior = 0.0;  // P(phone | phoneme) used during generation
  bool mapped = true;  // false keeps the tuple out of the emitted mapping table
};

struct SyntheticWord {
  std::string word;
  std::vector<std::string> phonemes;
  double weight = 1.0;
};

struct SyntheticLanguage {
  std::string name;
  std::vector<std::string> phonemes;
  std::vector<double> phoneme_weights;  // empty means uniform
  std::vector<SyntheticMappingEntry> mappings;
  std::vector<SyntheticWord> words;  // when present, utterances are word strings
  std::size_t utterances = 0;        // 0: use the spec-wide count
  // Frame-wise encoders cannot separate adjacent repeats of one phoneme
  // (identical frames cannot alternate label and blank), so specs aiming
  // for exact decode set this.
  bool no_adjacent_repeats = false;
};

struct SyntheticSpec {
  std::size_t feature_dim = 0;  // 0 means one dimension per distinct phone
  double noise = 0.1;
  double prototype_scale = 1.0;
  int min_frames_per_phone = 2;
  int max_frames_per_phone = 3;
  int min_utterance_tokens = 3;
  int max_utterance_tokens = 8;
  std::size_t utterances_per_language = 100;
  std::uint64_t seed = 0;  // overridden by the CLI's mandatory --seed
  std::vector<SyntheticLanguage> languages;
};

inline SyntheticSpec parse_synthetic_spec(const nlohmann::json& j) {
  SyntheticSpec spec;
  spec.feature_dim = j.value("feature_dim", 0);
  spec.noise = j.value("noise", 0.1);
  spec.prototype_scale = j.value("prototype_scale", 1.0);
  if (j.contains("frames_per_phone")) {
    spec.min_frames_per_phone = j["frames_per_phone"].at(0).get<int>();
    spec.max_frames_per_phone = j["frames_per_phone"].at(1).get<int>();
  }
  if (j.contains("utterance_tokens")) {
    spec.min_utterance_tokens = j["utterance_tokens"].at(0).get<int>();
    spec.max_utterance_tokens = j["utterance_tokens"].at(1).get<int>();
  }
  spec.utterances_per_language = j.value("utterances_per_language", 100);
  spec.seed = j.value("seed", 0);
  if (!j.contains("languages") || !j["languages"].is_array())
    throw_config("synthetic spec needs a `languages` array");
  for (const auto& jl : j["languages"]) {
    SyntheticLanguage lang;
    lang.name = jl.at("name").get<std::string>();
    lang.utterances = jl.value("utterances", 0);
    lang.no_adjacent_repeats = jl.value("no_adjacent_repeats", false);
    for (const auto& p : jl.at("phonemes")) lang.phonemes.push_back(p);
    if (jl.contains("phoneme_weights"))
      for (const auto& w : jl["phoneme_weights"])
        lang.phoneme_weights.push_back(w.get<double>());
    for (const auto& jm : jl.at("mappings")) {
      SyntheticMappingEntry e;
      e.phone = jm.at("phone").get<std::string>();
      e.phoneme = jm.at("phoneme").get<std::string>();
      e.prior = jm.at("prior").get<double>();
      e.mapped = jm.value("mapped", true);
      lang.mappings.push_back(std::move(e));
    }
    if (jl.contains("words"))
      for (const auto& jw : jl["words"]) {
        SyntheticWord w;
        w.word = jw.at("word").get<std::string>();
        for (const auto& p : jw.at("phonemes")) w.phonemes.push_back(p);
        w.weight = jw.value("weight", 1.0);
        lang.words.push_back(std::move(w));
      }
    spec.languages.push_back(std::move(lang));
  }
  return spec;
}

inline SyntheticSpec load_synthetic_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_config("cannot open synthetic spec '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw_config("synthetic spec '" + path + "': " + e.what());
  }
  try {
    return parse_synthetic_spec(j);
  } catch (const nlohmann::json::exception& e) {
    throw_config("synthetic spec '" + path + "': " + e.what());
  }
}

// Distinct phones across all languages, in universal inventory order.
inline std::vector<std::string> spec_phones(const SyntheticSpec& spec,
                                            const PhoneInventory& inventory) {
  std::set<std::size_t> ids;
  for (const auto& lang : spec.languages)
    for (const auto& e : lang.mappings) ids.insert(inventory.id_of(e.phone));
  std::vector<std::string> out;
  for (std::size_t id : ids) out.push_back(inventory.symbol(id));
  return out;
}

inline void validate_synthetic_spec(const SyntheticSpec& spec,
                                    const PhoneInventory& inventory) {
  if (spec.languages.empty()) throw_config("synthetic spec has no languages");
  if (spec.noise < 0.0) throw_config("synthetic spec: negative noise");
  if (spec.min_frames_per_phone < 1 ||
      spec.max_frames_per_phone < spec.min_frames_per_phone)
    throw_config("synthetic spec: bad frames_per_phone range");
  if (spec.min_utterance_tokens < 1 ||
      spec.max_utterance_tokens < spec.min_utterance_tokens)
    throw_config("synthetic spec: bad utterance_tokens range");

  // Phones with positive prior anywhere must be mapped in at least one
  // language; otherwise they could never receive supervision.
  std::set<std::string> mapped_somewhere;
  for (const auto& lang : spec.languages)
    for (const auto& e : lang.mappings)
      if (e.mapped) mapped_somewhere.insert(e.phone);

  for (const auto& lang : spec.languages) {
    if (lang.phonemes.empty())
      throw_config("language '" + lang.name + "': empty phoneme set");
    if (lang.no_adjacent_repeats && lang.phonemes.size() < 2)
      throw_config("language '" + lang.name +
                   "': no_adjacent_repeats needs at least two phonemes");
    if (!lang.phoneme_weights.empty() &&
        lang.phoneme_weights.size() != lang.phonemes.size())
      throw_config("language '" + lang.name + "': phoneme_weights size mismatch");
    std::map<std::string, double> prior_sum;
    for (const auto& e : lang.mappings) {
      inventory.id_of(e.phone);  // throws on unknown phones
      if (std::find(lang.phonemes.begin(), lang.phonemes.end(), e.phoneme) ==
          lang.phonemes.end())
        throw_config("language '" + lang.name + "': mapping references phoneme '" +
                     e.phoneme + "' outside its phoneme list");
      if (e.prior < 0.0)
        throw_config("language '" + lang.name + "': negative realization prior");
      if (e.prior > 0.0 && !mapped_somewhere.count(e.phone))
        throw_config("language '" + lang.name + "': phone '" + e.phone +
                     "' has positive prior but is mapped in no language");
      prior_sum[e.phoneme] += e.prior;
    }
    for (const auto& m : lang.phonemes) {
      auto it = prior_sum.find(m);
      if (it == prior_sum.end())
        throw_config("language '" + lang.name + "': phoneme '" + m +
                     "' has no realization entry");
      if (std::fabs(it->second - 1.0) > 1e-9)
        throw_config("language '" + lang.name + "': realization priors of '" + m +
                     "' sum to " + precise(it->second) + ", expected 1");
    }
    for (const auto& w : lang.words) {
      if (w.phonemes.empty())
        throw_config("word '" + w.word + "' has an empty phoneme string");
      for (const auto& p : w.phonemes)
        if (std::find(lang.phonemes.begin(), lang.phonemes.end(), p) ==
            lang.phonemes.end())
          throw_config("word '" + w.word + "' uses phoneme '" + p +
                       "' outside language '" + lang.name + "'");
    }
  }
}

struct GeneratedCorpus {
  Corpus corpus;
  // language -> utterance id -> planted phone tokens (evaluation only)
  std::map<std::string, std::map<std::string, std::vector<std::string>>> ref_phones;
  std::map<std::string, MappingTable> mappings;
  std::map<std::string, std::vector<LexiconEntry>> lexicon;
  // The spec's phones with their feature rows, in universal order. Bundled
  // as the corpus inventory so models trained on the corpus carry no
  // unsupervisable phone columns.
  PhoneInventory used_inventory;
};

inline GeneratedCorpus generate_synthetic(const SyntheticSpec& spec,
                                          const PhoneInventory& inventory,
                                          std::uint64_t seed) {
  validate_synthetic_spec(spec, inventory);
  GeneratedCorpus gen;
  gen.corpus.seed = seed;

  const std::vector<std::string> phones = spec_phones(spec, inventory);
  for (const auto& p : phones)
    gen.used_inventory.add(inventory.entry(inventory.id_of(p)));
  const std::size_t F = spec.feature_dim ? spec.feature_dim : phones.size();
  if (F < phones.size())
    throw_config("feature_dim " + std::to_string(F) + " is too small for " +
                 std::to_string(phones.size()) + " distinct phones");
  gen.corpus.feature_dim = F;
  std::map<std::string, std::size_t> proto_index;
  for (std::size_t i = 0; i < phones.size(); ++i) proto_index[phones[i]] = i;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_int_distribution<int> frames_dist(spec.min_frames_per_phone,
                                                 spec.max_frames_per_phone);
  std::uniform_int_distribution<int> tokens_dist(spec.min_utterance_tokens,
                                                 spec.max_utterance_tokens);

  for (const auto& lang : spec.languages) {
    gen.corpus.languages.push_back(lang.name);

    // Mapping table over the declared phoneme axis; only `mapped` tuples.
    MappingTable table;
    table.language = lang.name;
    table.phoneme_symbols = lang.phonemes;
    for (const auto& e : lang.mappings)
      if (e.mapped)
        table.tuples.emplace_back(inventory.id_of(e.phone),
                                  table.phoneme_id_or_throw(e.phoneme));
    table.validate();
    gen.mappings.emplace(lang.name, table);

    // Realization priors per phoneme, in declaration order.
    std::map<std::string, std::vector<std::pair<std::string, double>>> priors;
    for (const auto& e : lang.mappings)
      if (e.prior > 0.0) priors[e.phoneme].push_back({e.phone, e.prior});

    const std::vector<double> phoneme_weights =
        lang.phoneme_weights.empty()
            ? std::vector<double>(lang.phonemes.size(), 1.0)
            : lang.phoneme_weights;
    std::discrete_distribution<std::size_t> phoneme_pick(phoneme_weights.begin(),
                                                         phoneme_weights.end());

    std::vector<double> word_weights;
    for (const auto& w : lang.words) word_weights.push_back(w.weight);
    std::discrete_distribution<std::size_t> word_pick(word_weights.begin(),
                                                      word_weights.end());
    if (!lang.words.empty()) {
      std::vector<LexiconEntry>& entries = gen.lexicon[lang.name];
      for (const auto& w : lang.words) entries.push_back({w.word, w.phonemes});
    }

    const std::size_t utterance_count =
        lang.utterances ? lang.utterances : spec.utterances_per_language;
    for (std::size_t u = 0; u < utterance_count; ++u) {
      Utterance utt;
      char idbuf[64];
      std::snprintf(idbuf, sizeof(idbuf), "%s_%06zu", lang.name.c_str(), u);
      utt.id = idbuf;
      utt.language = lang.name;

      const int tokens = tokens_dist(rng);
      if (lang.words.empty()) {
        for (int i = 0; i < tokens; ++i) {
          std::size_t pick = phoneme_pick(rng);
          while (lang.no_adjacent_repeats && !utt.phonemes.empty() &&
                 lang.phonemes[pick] == utt.phonemes.back())
            pick = phoneme_pick(rng);
          utt.phonemes.push_back(lang.phonemes[pick]);
        }
      } else {
        for (int i = 0; i < tokens; ++i) {
          const auto& w = lang.words[word_pick(rng)];
          const std::size_t begin = utt.phonemes.size();
          utt.phonemes.insert(utt.phonemes.end(), w.phonemes.begin(),
                              w.phonemes.end());
          utt.word_spans.emplace_back(begin, utt.phonemes.size());
        }
      }

      std::vector<std::string> realized;
      std::vector<double> rows;
      std::size_t T = 0;
      for (const auto& m : utt.phonemes) {
        const auto& options = priors.at(m);
        double r = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        std::string phone = options.back().first;
        for (const auto& [p, prob] : options) {
          if (r < prob) {
            phone = p;
            break;
          }
          r -= prob;
        }
        realized.push_back(phone);
        const int k = frames_dist(rng);
        for (int f = 0; f < k; ++f, ++T)
          for (std::size_t d = 0; d < F; ++d) {
            const double proto =
                d == proto_index.at(phone) ? spec.prototype_scale : 0.0;
            rows.push_back(proto +
                           (spec.noise > 0.0 ? spec.noise * noise(rng) : 0.0));
          }
      }
      utt.features = Tensor::matrix(T, F, std::move(rows));
      gen.ref_phones[lang.name][utt.id] = std::move(realized);
      gen.corpus.utterances[lang.name].push_back(std::move(utt));
    }
  }
  return gen;
}

// Writes the generated corpus as a self-contained directory: features,
// transcripts, sidecars, the derived mapping table, the used-phone
// inventory, and the lexicon when words were declared.
inline void write_generated(const GeneratedCorpus& gen,
                            const PhoneInventory& inventory,
                            const std::string& dir) {
  namespace fs = std::filesystem;
  save_corpus(gen.corpus, dir);
  for (const auto& [lang, refs] : gen.ref_phones) {
    std::vector<TranscriptLine> lines;
    for (const auto& u : gen.corpus.utterances.at(lang))
      lines.push_back({u.id, refs.at(u.id), {}});
    save_transcripts(lines, (fs::path(dir) / (lang + ".refphones")).string());
  }
  {
    std::ofstream out(fs::path(dir) / "mappings.tsv");
    save_mappings(gen.mappings, inventory, out);
  }
  save_inventory(gen.used_inventory, (fs::path(dir) / "phones.tsv").string());
  if (!gen.lexicon.empty())
    save_lexicon(gen.lexicon, (fs::path(dir) / "lexicon.tsv").string());
}

}  // namespace allograph

#endif  // ALLOGRAPH_SYNTHETIC_HPP_
