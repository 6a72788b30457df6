// allograph/corpus.hpp
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
// Corpus directory layout:
//
//   corpus.meta      key-value metadata (version, config_hash, seed, ...)
//   features.bin     packed feature matrices, one block per utterance
//   <lang>.trans     one utterance per line: utt-id <TAB> phoneme symbols,
//                    with optional `|` tokens marking word boundaries
//   <lang>.refphones evaluation-only sidecar with planted phone strings
//   mappings.tsv     phone-to-phoneme tuples (see mapping.hpp)
//   phones.tsv       copy of the universal inventory
//   lexicon.tsv      optional: language <TAB> word <TAB> phoneme symbols
//
// features.bin is little-endian: magic "ALGF", u32 version, u64 count,
// then per utterance u32 id length, id bytes, u32 T, u32 F, and T*F f64
// values in frame-major order.

#ifndef ALLOGRAPH_CORPUS_HPP_
#define ALLOGRAPH_CORPUS_HPP_

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "allograph/common.hpp"
#include "allograph/tensor.hpp"

namespace allograph {

namespace io {

inline void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = (v >> (8 * i)) & 0xff;
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = (v >> (8 * i)) & 0xff;
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline void write_f64(std::ostream& out, double v) {
  write_u64(out, std::bit_cast<std::uint64_t>(v));
}

inline std::uint32_t read_u32(std::istream& in, const std::string& origin) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw_data(origin + ": truncated feature file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
  return v;
}

inline std::uint64_t read_u64(std::istream& in, const std::string& origin) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8))
    throw_data(origin + ": truncated feature file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
  return v;
}

inline double read_f64(std::istream& in, const std::string& origin) {
  return std::bit_cast<double>(read_u64(in, origin));
}

}  // namespace io

struct Utterance {
  std::string id;
  std::string language;
  Tensor features;  // T x F
  std::vector<std::string> phonemes;  // transcript symbols, boundaries removed
  // Half-open [begin, end) spans into `phonemes`, one per word, present only
  // when the transcript carried `|` boundaries.
  std::vector<std::pair<std::size_t, std::size_t>> word_spans;
};

struct Corpus {
  std::vector<std::string> languages;
  std::map<std::string, std::vector<Utterance>> utterances;
  std::size_t feature_dim = 0;
  std::uint64_t seed = 0;
  std::string config_hash;

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& [lang, utts] : utterances) n += utts.size();
    return n;
  }
};

// ---- transcripts ----

struct TranscriptLine {
  std::string id;
  std::vector<std::string> symbols;
  std::vector<std::pair<std::size_t, std::size_t>> word_spans;
};

inline std::vector<TranscriptLine> load_transcripts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_data("cannot open transcript file '" + path + "'");
  std::vector<TranscriptLine> lines;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto cols = split(t, '\t');
    if (cols.size() != 2)
      throw_data(path + ":" + std::to_string(lineno) +
                 ": expected `utt-id<TAB>symbols`");
    TranscriptLine tl;
    tl.id = trim(cols[0]);
    bool has_bars = false;
    std::size_t word_start = 0;
    for (const auto& sym : split_ws(cols[1])) {
      if (sym == "|") {
        has_bars = true;
        if (tl.symbols.size() > word_start)
          tl.word_spans.emplace_back(word_start, tl.symbols.size());
        word_start = tl.symbols.size();
      } else {
        tl.symbols.push_back(sym);
      }
    }
    if (has_bars && tl.symbols.size() > word_start)
      tl.word_spans.emplace_back(word_start, tl.symbols.size());
    if (!has_bars) tl.word_spans.clear();
    lines.push_back(std::move(tl));
  }
  return lines;
}

inline void save_transcripts(const std::vector<TranscriptLine>& lines,
                             const std::string& path) {
  std::ofstream out(path);
  if (!out) throw_data("cannot write transcript file '" + path + "'");
  for (const auto& tl : lines) {
    out << tl.id << '\t';
    if (tl.word_spans.empty()) {
      for (std::size_t i = 0; i < tl.symbols.size(); ++i) {
        if (i) out << ' ';
        out << tl.symbols[i];
      }
    } else {
      for (std::size_t w = 0; w < tl.word_spans.size(); ++w) {
        if (w) out << " | ";
        const auto& [b, e] = tl.word_spans[w];
        for (std::size_t i = b; i < e; ++i) {
          if (i > b) out << ' ';
          out << tl.symbols[i];
        }
      }
    }
    out << '\n';
  }
}

// ---- packed feature matrices ----

inline void save_features(
    const std::vector<std::pair<std::string, const Tensor*>>& mats,
    const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("cannot write feature file '" + path + "'");
  out.write("ALGF", 4);
  io::write_u32(out, 1);
  io::write_u64(out, mats.size());
  for (const auto& [id, mat] : mats) {
    io::write_u32(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
    io::write_u32(out, static_cast<std::uint32_t>(mat->shape[0]));
    io::write_u32(out, static_cast<std::uint32_t>(mat->shape[1]));
    for (double v : mat->data) io::write_f64(out, v);
  }
}

inline std::map<std::string, Tensor> load_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open feature file '" + path + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "ALGF")
    throw_data(path + ": not an allograph feature file");
  const std::uint32_t version = io::read_u32(in, path);
  if (version != 1)
    throw_data(path + ": unsupported feature file version " +
               std::to_string(version));
  const std::uint64_t count = io::read_u64(in, path);
  std::map<std::string, Tensor> mats;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint32_t idlen = io::read_u32(in, path);
    std::string id(idlen, '\0');
    if (!in.read(id.data(), idlen)) throw_data(path + ": truncated feature file");
    const std::uint32_t T = io::read_u32(in, path);
    const std::uint32_t F = io::read_u32(in, path);
    Tensor m = Tensor::zeros({T, F});
    for (double& v : m.data) v = io::read_f64(in, path);
    if (mats.count(id)) throw_data(path + ": duplicate utterance id '" + id + "'");
    mats.emplace(std::move(id), std::move(m));
  }
  return mats;
}

// ---- key-value metadata ----

inline std::map<std::string, std::string> load_keyvalue(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_data("cannot open file '" + path + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto pos = t.find(' ');
    if (pos == std::string::npos)
      kv[t] = "";
    else
      kv[t.substr(0, pos)] = trim(t.substr(pos + 1));
  }
  return kv;
}

// ---- corpus directories ----

inline void save_corpus(const Corpus& corpus, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream meta(fs::path(dir) / "corpus.meta");
    if (!meta) throw_data("cannot write corpus metadata in '" + dir + "'");
    meta << "# allograph corpus\n";
    meta << "version " << kVersion << '\n';
    meta << "config_hash " << corpus.config_hash << '\n';
    meta << "seed " << corpus.seed << '\n';
    meta << "feature_dim " << corpus.feature_dim << '\n';
    meta << "languages";
    for (const auto& l : corpus.languages) meta << ' ' << l;
    meta << '\n';
    meta << "utterances " << corpus.total() << '\n';
  }
  std::vector<std::pair<std::string, const Tensor*>> mats;
  for (const auto& lang : corpus.languages) {
    auto it = corpus.utterances.find(lang);
    if (it == corpus.utterances.end()) continue;
    std::vector<TranscriptLine> lines;
    for (const auto& u : it->second) {
      mats.push_back({u.id, &u.features});
      lines.push_back({u.id, u.phonemes, u.word_spans});
    }
    save_transcripts(lines, (fs::path(dir) / (lang + ".trans")).string());
  }
  save_features(mats, (fs::path(dir) / "features.bin").string());
}

inline Corpus load_corpus(const std::string& dir) {
  namespace fs = std::filesystem;
  const auto meta_path = fs::path(dir) / "corpus.meta";
  if (!fs::exists(meta_path))
    throw_data("'" + dir + "' is not a corpus directory (no corpus.meta)");
  auto meta = load_keyvalue(meta_path.string());
  Corpus corpus;
  corpus.config_hash = meta.count("config_hash") ? meta["config_hash"] : "";
  corpus.seed = meta.count("seed")
                    ? std::strtoull(meta["seed"].c_str(), nullptr, 10)
                    : 0;
  corpus.feature_dim = meta.count("feature_dim")
                           ? std::strtoull(meta["feature_dim"].c_str(), nullptr, 10)
                           : 0;
  if (!meta.count("languages")) throw_data(dir + ": corpus.meta lacks languages");
  corpus.languages = split_ws(meta["languages"]);

  auto feats = load_features((fs::path(dir) / "features.bin").string());
  for (const auto& lang : corpus.languages) {
    auto lines = load_transcripts((fs::path(dir) / (lang + ".trans")).string());
    std::vector<Utterance>& utts = corpus.utterances[lang];
    for (auto& tl : lines) {
      auto it = feats.find(tl.id);
      if (it == feats.end())
        throw_data(dir + ": utterance '" + tl.id + "' has no features");
      Utterance u;
      u.id = tl.id;
      u.language = lang;
      u.features = std::move(it->second);
      u.phonemes = std::move(tl.symbols);
      u.word_spans = std::move(tl.word_spans);
      if (corpus.feature_dim == 0) corpus.feature_dim = u.features.shape[1];
      if (u.features.shape[1] != corpus.feature_dim)
        throw_data(dir + ": utterance '" + u.id + "' has feature dim " +
                   std::to_string(u.features.shape[1]) + ", corpus declares " +
                   std::to_string(corpus.feature_dim));
      utts.push_back(std::move(u));
    }
  }
  return corpus;
}

// Evaluation-only sidecar with the hidden phone strings; the trainer never
// touches these.
inline std::map<std::string, std::vector<std::string>> load_ref_phones(
    const std::string& dir, const std::string& language) {
  namespace fs = std::filesystem;
  const auto path = fs::path(dir) / (language + ".refphones");
  if (!fs::exists(path))
    throw_data("no phone reference sidecar for language '" + language + "' in '" +
               dir + "'");
  std::map<std::string, std::vector<std::string>> refs;
  for (auto& tl : load_transcripts(path.string())) refs[tl.id] = tl.symbols;
  return refs;
}

// ---- word lexicon ----

struct LexiconEntry {
  std::string word;
  std::vector<std::string> phonemes;
};

inline std::map<std::string, std::vector<LexiconEntry>> load_lexicon(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_data("cannot open lexicon file '" + path + "'");
  std::map<std::string, std::vector<LexiconEntry>> lex;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto cols = split(t, '\t');
    if (cols.size() != 3)
      throw_data(path + ":" + std::to_string(lineno) +
                 ": expected `language<TAB>word<TAB>phonemes`");
    lex[trim(cols[0])].push_back({trim(cols[1]), split_ws(cols[2])});
  }
  return lex;
}

inline void save_lexicon(
    const std::map<std::string, std::vector<LexiconEntry>>& lex,
    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw_data("cannot write lexicon file '" + path + "'");
  for (const auto& [lang, entries] : lex)
    for (const auto& e : entries) {
      out << lang << '\t' << e.word << '\t';
      for (std::size_t i = 0; i < e.phonemes.size(); ++i) {
        if (i) out << ' ';
        out << e.phonemes[i];
      }
      out << '\n';
    }
}

}  // namespace allograph

#endif  // ALLOGRAPH_CORPUS_HPP_
