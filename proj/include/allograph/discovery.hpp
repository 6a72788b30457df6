// allograph/discovery.hpp
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
// Linguistic applications over joint phone/phoneme alignments: allophone
// discovery (realization rates, triphone contexts, hypothesized new
// mappings) and pronunciation-variant collection against a word lexicon.

#ifndef ALLOGRAPH_DISCOVERY_HPP_
#define ALLOGRAPH_DISCOVERY_HPP_

#include <algorithm>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "allograph/common.hpp"
#include "allograph/corpus.hpp"
#include "allograph/ctc.hpp"
#include "allograph/inventory.hpp"
#include "allograph/mapping.hpp"

namespace allograph {

struct TriphoneContext {
  std::string context;  // "[xyz]" with `#` at utterance boundaries
  std::size_t count = 0;
};

struct RealizationStat {
  std::string phoneme;
  std::string phone;
  std::size_t count = 0;
  double rate = 0.0;  // percent of the phoneme's aligned tokens
  bool predefined = false;
  std::vector<TriphoneContext> contexts;  // top 3 by count
};

// Counts realized phones per aligned phoneme token over an alignment
// corpus. Pairs absent from the mapping table are hypothesized new
// mappings; they are reported only at or above `min_hypothesized_count`
// to suppress alignment noise. Triphone contexts come from the token-level
// realized phone sequence with `#` marking utterance boundaries.
inline std::vector<RealizationStat> discover_allophones(
    const std::vector<AlignmentPath>& alignments, const MappingTable& mapping,
    const PhoneInventory& inventory, std::size_t min_hypothesized_count = 5) {
  std::map<std::size_t, std::size_t> phoneme_tokens;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> pair_counts;
  std::map<std::pair<std::size_t, std::size_t>, std::map<std::string, std::size_t>>
      context_counts;

  for (const AlignmentPath& path : alignments) {
    const std::size_t n = path.phoneme_tokens.size();
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t m = static_cast<std::size_t>(path.phoneme_tokens[i]);
      const std::size_t p = static_cast<std::size_t>(path.phone_tokens[i]);
      ++phoneme_tokens[m];
      ++pair_counts[{m, p}];
      const std::string prev =
          i == 0 ? "#" : inventory.symbol(path.phone_tokens[i - 1]);
      const std::string next =
          i + 1 == n ? "#" : inventory.symbol(path.phone_tokens[i + 1]);
      ++context_counts[{m, p}]
                      ["[" + prev + inventory.symbol(p) + next + "]"];
    }
  }

  std::vector<RealizationStat> stats;
  for (const auto& [pair, count] : pair_counts) {
    const auto& [m, p] = pair;
    RealizationStat stat;
    stat.phoneme = mapping.phoneme_symbols.at(m);
    stat.phone = inventory.symbol(p);
    stat.count = count;
    stat.rate = 100.0 * double(count) / double(phoneme_tokens.at(m));
    stat.predefined = mapping.has_tuple(p, m);
    if (!stat.predefined && count < min_hypothesized_count) continue;
    std::vector<std::pair<std::string, std::size_t>> ctx(
        context_counts.at(pair).begin(), context_counts.at(pair).end());
    std::sort(ctx.begin(), ctx.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    for (std::size_t i = 0; i < ctx.size() && i < 3; ++i)
      stat.contexts.push_back({ctx[i].first, ctx[i].second});
    stats.push_back(std::move(stat));
  }

  std::sort(stats.begin(), stats.end(),
            [&](const RealizationStat& a, const RealizationStat& b) {
              if (a.phoneme != b.phoneme) {
                // Phoneme axis order, not lexicographic.
                return *mapping.phoneme_id(a.phoneme) <
                       *mapping.phoneme_id(b.phoneme);
              }
              if (a.count != b.count) return a.count > b.count;
              return a.phone < b.phone;
            });
  return stats;
}

inline void write_discovery_report(const std::vector<RealizationStat>& stats,
                                   const std::string& language,
                                   std::ostream& out) {
  out << "language " << language << '\n';
  out << "columns phoneme phone count rate predefined contexts\n";
  for (const auto& s : stats) {
    out << "realization /" << s.phoneme << "/ [" << s.phone << "] count "
        << s.count << " rate " << fixed2(s.rate) << " predefined "
        << (s.predefined ? "yes" : "no") << " contexts";
    for (const auto& c : s.contexts) out << ' ' << c.context << ':' << c.count;
    out << '\n';
  }
}

// ---- pronunciation variants ----

struct PronunciationVariant {
  std::vector<std::string> phones;
  std::size_t count = 0;
  double share = 0.0;  // percent of the word's collected occurrences
};

struct PronunciationEntry {
  std::string language;
  std::string word;
  std::vector<std::string> phonemes;  // lexicon form
  std::size_t occurrences = 0;        // correctly recognized occurrences
  std::vector<PronunciationVariant> variants;  // sorted by share, descending
};

// One word-span occurrence extracted from an aligned utterance.
struct WordOccurrence {
  std::vector<std::string> ref_phonemes;  // reference span
  std::vector<std::string> recognized;    // decoded phonemes on the span
  std::vector<std::string> realized;      // aligned phone track on the span
};

// Collects phonetic variants for word occurrences whose recognized phoneme
// span exactly matches the lexicon entry. Occurrences whose reference span
// is not in the lexicon are skipped and counted.
inline std::vector<PronunciationEntry> collect_pronunciations(
    const std::string& language, const std::vector<WordOccurrence>& occurrences,
    const std::vector<LexiconEntry>& lexicon,
    std::size_t* skipped_no_lexicon = nullptr) {
  if (skipped_no_lexicon) *skipped_no_lexicon = 0;

  std::map<std::string, std::size_t> word_index;  // word -> lexicon position
  for (std::size_t i = 0; i < lexicon.size(); ++i)
    word_index.emplace(lexicon[i].word, i);

  std::map<std::string, std::map<std::vector<std::string>, std::size_t>> variants;
  std::map<std::string, std::size_t> totals;

  for (const WordOccurrence& occ : occurrences) {
    // Resolve the word by its reference phonemic form; first lexicon entry
    // wins for homophones.
    const LexiconEntry* entry = nullptr;
    for (const auto& e : lexicon)
      if (e.phonemes == occ.ref_phonemes) {
        entry = &e;
        break;
      }
    if (!entry) {
      if (skipped_no_lexicon) ++*skipped_no_lexicon;
      continue;
    }
    if (occ.recognized != entry->phonemes) continue;  // not transcribed correctly
    ++variants[entry->word][occ.realized];
    ++totals[entry->word];
  }

  std::vector<PronunciationEntry> entries;
  for (const auto& [word, vmap] : variants) {
    PronunciationEntry entry;
    entry.language = language;
    entry.word = word;
    entry.phonemes = lexicon[word_index.at(word)].phonemes;
    entry.occurrences = totals.at(word);
    for (const auto& [phones, count] : vmap) {
      PronunciationVariant v;
      v.phones = phones;
      v.count = count;
      v.share = 100.0 * double(count) / double(entry.occurrences);
      entry.variants.push_back(std::move(v));
    }
    std::sort(entry.variants.begin(), entry.variants.end(),
              [](const PronunciationVariant& a, const PronunciationVariant& b) {
                if (a.count != b.count) return a.count > b.count;
                return a.phones < b.phones;
              });
    entries.push_back(std::move(entry));
  }
  std::sort(entries.begin(), entries.end(),
            [](const PronunciationEntry& a, const PronunciationEntry& b) {
              return a.word < b.word;
            });
  return entries;
}

inline void write_pronunciation_report(
    const std::vector<PronunciationEntry>& entries, std::ostream& out) {
  out << "columns language word phonemic occurrences variants\n";
  for (const auto& e : entries) {
    out << "word " << e.language << ' ' << e.word << " /";
    for (std::size_t i = 0; i < e.phonemes.size(); ++i) {
      if (i) out << ' ';
      out << e.phonemes[i];
    }
    out << "/ occurrences " << e.occurrences << " variants";
    for (const auto& v : e.variants) {
      out << " [";
      for (std::size_t i = 0; i < v.phones.size(); ++i) {
        if (i) out << ' ';
        out << v.phones[i];
      }
      out << "]:" << fixed2(v.share) << "%:" << v.count;
    }
    out << '\n';
  }
}

}  // namespace allograph

#endif  // ALLOGRAPH_DISCOVERY_HPP_
