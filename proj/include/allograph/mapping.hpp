// allograph/mapping.hpp
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
// Phone-to-phoneme mapping tables. File format, one tuple per line:
//
//   language <TAB> phone-IPA <TAB> phoneme-IPA
//
// `#` starts a comment. Phone symbols must exist in the phone inventory.
// Phoneme indices within a language follow first appearance in the file.

#ifndef ALLOGRAPH_MAPPING_HPP_
#define ALLOGRAPH_MAPPING_HPP_

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "allograph/common.hpp"
#include "allograph/inventory.hpp"

namespace allograph {

struct MappingTable {
  std::string language;
  // (phone id in the universal inventory, phoneme id within this language)
  std::vector<std::pair<std::size_t, std::size_t>> tuples;
  std::vector<std::string> phoneme_symbols;

  std::size_t num_phonemes() const { return phoneme_symbols.size(); }

  std::optional<std::size_t> phoneme_id(const std::string& symbol) const {
    for (std::size_t i = 0; i < phoneme_symbols.size(); ++i)
      if (phoneme_symbols[i] == symbol) return i;
    return std::nullopt;
  }

  std::size_t phoneme_id_or_throw(const std::string& symbol) const {
    auto id = phoneme_id(symbol);
    if (!id)
      throw_data("language '" + language + "': unknown phoneme symbol '" +
                 symbol + "'");
    return *id;
  }

  bool has_tuple(std::size_t phone, std::size_t phoneme) const {
    for (const auto& [n, m] : tuples)
      if (n == phone && m == phoneme) return true;
    return false;
  }

  bool phone_is_mapped(std::size_t phone) const {
    for (const auto& [n, m] : tuples)
      if (n == phone) return true;
    return false;
  }

  // Keep-flags over lattice columns (blank at column 0 is always kept).
  std::vector<bool> keep_columns(std::size_t n_phones) const {
    std::vector<bool> keep(n_phones + 1, false);
    keep[0] = true;
    for (const auto& [n, m] : tuples) keep[n + 1] = true;
    return keep;
  }

  void validate() const {
    if (tuples.empty())
      throw_data("language '" + language +
                 "': mapping has no tuples; each phoneme needs at least one "
                 "phone realization");
    std::set<std::pair<std::size_t, std::size_t>> seen;
    std::vector<bool> covered(phoneme_symbols.size(), false);
    for (const auto& t : tuples) {
      if (!seen.insert(t).second)
        throw_data("language '" + language + "': duplicate mapping tuple");
      if (t.second >= phoneme_symbols.size())
        throw_data("language '" + language + "': phoneme index out of range");
      covered[t.second] = true;
    }
    for (std::size_t m = 0; m < covered.size(); ++m)
      if (!covered[m])
        throw_data("language '" + language + "': phoneme '" +
                   phoneme_symbols[m] + "' has no phone realization");
  }
};

inline std::map<std::string, MappingTable> load_mappings(
    std::istream& in, const std::string& origin, const PhoneInventory& inventory) {
  std::map<std::string, MappingTable> tables;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto cols = split(t, '\t');
    if (cols.size() != 3)
      throw_data(origin + ":" + std::to_string(lineno) +
                 ": expected `language<TAB>phone<TAB>phoneme`");
    const std::string lang = trim(cols[0]);
    const std::string phone = trim(cols[1]);
    const std::string phoneme = trim(cols[2]);
    auto phone_id = inventory.find(phone);
    if (!phone_id)
      throw_data(origin + ":" + std::to_string(lineno) +
                 ": unknown phone symbol '" + phone + "'");
    MappingTable& table = tables[lang];
    table.language = lang;
    auto pid = table.phoneme_id(phoneme);
    if (!pid) {
      table.phoneme_symbols.push_back(phoneme);
      pid = table.phoneme_symbols.size() - 1;
    }
    if (table.has_tuple(*phone_id, *pid))
      throw_data(origin + ":" + std::to_string(lineno) + ": duplicate tuple (" +
                 phone + ", " + phoneme + ") for language '" + lang + "'");
    table.tuples.emplace_back(*phone_id, *pid);
  }
  for (auto& [lang, table] : tables) table.validate();
  return tables;
}

inline std::map<std::string, MappingTable> load_mappings(
    const std::string& path, const PhoneInventory& inventory) {
  std::ifstream in(path);
  if (!in) throw_data("cannot open mapping file '" + path + "'");
  return load_mappings(in, path, inventory);
}

inline void save_mappings(const std::map<std::string, MappingTable>& tables,
                          const PhoneInventory& inventory, std::ostream& out) {
  for (const auto& [lang, table] : tables)
    for (const auto& [n, m] : table.tuples)
      out << lang << '\t' << inventory.symbol(n) << '\t'
          << table.phoneme_symbols[m] << '\n';
}

}  // namespace allograph

#endif  // ALLOGRAPH_MAPPING_HPP_
