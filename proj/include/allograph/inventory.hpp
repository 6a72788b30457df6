// allograph/inventory.hpp
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
// The universal phone inventory: one entry per phone with its IPA symbol and
// a 22-entry signed articulatory feature vector. File format, one line per
// phone, `#` comments allowed:
//
//   IPA-symbol <TAB> v1,v2,...,v22        with each v in {-1, 0, 1}
//
// Inventory order defines the universal phone indexing used everywhere.
// The CTC blank is not a phone; lattices reserve column 0 for it.

#ifndef ALLOGRAPH_INVENTORY_HPP_
#define ALLOGRAPH_INVENTORY_HPP_

#include <array>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "allograph/common.hpp"

namespace allograph {

inline constexpr std::size_t kNumArticulatoryFeatures = 22;

struct PhoneEntry {
  std::string symbol;
  std::array<int, kNumArticulatoryFeatures> features{};
};

class PhoneInventory {
 public:
  std::size_t size() const { return entries_.size(); }
  const PhoneEntry& entry(std::size_t id) const { return entries_.at(id); }
  const std::string& symbol(std::size_t id) const { return entries_.at(id).symbol; }
  const std::vector<PhoneEntry>& entries() const { return entries_; }

  std::optional<std::size_t> find(const std::string& symbol) const {
    auto it = index_.find(symbol);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t id_of(const std::string& symbol) const {
    auto id = find(symbol);
    if (!id) throw_data("unknown phone symbol '" + symbol + "'");
    return *id;
  }

  void add(PhoneEntry entry) {
    if (index_.count(entry.symbol))
      throw_data("duplicate phone symbol '" + entry.symbol + "'");
    index_[entry.symbol] = entries_.size();
    entries_.push_back(std::move(entry));
  }

  // L1 distance between signed ternary feature vectors.
  double feature_distance(std::size_t a, std::size_t b) const {
    const auto& fa = entries_.at(a).features;
    const auto& fb = entries_.at(b).features;
    int d = 0;
    for (std::size_t i = 0; i < kNumArticulatoryFeatures; ++i)
      d += std::abs(fa[i] - fb[i]);
    return double(d);
  }

  double feature_distance(const std::string& a, const std::string& b) const {
    return feature_distance(id_of(a), id_of(b));
  }

 private:
  std::vector<PhoneEntry> entries_;
  std::map<std::string, std::size_t> index_;
};

inline PhoneInventory load_inventory(std::istream& in, const std::string& origin) {
  PhoneInventory inv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto cols = split(t, '\t');
    if (cols.size() != 2)
      throw_data(origin + ":" + std::to_string(lineno) +
                 ": expected `symbol<TAB>features`");
    PhoneEntry e;
    e.symbol = trim(cols[0]);
    auto vals = split(cols[1], ',');
    if (vals.size() != kNumArticulatoryFeatures)
      throw_data(origin + ":" + std::to_string(lineno) + ": phone '" + e.symbol +
                 "' has " + std::to_string(vals.size()) + " features, expected " +
                 std::to_string(kNumArticulatoryFeatures));
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const std::string v = trim(vals[i]);
      if (v != "-1" && v != "0" && v != "1")
        throw_data(origin + ":" + std::to_string(lineno) +
                   ": feature value '" + v + "' not in {-1,0,1}");
      e.features[i] = std::atoi(v.c_str());
    }
    if (inv.find(e.symbol))
      throw_data(origin + ":" + std::to_string(lineno) +
                 ": duplicate phone symbol '" + e.symbol + "'");
    inv.add(std::move(e));
  }
  if (inv.size() == 0) throw_data(origin + ": empty phone inventory");
  return inv;
}

inline PhoneInventory load_inventory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_data("cannot open inventory file '" + path + "'");
  return load_inventory(in, path);
}

inline void save_inventory(const PhoneInventory& inv, std::ostream& out) {
  for (const auto& e : inv.entries()) {
    out << e.symbol << '\t';
    for (std::size_t i = 0; i < kNumArticulatoryFeatures; ++i) {
      if (i) out << ',';
      out << e.features[i];
    }
    out << '\n';
  }
}

inline void save_inventory(const PhoneInventory& inv, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw_data("cannot write inventory file '" + path + "'");
  save_inventory(inv, out);
}

}  // namespace allograph

#endif  // ALLOGRAPH_INVENTORY_HPP_
