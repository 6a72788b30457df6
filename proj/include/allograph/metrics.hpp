// allograph/metrics.hpp
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
// Error-rate scoring: minimal edit-distance alignment with unit costs,
// PER/SER aggregation, articulatory feature distance (AFD) over the
// substitution pairs, and ranked confusion pairs.
//
// AFD is the L1 distance between the 22-entry signed feature vectors of
// two phones. Symbols missing from the feature table are a hard error;
// a silent default vector would corrupt the severity statistics.

#ifndef ALLOGRAPH_METRICS_HPP_
#define ALLOGRAPH_METRICS_HPP_

#include <algorithm>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "allograph/common.hpp"
#include "allograph/inventory.hpp"

namespace allograph {

enum class EditOp { kMatch, kSub, kIns, kDel };

struct EditStep {
  EditOp op;
  // Indices into hyp/ref; valid according to the op (kIns has no ref index,
  // kDel has no hyp index).
  std::size_t hyp_index = 0;
  std::size_t ref_index = 0;
};

struct EditAlignment {
  std::size_t matches = 0;
  std::size_t substitutions = 0;
  std::size_t insertions = 0;  // hyp symbols with no ref counterpart
  std::size_t deletions = 0;   // ref symbols with no hyp counterpart
  std::vector<EditStep> steps;

  std::size_t distance() const { return substitutions + insertions + deletions; }
};

// Minimal-cost alignment with unit costs. Equal-cost choices resolve as
// substitution, then insertion, then deletion, which keeps confusion-pair
// extraction deterministic.
template <typename Symbol>
EditAlignment align_edit(const std::vector<Symbol>& hyp,
                         const std::vector<Symbol>& ref) {
  const std::size_t H = hyp.size(), R = ref.size();
  std::vector<std::size_t> dp((H + 1) * (R + 1), 0);
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& {
    return dp[i * (R + 1) + j];
  };
  for (std::size_t i = 0; i <= H; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= R; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= H; ++i)
    for (std::size_t j = 1; j <= R; ++j) {
      const std::size_t diag = at(i - 1, j - 1) + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
      const std::size_t ins = at(i - 1, j) + 1;
      const std::size_t del = at(i, j - 1) + 1;
      at(i, j) = std::min({diag, ins, del});
    }

  EditAlignment out;
  std::size_t i = H, j = R;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const std::size_t diag =
          at(i - 1, j - 1) + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
      if (diag == at(i, j)) {
        out.steps.push_back({hyp[i - 1] == ref[j - 1] ? EditOp::kMatch
                                                      : EditOp::kSub,
                             i - 1, j - 1});
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && at(i - 1, j) + 1 == at(i, j)) {
      out.steps.push_back({EditOp::kIns, i - 1, 0});
      --i;
      continue;
    }
    out.steps.push_back({EditOp::kDel, 0, j - 1});
    --j;
  }
  std::reverse(out.steps.begin(), out.steps.end());
  for (const auto& s : out.steps) switch (s.op) {
      case EditOp::kMatch: ++out.matches; break;
      case EditOp::kSub: ++out.substitutions; break;
      case EditOp::kIns: ++out.insertions; break;
      case EditOp::kDel: ++out.deletions; break;
    }
  return out;
}

// Articulatory feature distance between two phone symbols.
inline double afd(const std::string& a, const std::string& b,
                  const PhoneInventory& inventory) {
  return inventory.feature_distance(inventory.id_of(a), inventory.id_of(b));
}

// ---- corpus scoring ----

struct UtteranceScore {
  std::string id;
  std::size_t ref_len = 0;
  std::size_t insertions = 0, deletions = 0, substitutions = 0;
  double per = 0.0, ser = 0.0;
  double mean_afd = 0.0;
  bool afd_defined = false;
};

struct ConfusionPair {
  std::string ref, hyp;
  std::size_t count = 0;
  double afd = 0.0;
};

struct ScoreReport {
  std::vector<UtteranceScore> utterances;
  std::vector<std::string> missing;  // ids present on one side only
  std::size_t ref_tokens = 0;
  std::size_t matches = 0, substitutions = 0, insertions = 0, deletions = 0;
  double per = 0.0, ser = 0.0;
  double mean_afd = 0.0;     // over substitution pairs only
  bool afd_defined = false;  // false when there were no substitutions
  std::vector<ConfusionPair> confusions;  // ranked by count
};

inline ScoreReport score(
    const std::map<std::string, std::vector<std::string>>& hyp,
    const std::map<std::string, std::vector<std::string>>& ref,
    const PhoneInventory& inventory) {
  ScoreReport report;
  double afd_sum = 0.0;
  std::size_t afd_count = 0;
  std::map<std::pair<std::string, std::string>, std::size_t> confusion_counts;

  for (const auto& [id, ref_seq] : ref) {
    auto it = hyp.find(id);
    if (it == hyp.end()) {
      report.missing.push_back(id);
      continue;
    }
    const auto& hyp_seq = it->second;
    EditAlignment align = align_edit(hyp_seq, ref_seq);

    UtteranceScore us;
    us.id = id;
    us.ref_len = ref_seq.size();
    us.insertions = align.insertions;
    us.deletions = align.deletions;
    us.substitutions = align.substitutions;
    const double denom = double(std::max<std::size_t>(1, us.ref_len));
    us.per = 100.0 * double(align.distance()) / denom;
    us.ser = 100.0 * double(us.substitutions) / denom;

    double utt_afd = 0.0;
    for (const auto& s : align.steps)
      if (s.op == EditOp::kSub) {
        const double d =
            afd(hyp_seq[s.hyp_index], ref_seq[s.ref_index], inventory);
        utt_afd += d;
        afd_sum += d;
        ++afd_count;
        ++confusion_counts[{ref_seq[s.ref_index], hyp_seq[s.hyp_index]}];
      }
    us.afd_defined = us.substitutions > 0;
    us.mean_afd = us.afd_defined ? utt_afd / double(us.substitutions) : 0.0;

    report.ref_tokens += us.ref_len;
    report.matches += align.matches;
    report.substitutions += align.substitutions;
    report.insertions += align.insertions;
    report.deletions += align.deletions;
    report.utterances.push_back(std::move(us));
  }
  for (const auto& [id, seq] : hyp)
    if (!ref.count(id)) report.missing.push_back(id);
  std::sort(report.missing.begin(), report.missing.end());

  const double denom = double(std::max<std::size_t>(1, report.ref_tokens));
  report.per = 100.0 *
               double(report.substitutions + report.insertions +
                      report.deletions) /
               denom;
  report.ser = 100.0 * double(report.substitutions) / denom;
  report.afd_defined = afd_count > 0;
  report.mean_afd = report.afd_defined ? afd_sum / double(afd_count) : 0.0;

  for (const auto& [pair, count] : confusion_counts)
    report.confusions.push_back(
        {pair.first, pair.second, count, afd(pair.second, pair.first, inventory)});
  std::sort(report.confusions.begin(), report.confusions.end(),
            [](const ConfusionPair& a, const ConfusionPair& b) {
              if (a.count != b.count) return a.count > b.count;
              if (a.ref != b.ref) return a.ref < b.ref;
              return a.hyp < b.hyp;
            });
  return report;
}

// Structured text with fixed keys; confusion pairs print as
// `[correct] -> [incorrect]`.
inline void write_score_report(const ScoreReport& report, const std::string& level,
                               std::ostream& out) {
  out << "level " << level << '\n';
  out << "utterances " << report.utterances.size() << '\n';
  out << "missing " << report.missing.size() << '\n';
  for (const auto& id : report.missing) out << "missing_utt " << id << '\n';
  out << "ref_tokens " << report.ref_tokens << '\n';
  out << "matches " << report.matches << '\n';
  out << "substitutions " << report.substitutions << '\n';
  out << "insertions " << report.insertions << '\n';
  out << "deletions " << report.deletions << '\n';
  out << "per " << fixed2(report.per) << '\n';
  out << "ser " << fixed2(report.ser) << '\n';
  out << "mean_afd " << fixed2(report.mean_afd) << '\n';
  out << "afd_defined " << (report.afd_defined ? 1 : 0) << '\n';
  for (const auto& c : report.confusions)
    out << "confusion [" << c.ref << "] -> [" << c.hyp << "] count " << c.count
        << " afd " << fixed2(c.afd) << '\n';
  for (const auto& u : report.utterances)
    out << "utt " << u.id << " ref_len " << u.ref_len << " ins " << u.insertions
        << " del " << u.deletions << " sub " << u.substitutions << " per "
        << fixed2(u.per) << " ser " << fixed2(u.ser) << " afd "
        << fixed2(u.mean_afd) << " afd_defined " << (u.afd_defined ? 1 : 0)
        << '\n';
}

}  // namespace allograph

#endif  // ALLOGRAPH_METRICS_HPP_
