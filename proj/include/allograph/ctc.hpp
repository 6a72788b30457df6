// allograph/ctc.hpp
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
// Connectionist temporal classification over emission lattices: the
// marginal loss via the forward-backward recursion, greedy best-path
// decoding, and Viterbi forced alignment producing joint phone/phoneme
// tracks.
//
// Label topology is the standard one: blanks are optional between distinct
// labels and mandatory between repeated labels. All recursions run in log
// space; impossible cells sit near kLogZero rather than -inf so that the
// arithmetic never produces NaNs.

#ifndef ALLOGRAPH_CTC_HPP_
#define ALLOGRAPH_CTC_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "allograph/autodiff.hpp"
#include "allograph/common.hpp"
#include "allograph/graph.hpp"
#include "allograph/tensor.hpp"

namespace allograph {

struct CtcTarget {
  std::string language;
  std::vector<int> labels;  // phoneme ids; lattice column = id + 1
};

// Shortest frame count that can carry the target: one frame per label plus
// a mandatory blank between repeated labels.
inline std::size_t ctc_min_frames(const std::vector<int>& labels) {
  std::size_t repeats = 0;
  for (std::size_t i = 1; i < labels.size(); ++i)
    if (labels[i] == labels[i - 1]) ++repeats;
  return labels.size() + repeats;
}

namespace detail {

// Extended label sequence with interleaved blanks; even positions are
// blank (column 0), odd positions carry target labels.
inline int ext_column(const std::vector<int>& labels, std::size_t s) {
  return s % 2 == 1 ? labels[s / 2] + 1 : 0;
}

inline void validate_ctc_inputs(const Tensor& lp, const std::vector<int>& labels) {
  if (lp.rank() != 2) throw_numeric("ctc: lattice must be rank 2");
  if (labels.empty()) throw_data("ctc: empty target sequence");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) + 1 >= lp.shape[1])
      throw_data("ctc: target label " + std::to_string(y) +
                 " outside the lattice's symbol range");
}

}  // namespace detail

struct CtcLossResult {
  bool feasible = false;
  ad::Var loss;        // negative log likelihood; valid when feasible
  double log_prob = kLogZero;
};

// CTC loss of a target given per-frame log posteriors. Returns an
// infeasible outcome instead of infinite loss when the target cannot fit.
// Gradients flow to the emission lattice via the occupancy posteriors.
inline CtcLossResult ctc_loss(ad::Tape& tape, ad::Var log_probs,
                              const std::vector<int>& labels) {
  const Tensor& lp = tape.value(log_probs);
  detail::validate_ctc_inputs(lp, labels);
  const std::size_t T = lp.shape[0];
  const std::size_t S = labels.size();
  const std::size_t L = 2 * S + 1;
  if (T < ctc_min_frames(labels)) return {};

  auto col = [&](std::size_t s) { return detail::ext_column(labels, s); };
  auto skip_ok = [&](std::size_t s) {
    return s % 2 == 1 && s >= 2 && col(s) != col(s - 2);
  };

  std::vector<double> alpha(T * L, kLogZero), beta(T * L, kLogZero);
  alpha[0] = lp.at(0, col(0));
  if (L > 1) alpha[1] = lp.at(0, col(1));
  for (std::size_t t = 1; t < T; ++t)
    for (std::size_t s = 0; s < L; ++s) {
      double acc = alpha[(t - 1) * L + s];
      if (s >= 1) acc = logadd(acc, alpha[(t - 1) * L + s - 1]);
      if (skip_ok(s)) acc = logadd(acc, alpha[(t - 1) * L + s - 2]);
      alpha[t * L + s] = acc + lp.at(t, col(s));
    }

  double log_prob = alpha[(T - 1) * L + L - 1];
  if (L > 1) log_prob = logadd(log_prob, alpha[(T - 1) * L + L - 2]);
  if (log_prob < kLogZeroThreshold) return {};

  // Exclusive suffix scores: beta[t][s] covers emissions t+1..T-1, so
  // alpha + beta counts each frame exactly once.
  beta[(T - 1) * L + L - 1] = 0.0;
  if (L > 1) beta[(T - 1) * L + L - 2] = 0.0;
  for (std::size_t t = T - 1; t-- > 0;)
    for (std::size_t s = 0; s < L; ++s) {
      double acc = beta[(t + 1) * L + s] + lp.at(t + 1, col(s));
      if (s + 1 < L)
        acc = logadd(acc, beta[(t + 1) * L + s + 1] + lp.at(t + 1, col(s + 1)));
      if (s + 2 < L && skip_ok(s + 2))
        acc = logadd(acc, beta[(t + 1) * L + s + 2] + lp.at(t + 1, col(s + 2)));
      beta[t * L + s] = acc;
    }

  ad::Var loss = tape.record(
      "ctc_loss", Tensor::scalar(-log_prob),
      [log_probs, labels, alpha, beta, log_prob, T, L](ad::Tape& t, ad::Var o) {
        const double g = t.grad(o).data[0];
        Tensor& gin = t.grad_ref(log_probs);
        const std::size_t cols = gin.shape[1];
        for (std::size_t tt = 0; tt < T; ++tt)
          for (std::size_t s = 0; s < L; ++s) {
            const double occ =
                std::exp(alpha[tt * L + s] + beta[tt * L + s] - log_prob);
            if (occ == 0.0) continue;
            gin.data[tt * cols + detail::ext_column(labels, s)] -= g * occ;
          }
      });
  return {true, loss, log_prob};
}

inline CtcLossResult ctc_loss(ad::Tape& tape, const Lattice& emissions,
                              const CtcTarget& target) {
  if (emissions.kind != ValueKind::kLogPosterior)
    throw_numeric("ctc_loss: lattice must hold log posteriors");
  return ctc_loss(tape, emissions.var, target.labels);
}

// ---- greedy decoding ----

// Merges adjacent repeats and removes blanks. Input is a framewise column
// sequence (0 = blank); output is symbol ids.
inline std::vector<int> collapse_frames(const std::vector<int>& frame_cols) {
  std::vector<int> out;
  int prev = -1;
  for (int c : frame_cols) {
    if (c != prev && c != 0) out.push_back(c - 1);
    prev = c;
  }
  return out;
}

// Per-frame argmax (lowest column wins ties), then collapse.
inline std::vector<int> best_path_decode(const Tensor& lattice) {
  if (lattice.rank() != 2) throw_numeric("best_path_decode: rank-2 input required");
  std::vector<int> cols(lattice.shape[0]);
  for (std::size_t t = 0; t < lattice.shape[0]; ++t) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < lattice.shape[1]; ++c)
      if (lattice.at(t, c) > lattice.at(t, best)) best = c;
    cols[t] = static_cast<int>(best);
  }
  return collapse_frames(cols);
}

// ---- forced alignment ----

struct AlignedFrame {
  std::size_t frame = 0;
  int phone = -1;    // universal phone id, -1 for blank frames
  int phoneme = -1;  // language phoneme id, -1 for blank frames
  double log_score = 0.0;
};

struct AlignmentPath {
  std::vector<AlignedFrame> frames;
  std::vector<int> phoneme_tokens;   // collapses to the alignment target
  std::vector<int> phone_tokens;     // realized phone per phoneme token
  // Half-open frame range of each phoneme token.
  std::vector<std::pair<std::size_t, std::size_t>> token_frames;
  std::vector<int> collapsed_phones; // collapse of the framewise phone track
  double log_prob = kLogZero;        // Viterbi path score
};

// Viterbi alignment of a target against the composed phoneme lattice, with
// a joint phone track. On non-blank frames the phone track is the argmax
// over (phone log posterior + arc log weight into the aligned phoneme);
// phones the language never maps compete with weight 1, which is how
// realizations outside the mapping surface during discovery. Ties break
// toward the lowest phone index.
inline std::optional<AlignmentPath> forced_align(const Tensor& phone_log_post,
                                                 const AllophoneGraph& graph,
                                                 const std::vector<int>& target) {
  Tensor composed = compose_values(phone_log_post, graph);
  detail::validate_ctc_inputs(composed, target);
  const std::size_t T = composed.shape[0];
  const std::size_t S = target.size();
  const std::size_t L = 2 * S + 1;
  if (T < ctc_min_frames(target)) return std::nullopt;

  auto col = [&](std::size_t s) { return detail::ext_column(target, s); };
  auto skip_ok = [&](std::size_t s) {
    return s % 2 == 1 && s >= 2 && col(s) != col(s - 2);
  };

  std::vector<double> delta(T * L, kLogZero);
  std::vector<int> back(T * L, -1);
  delta[0] = composed.at(0, col(0));
  back[0] = 0;
  if (L > 1) {
    delta[1] = composed.at(0, col(1));
    back[1] = 1;
  }
  for (std::size_t t = 1; t < T; ++t)
    for (std::size_t s = 0; s < L; ++s) {
      // Ties prefer the earliest extended-label position.
      double best = delta[(t - 1) * L + s];
      int from = static_cast<int>(s);
      if (s >= 1 && delta[(t - 1) * L + s - 1] > best) {
        best = delta[(t - 1) * L + s - 1];
        from = static_cast<int>(s - 1);
      }
      if (skip_ok(s) && delta[(t - 1) * L + s - 2] > best) {
        best = delta[(t - 1) * L + s - 2];
        from = static_cast<int>(s - 2);
      }
      delta[t * L + s] = best + composed.at(t, col(s));
      back[t * L + s] = from;
    }

  std::size_t end = L - 1;
  if (L > 1 && delta[(T - 1) * L + L - 2] > delta[(T - 1) * L + L - 1])
    end = L - 2;
  if (delta[(T - 1) * L + end] < kLogZeroThreshold) return std::nullopt;

  std::vector<std::size_t> state(T);
  state[T - 1] = end;
  for (std::size_t t = T - 1; t-- > 0;)
    state[t] = static_cast<std::size_t>(back[(t + 1) * L + state[t + 1]]);

  // Arcs into each phoneme, plus the weight-1 fallback for phones with no
  // arcs at all in this language.
  Tensor lw = effective_log_weights(graph);
  std::vector<std::vector<std::pair<std::size_t, double>>> into(
      graph.num_phonemes());
  for (std::size_t a = 0; a < graph.arcs.size(); ++a)
    into[graph.arcs[a].phoneme].push_back({graph.arcs[a].phone, lw.data[a]});
  std::vector<std::size_t> unmapped;
  for (std::size_t n = 0; n < graph.n_phones; ++n)
    if (!graph.phone_is_mapped(n)) unmapped.push_back(n);

  AlignmentPath path;
  path.log_prob = delta[(T - 1) * L + end];
  std::vector<int> frame_phones(T, -1);
  for (std::size_t t = 0; t < T; ++t) {
    AlignedFrame f;
    f.frame = t;
    const std::size_t s = state[t];
    if (s % 2 == 1) {
      const int m = target[s / 2];
      f.phoneme = m;
      double best = -std::numeric_limits<double>::infinity();
      std::size_t best_phone = 0;
      auto consider = [&](std::size_t phone, double weight) {
        const double score = phone_log_post.at(t, phone + 1) + weight;
        if (score > best || (score == best && phone < best_phone)) {
          best = score;
          best_phone = phone;
        }
      };
      for (const auto& [phone, w] : into[m]) consider(phone, w);
      for (std::size_t phone : unmapped) consider(phone, 0.0);
      f.phone = static_cast<int>(best_phone);
      frame_phones[t] = f.phone;
    }
    f.log_score = composed.at(t, col(s));
    path.frames.push_back(f);
  }

  // One token per odd extended position. Viterbi paths are blank-heavy, so
  // each token also claims the blank frames around its run, split at the
  // midpoints between neighboring runs; the realized phone is the modal
  // per-frame winner over that window (lowest id on ties).
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  for (std::size_t t = 0; t < T;) {
    const std::size_t s = state[t];
    if (s % 2 == 0) {
      ++t;
      continue;
    }
    std::size_t run_end = t;
    while (run_end + 1 < T && state[run_end + 1] == s) ++run_end;
    path.phoneme_tokens.push_back(target[s / 2]);
    runs.emplace_back(t, run_end + 1);
    t = run_end + 1;
  }
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const std::size_t begin =
        i == 0 ? 0 : (runs[i - 1].second + runs[i].first + 1) / 2;
    const std::size_t end =
        i + 1 == runs.size() ? T : (runs[i].second + runs[i + 1].first + 1) / 2;
    path.token_frames.emplace_back(begin, end);

    const int m = path.phoneme_tokens[i];
    std::map<int, std::size_t> counts;
    for (std::size_t t = begin; t < end; ++t) {
      double best = -std::numeric_limits<double>::infinity();
      std::size_t best_phone = 0;
      auto consider = [&](std::size_t phone, double weight) {
        const double score = phone_log_post.at(t, phone + 1) + weight;
        if (score > best || (score == best && phone < best_phone)) {
          best = score;
          best_phone = phone;
        }
      };
      for (const auto& [phone, w] : into[m]) consider(phone, w);
      for (std::size_t phone : unmapped) consider(phone, 0.0);
      ++counts[static_cast<int>(best_phone)];
    }
    int modal = -1;
    std::size_t best_count = 0;
    for (const auto& [phone, count] : counts)
      if (count > best_count) {
        best_count = count;
        modal = phone;
      }
    path.phone_tokens.push_back(modal);
  }

  std::vector<int> phone_cols(T);
  for (std::size_t t = 0; t < T; ++t) phone_cols[t] = frame_phones[t] + 1;
  path.collapsed_phones = collapse_frames(phone_cols);
  return path;
}

}  // namespace allograph

#endif  // ALLOGRAPH_CTC_HPP_
