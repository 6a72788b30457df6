// tests/test_ctc.cpp
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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "allograph/ctc.hpp"

using namespace allograph;
using ad::Tape;
using ad::Var;

namespace {

Tensor random_log_posteriors(std::size_t frames, std::size_t cols,
                             std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  Tensor t = Tensor::zeros({frames, cols});
  for (std::size_t r = 0; r < frames; ++r) {
    double lse = kLogZero;
    for (std::size_t c = 0; c < cols; ++c) {
      t.at(r, c) = dist(rng);
      lse = c == 0 ? t.at(r, 0) : logadd(lse, t.at(r, c));
    }
    for (std::size_t c = 0; c < cols; ++c) t.at(r, c) -= lse;
  }
  return t;
}

// Exhaustive reference: sums path probabilities over every framewise
// column sequence whose collapse equals the target.
double enumerate_log_prob(const Tensor& lp, const std::vector<int>& target) {
  const std::size_t T = lp.shape[0], C = lp.shape[1];
  double total = kLogZero;
  std::vector<int> cols(T, 0);
  while (true) {
    if (collapse_frames(cols) == target) {
      double s = 0.0;
      for (std::size_t t = 0; t < T; ++t) s += lp.at(t, cols[t]);
      total = logadd(total, s);
    }
    std::size_t i = 0;
    while (i < T && ++cols[i] == static_cast<int>(C)) cols[i++] = 0;
    if (i == T) break;
  }
  return total;
}

// Exhaustive reference for the Viterbi score: max instead of sum.
double enumerate_best_log_prob(const Tensor& lp, const std::vector<int>& target) {
  const std::size_t T = lp.shape[0], C = lp.shape[1];
  double best = kLogZero;
  std::vector<int> cols(T, 0);
  while (true) {
    if (collapse_frames(cols) == target) {
      double s = 0.0;
      for (std::size_t t = 0; t < T; ++t) s += lp.at(t, cols[t]);
      best = std::max(best, s);
    }
    std::size_t i = 0;
    while (i < T && ++cols[i] == static_cast<int>(C)) cols[i++] = 0;
    if (i == T) break;
  }
  return best;
}

Tensor one_hot_lattice(const std::vector<int>& cols, std::size_t width) {
  Tensor t = Tensor::full({cols.size(), width}, kLogZero);
  for (std::size_t i = 0; i < cols.size(); ++i) t.at(i, cols[i]) = 0.0;
  return t;
}

AllophoneGraph identity_graph(std::size_t n) {
  MappingTable m;
  m.language = "id";
  for (std::size_t i = 0; i < n; ++i) {
    m.phoneme_symbols.push_back("m" + std::to_string(i));
    m.tuples.emplace_back(i, i);
  }
  return build_graph(m, GraphMode::kUniversalConstraint, n);
}

}  // namespace

TEST_CASE("deterministic single-frame target has zero loss") {
  Tape tape;
  Var lp = tape.leaf(one_hot_lattice({1}, 2));
  auto res = ctc_loss(tape, lp, {0});
  REQUIRE(res.feasible);
  CHECK(tape.value(res.loss).data[0] == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("two uniform frames over {a, blank} give likelihood 3/4") {
  // Valid paths for target [a]: (a,blank), (blank,a), (a,a); each 0.25.
  Tensor lp = Tensor::full({2, 2}, std::log(0.5));
  Tape tape;
  auto res = ctc_loss(tape, tape.leaf(lp), {0});
  REQUIRE(res.feasible);
  CHECK(tape.value(res.loss).data[0] ==
        Catch::Approx(0.28768207245178085).margin(1e-12));
}

TEST_CASE("ctc loss matches exhaustive path enumeration") {
  std::mt19937_64 rng(101);
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t T = 1 + rng() % 6;
    const std::size_t C = 2 + rng() % 3;  // symbols + blank, at most 4
    const std::size_t S = 1 + rng() % 3;
    std::vector<int> target(S);
    for (auto& y : target) y = static_cast<int>(rng() % (C - 1));
    Tensor lp = random_log_posteriors(T, C, rng);

    Tape tape;
    auto res = ctc_loss(tape, tape.leaf(lp), target);
    const double oracle = enumerate_log_prob(lp, target);
    if (!res.feasible) {
      CHECK(oracle <= kLogZeroThreshold);
      continue;
    }
    CHECK(std::fabs(res.log_prob - oracle) <=
          1e-6 * std::max(1.0, std::fabs(oracle)));
    ++checked;
  }
  CHECK(checked >= 30);
}

TEST_CASE("likelihood never exceeds one and is one only when forced") {
  std::mt19937_64 rng(103);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t T = 1 + rng() % 5;
    Tensor lp = random_log_posteriors(T, 3, rng);
    std::vector<int> target{static_cast<int>(rng() % 2)};
    Tape tape;
    auto res = ctc_loss(tape, tape.leaf(lp), target);
    if (res.feasible) CHECK(std::exp(-tape.value(res.loss).data[0]) <= 1.0 + 1e-12);
  }

  // A deterministic lattice with a unique valid alignment reaches exactly 1.
  Tensor lp = one_hot_lattice({1, 1, 2}, 3);
  Tape tape;
  auto res = ctc_loss(tape, tape.leaf(lp), {0, 1});
  REQUIRE(res.feasible);
  CHECK(std::exp(-tape.value(res.loss).data[0]) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("infeasible targets are a distinguished outcome, not a crash") {
  Tensor lp = Tensor::full({2, 3}, std::log(1.0 / 3.0));
  Tape tape;
  SECTION("target longer than the lattice") {
    auto res = ctc_loss(tape, tape.leaf(lp), {0, 1, 0});
    CHECK_FALSE(res.feasible);
  }
  SECTION("repeated labels need a blank in between") {
    auto res = ctc_loss(tape, tape.leaf(lp), {0, 0});
    CHECK_FALSE(res.feasible);
  }
}

TEST_CASE("ctc gradient matches finite differences") {
  std::mt19937_64 rng(107);
  Tensor lp = random_log_posteriors(5, 4, rng);
  auto rep = ad::gradcheck(
      [](Tape& t, const std::vector<Var>& l) {
        auto res = ctc_loss(t, l[0], {2, 0});
        REQUIRE(res.feasible);
        return res.loss;
      },
      {{"emissions", lp}});
  INFO("worst rel err " << rep.worst);
  CHECK(rep.all_pass);
}

TEST_CASE("ctc loss rejects out-of-range labels and empty targets") {
  Tensor lp = Tensor::full({3, 3}, std::log(1.0 / 3.0));
  Tape tape;
  Var v = tape.leaf(lp);
  CHECK_THROWS_AS(ctc_loss(tape, v, {5}), Error);
  CHECK_THROWS_AS(ctc_loss(tape, v, {}), Error);
}

TEST_CASE("best-path decoding collapses argmax frames") {
  SECTION("all blank gives the empty sequence") {
    CHECK(best_path_decode(one_hot_lattice({0, 0, 0}, 3)).empty());
  }
  SECTION("repeats merge and blanks drop") {
    // argmax frames a a blank b -> [a, b]
    auto out = best_path_decode(one_hot_lattice({1, 1, 0, 2}, 3));
    CHECK(out == std::vector<int>({0, 1}));
  }
  SECTION("peaked lattices recover the planted collapse") {
    std::mt19937_64 rng(113);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t T = 1 + rng() % 8, C = 2 + rng() % 4;
      std::vector<int> planted(T);
      for (auto& c : planted) c = static_cast<int>(rng() % C);
      CHECK(best_path_decode(one_hot_lattice(planted, C)) ==
            collapse_frames(planted));
    }
  }
}

TEST_CASE("collapsing a repeat-free sequence is the identity") {
  std::mt19937_64 rng(127);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = rng() % 6;
    std::vector<int> seq;
    for (std::size_t i = 0; i < n; ++i) {
      int sym = static_cast<int>(rng() % 3);
      if (!seq.empty() && seq.back() == sym) sym = (sym + 1) % 3;
      seq.push_back(sym);
    }
    std::vector<int> cols;
    for (int s : seq) cols.push_back(s + 1);
    CHECK(collapse_frames(cols) == seq);
  }
}

TEST_CASE("forced alignment on one-hot identity frames mirrors the target") {
  AllophoneGraph g = identity_graph(3);
  // Phone columns 1..3; frames spell target 0, 1 with a blank between.
  Tensor lat = one_hot_lattice({1, 0, 2, 2}, 4);
  auto path = forced_align(lat, g, {0, 1});
  REQUIRE(path.has_value());
  CHECK(path->phoneme_tokens == std::vector<int>({0, 1}));
  CHECK(path->phone_tokens == std::vector<int>({0, 1}));
  CHECK(path->collapsed_phones == std::vector<int>({0, 1}));
  for (const auto& f : path->frames) {
    CHECK((f.phone == -1) == (f.phoneme == -1));
    if (f.phone >= 0) CHECK(f.phone == f.phoneme);
  }
}

TEST_CASE("the phone track picks the dominant allophone") {
  // Phones [a]=0 and [aː]=1 both map to phoneme /a/; a frame with mass
  // 0.9 on [a] and 0.05 on [aː] must record [a].
  MappingTable m;
  m.language = "x";
  m.phoneme_symbols = {"a"};
  m.tuples = {{0, 0}, {1, 0}};
  AllophoneGraph g = build_graph(m, GraphMode::kUniversalConstraint, 2);
  Tensor lat = Tensor::zeros({1, 3});
  lat.at(0, 0) = std::log(0.05);
  lat.at(0, 1) = std::log(0.90);
  lat.at(0, 2) = std::log(0.05);
  auto path = forced_align(lat, g, {0});
  REQUIRE(path.has_value());
  CHECK(path->phone_tokens == std::vector<int>({0}));
}

TEST_CASE("viterbi score equals the exhaustive alignment maximum") {
  std::mt19937_64 rng(131);
  AllophoneGraph g = identity_graph(3);
  for (int trial = 0; trial < 30; ++trial) {
    Tensor lat = random_log_posteriors(5, 4, rng);
    std::vector<int> target{static_cast<int>(rng() % 3),
                            static_cast<int>(rng() % 3)};
    auto path = forced_align(lat, g, target);
    // Identity graph: composed lattice equals the phone lattice.
    const double oracle = enumerate_best_log_prob(lat, target);
    if (!path.has_value()) {
      CHECK(oracle <= kLogZeroThreshold);
      continue;
    }
    CHECK(path->log_prob == Catch::Approx(oracle).margin(1e-9));
    CHECK(path->phoneme_tokens == target);

    // Frame indices strictly increase.
    for (std::size_t i = 1; i < path->frames.size(); ++i)
      CHECK(path->frames[i].frame == path->frames[i - 1].frame + 1);
  }
}

TEST_CASE("alignment of an infeasible target is rejected distinctly") {
  AllophoneGraph g = identity_graph(2);
  std::mt19937_64 rng(137);
  Tensor lat = random_log_posteriors(2, 3, rng);
  CHECK_FALSE(forced_align(lat, g, {0, 1, 0}).has_value());
}

TEST_CASE("unmapped phones can surface in the phone track") {
  // Language maps only phone 0 to its phoneme; phone 1 exists in the
  // universal inventory but has no arcs. When the acoustics favor phone 1
  // on an aligned frame, the track reports it.
  MappingTable m;
  m.language = "x";
  m.phoneme_symbols = {"A"};
  m.tuples = {{0, 0}};
  AllophoneGraph g = build_graph(m, GraphMode::kUniversalConstraint, 2);
  Tensor lat = Tensor::zeros({1, 3});
  lat.at(0, 0) = std::log(0.05);
  lat.at(0, 1) = std::log(0.15);
  lat.at(0, 2) = std::log(0.80);  // unmapped phone dominates
  auto path = forced_align(lat, g, {0});
  REQUIRE(path.has_value());
  CHECK(path->phone_tokens == std::vector<int>({1}));
}
