// Copyright (c) 2026 The cbias Authors
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

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "cbias/scorer.h"

namespace cbias::testing {

// Follows a fixed script: puts `peak` on script[len(context)] (eos past the
// end) and spreads the rest evenly. peak = 1 gives one-hot rows.
class ScriptScorer : public Scorer {
 public:
  ScriptScorer(std::size_t vocab_size, std::vector<TokenId> script, TokenId eos,
               double peak = 1.0)
      : v_(vocab_size), script_(std::move(script)), eos_(eos), peak_(peak) {}

  std::size_t vocab_size() const override { return v_; }

  std::vector<double> ScoreNext(std::span<const TokenId> context) override {
    ++calls_;
    const TokenId target = context.size() < script_.size() ? script_[context.size()] : eos_;
    const double rest = (1.0 - peak_) / static_cast<double>(v_ - 1);
    std::vector<double> logp(v_, rest > 0 ? std::log(rest)
                                          : -std::numeric_limits<double>::infinity());
    logp[target] = std::log(peak_);
    return logp;
  }

  std::size_t calls() const { return calls_; }

 private:
  std::size_t v_;
  std::vector<TokenId> script_;
  TokenId eos_;
  double peak_;
  std::size_t calls_ = 0;
};

// Pseudo-random strictly positive rows keyed by (seed, context); the same
// context always yields the same row.
class HashScorer : public Scorer {
 public:
  HashScorer(std::size_t vocab_size, std::uint64_t seed, double sharpness = 3.0)
      : v_(vocab_size), seed_(seed), sharpness_(sharpness) {}

  std::size_t vocab_size() const override { return v_; }

  std::vector<double> ScoreNext(std::span<const TokenId> context) override {
    std::uint64_t h = seed_ * 0x9E3779B97F4A7C15ull + 17;
    for (TokenId t : context) h = (h ^ static_cast<std::uint64_t>(t + 1)) * 0x100000001B3ull;
    std::mt19937_64 rng(h);
    std::normal_distribution<double> normal(0.0, sharpness_);
    std::vector<double> logits(v_);
    double mx = -std::numeric_limits<double>::infinity();
    for (double& x : logits) {
      x = normal(rng);
      mx = std::max(mx, x);
    }
    double z = 0.0;
    for (double x : logits) z += std::exp(x - mx);
    for (double& x : logits) x = x - mx - std::log(z);
    return logits;
  }

 private:
  std::size_t v_;
  std::uint64_t seed_;
  double sharpness_;
};

// Random lexicon of distinct-ish token sequences over ids [lo, hi].
inline std::vector<std::vector<TokenId>> RandomPhrases(std::mt19937_64& rng, int max_phrases,
                                                       int max_len, TokenId lo, TokenId hi) {
  std::uniform_int_distribution<int> count(1, max_phrases);
  std::uniform_int_distribution<int> len(1, max_len);
  std::uniform_int_distribution<TokenId> tok(lo, hi);
  std::vector<std::vector<TokenId>> out(count(rng));
  for (auto& p : out) {
    p.resize(len(rng));
    for (auto& t : p) t = tok(rng);
  }
  return out;
}

}  // namespace cbias::testing
